"""Linear stochastic wave equation driven by a (d+1)-parametric Hermite sheet.

The mild solution is a Wiener integral of the wave Green's function against
the sheet, realized here as a sum of exact cell averages of the Green's
function times generalized noise increments over space-time cells.  Both
deterministic second-moment routes (closed-form spatial kernel for d=1,
spectral measure for d in {1,2}) are provided so they can check each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from hfield.core import FieldRealization, GeneratorTag, GridSpec, HurstIndex, cell_increments
from hfield.hermite import axis_increment_cov, generate_gaussian_exact, generate_hermite_variation
from hfield.integral import AccuracyError
from hfield.randgen import RngStream
from hfield.stats import scaling_regression


class ExistenceError(ValueError):
    """The existence predicate beta < 2H + 1 fails for this configuration."""


@dataclass(frozen=True)
class WaveConfig:
    """Space dimension, Hurst data, horizon, spatial box, grid resolutions.

    The grid covers time [0, T] with cells_t cells and each space axis
    [-M, M] with cells_x cells.  noise_resolution is the per-unit lattice
    of the variation generator; cell widths must sit on that lattice.
    """

    space_dim: int
    q: int
    hurst_time: float
    hurst_space: tuple[float, ...]
    horizon: float
    half_width: float
    cells_t: int
    cells_x: int
    noise_resolution: int | None = None
    noise_generator: str = "variation"

    def __post_init__(self):
        object.__setattr__(self, "hurst_space", tuple(float(h) for h in self.hurst_space))
        if self.space_dim < 1:
            raise ValueError("space dimension must be >= 1")
        if len(self.hurst_space) != self.space_dim:
            raise ValueError("hurst_space length must equal space_dim")
        # validates the (1/2,1) windows and q
        self.hurst()
        if self.horizon <= 0 or self.half_width <= 0:
            raise ValueError("horizon and half width must be positive")
        if self.cells_t < 1 or self.cells_x < 1:
            raise ValueError("grids need at least one cell per axis")
        if self.noise_generator not in ("variation", "gaussian_exact"):
            raise ValueError(f"unknown noise generator {self.noise_generator!r}")

    def hurst(self) -> HurstIndex:
        return HurstIndex((self.hurst_time, *self.hurst_space), self.q)

    @property
    def dt(self) -> float:
        return self.horizon / self.cells_t

    @property
    def dx(self) -> float:
        return 2 * self.half_width / self.cells_x

    def resolved_noise_resolution(self) -> int:
        n = self.noise_resolution
        if n is None:
            n = int(round(self.cells_t / self.horizon))
        for name, w in (("time", self.dt), ("space", self.dx)):
            if abs(n * w - round(n * w)) > 1e-9:
                raise ValueError(
                    f"noise resolution {n} does not align with the {name} grid "
                    f"(cell width {w}); choose commensurate cells"
                )
        return n


@dataclass(frozen=True)
class BetaReport:
    """Existence exponent and the predicates gating the solver and verifiers."""

    beta: float
    existence_bound: float          # 2H + 1
    exists: bool                    # beta < 2H + 1
    window_lo: float                # 2H - 1
    window_hi: float                # d ^ (2H + 1)
    in_regularity_window: bool
    scaling_exponent: float         # 2H + 1 - beta


def beta_exponent_values(space_dim: int, hurst_time: float, hurst_space: Sequence[float]) -> BetaReport:
    """beta = d - sum_i (2H_i - 1) plus the existence / regularity predicates."""
    hs = [float(h) for h in hurst_space]
    if len(hs) != space_dim:
        raise ValueError("hurst_space length must equal space_dim")
    beta = space_dim - sum(2 * h - 1 for h in hs)
    bound = 2 * hurst_time + 1
    lo = 2 * hurst_time - 1
    hi = min(float(space_dim), bound)
    return BetaReport(
        beta=beta,
        existence_bound=bound,
        exists=beta < bound,
        window_lo=lo,
        window_hi=hi,
        in_regularity_window=lo < beta < hi,
        scaling_exponent=bound - beta,
    )


def beta_exponent(config: WaveConfig) -> BetaReport:
    return beta_exponent_values(config.space_dim, config.hurst_time, config.hurst_space)


def greens_function(d: int, t: float, x) -> float:
    """Wave fundamental solution; zero outside the light cone |x| < t."""
    if d == 3:
        raise ValueError("d=3 Green's function is measure-valued and unsupported")
    if d not in (1, 2):
        raise ValueError(f"space dimension {d} unsupported (d in {{1, 2}})")
    if t <= 0:
        raise ValueError("greens_function requires t > 0")
    r = abs(float(x)) if np.isscalar(x) else float(np.linalg.norm(np.asarray(x, float)))
    if r >= t:
        return 0.0
    if d == 1:
        return 0.5
    return 1.0 / (2 * math.pi * math.sqrt(t * t - r * r))


def greens_fourier(d: int, t: float, xi) -> float:
    """Fourier transform sin(t|xi|)/|xi| with the removable value t at xi = 0."""
    if t <= 0:
        raise ValueError("greens_fourier requires t > 0")
    rho = abs(float(xi)) if np.isscalar(xi) else float(np.linalg.norm(np.asarray(xi, float)))
    return float(t * np.sinc(t * rho / np.pi))


def anisotropic_metric(p1: Sequence[float], p2: Sequence[float], config: WaveConfig) -> float:
    """|t-s|^{2H+1-beta} + |x-y|^{2H+1-beta} between space-time points."""
    theta = beta_exponent(config).scaling_exponent
    p1 = np.asarray(p1, float)
    p2 = np.asarray(p2, float)
    dt = abs(p1[0] - p2[0])
    dx = float(np.linalg.norm(p1[1:] - p2[1:]))
    return dt**theta + dx**theta


# ---------------------------------------------------------------------------
# Cell-averaged Green's function weights
# ---------------------------------------------------------------------------


def _hint(T0: np.ndarray, T1: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Antiderivative in w of clip(t - w, s0, s1) - s0, from 0 (T0 = t-s0, T1 = t-s1).

    Piecewise: constant s1-s0 for w <= T1, linear T0 - w on [T1, T0], zero after;
    negative pieces clamp away automatically.
    """
    l = np.maximum(T1, 0.0)
    u = np.clip(w, l, np.maximum(T0, 0.0))
    return (T0 - T1) * np.minimum(np.maximum(w, 0.0), l) + T0 * (u - l) - 0.5 * (u * u - l * l)


def _d1_cell_integrals(t: float, x: float, s_edges: np.ndarray, y_edges: np.ndarray) -> np.ndarray:
    """Exact integral of (1/2) 1{|x-y| < t-s} over every (time x space) cell."""
    T0 = (t - s_edges[:-1])[:, None]
    T1 = (t - s_edges[1:])[:, None]
    y0 = y_edges[:-1][None, :]
    y1 = y_edges[1:][None, :]
    left = _hint(T0, T1, np.maximum(x - y0, 0.0)) - _hint(T0, T1, np.maximum(x - y1, 0.0))
    right = _hint(T0, T1, np.maximum(y1 - x, 0.0)) - _hint(T0, T1, np.maximum(y0 - x, 0.0))
    return 0.5 * (left + right)


def _ray_box_range(x: np.ndarray, lo: np.ndarray, hi: np.ndarray, theta: np.ndarray):
    """Radial interval where the ray x + r(cos,sin) meets [lo,hi]^2, r >= 0."""
    dirs = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_lo = (lo[None, :] - x[None, :]) / dirs
        t_hi = (hi[None, :] - x[None, :]) / dirs
    near = np.minimum(t_lo, t_hi)
    far = np.maximum(t_lo, t_hi)
    # axis-parallel rays: replace NaN/inf slabs by the full line when inside
    inside = (x[None, :] >= lo[None, :]) & (x[None, :] <= hi[None, :])
    near = np.where(np.isfinite(near), near, np.where(inside, -np.inf, np.inf))
    far = np.where(np.isfinite(far), far, np.where(inside, np.inf, -np.inf))
    r0 = np.maximum(near.max(axis=1), 0.0)
    r1 = far.min(axis=1)
    return r0, r1


def _d2_cell_integral(
    t: float, x: np.ndarray, s0: float, s1: float,
    lo: np.ndarray, hi: np.ndarray, n_theta: int, n_s: int,
) -> float:
    """Green's mass over a (time x plane-cell) box: exact radially, quadrature in angle/time."""
    from scipy.special import roots_legendre

    gx, gw = roots_legendre(n_s)
    s_pts = s0 + (gx + 1) * (s1 - s0) / 2
    s_wts = gw * (s1 - s0) / 2
    theta = (np.arange(n_theta) + 0.5) * (2 * np.pi / n_theta)
    r0, r1 = _ray_box_range(x, lo, hi, theta)
    ok = r1 > r0
    total = 0.0
    for sp, sw in zip(s_pts, s_wts):
        tau = t - sp
        if tau <= 0:
            continue
        a = np.minimum(r0[ok], tau)
        b = np.minimum(r1[ok], tau)
        seg = np.sqrt(np.maximum(tau * tau - a * a, 0.0)) - np.sqrt(np.maximum(tau * tau - b * b, 0.0))
        total += sw * float(seg.sum()) * (2 * np.pi / n_theta)
    return total / (2 * math.pi)


def noise_grid(config: WaveConfig) -> GridSpec:
    """Origin-0 grid generating the driving increments (space later shifted to [-M, M])."""
    d = config.space_dim
    return GridSpec(
        (0.0,) * (1 + d),
        (config.horizon,) + (2 * config.half_width,) * d,
        (config.cells_t,) + (config.cells_x,) * d,
    )


def wave_query_weights(config: WaveConfig, points: np.ndarray, n_theta: int = 96, n_s: int = 4) -> np.ndarray:
    """Cell-average coefficients of the Green's function for each query point.

    Returns shape (n_points, cells_t, cells_x[, cells_x]); entry = cell
    integral of G divided by cell volume, exact for d=1.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = config.space_dim
    M = config.half_width
    s_edges = np.linspace(0.0, config.horizon, config.cells_t + 1)
    y_edges = np.linspace(-M, M, config.cells_x + 1)
    vol = config.dt * config.dx**d
    if d == 1:
        out = np.empty((pts.shape[0], config.cells_t, config.cells_x))
        for k, (t, x) in enumerate(pts):
            if abs(x) + t > M + 1e-9:
                raise ValueError(
                    f"query ({t}, {x}): backward light cone leaves the box "
                    f"(need half_width >= t + |x|)"
                )
            out[k] = _d1_cell_integrals(t, x, s_edges, y_edges) / vol if t > 0 else 0.0
        return out
    out = np.zeros((pts.shape[0], config.cells_t, config.cells_x, config.cells_x))
    for k, p in enumerate(pts):
        t, x = p[0], p[1:]
        if np.max(np.abs(x)) + t > M + 1e-9:
            raise ValueError(f"query {tuple(p)}: backward light cone leaves the box")
        if t <= 0:
            continue
        for i in range(config.cells_t):
            if t - s_edges[i] <= 0:
                continue
            for j1 in range(config.cells_x):
                for j2 in range(config.cells_x):
                    lo = np.array([y_edges[j1], y_edges[j2]])
                    hi = np.array([y_edges[j1 + 1], y_edges[j2 + 1]])
                    # skip cells entirely outside the widest cone
                    gap = np.maximum(lo - x, 0.0) + np.maximum(x - hi, 0.0)
                    if float(np.linalg.norm(gap)) >= t - s_edges[i]:
                        continue
                    out[k, i, j1, j2] = _d2_cell_integral(
                        t, x, s_edges[i], s_edges[i + 1], lo, hi, n_theta, n_s
                    ) / vol
    return out


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def solution_grid(config: WaveConfig) -> GridSpec:
    """Node grid of the solved field: time [0, T] by space [-(M-T), M-T]^d.

    The spatial box shrinks by the horizon so every node keeps its full
    backward light cone inside the simulated noise box.
    """
    d = config.space_dim
    m_sol = config.half_width - config.horizon
    if m_sol <= 0:
        raise ValueError(
            f"half_width {config.half_width} too small: need half_width > horizon "
            f"{config.horizon} so light cones fit the noise box"
        )
    n_sol = 2 * m_sol / config.dx
    if abs(n_sol - round(n_sol)) > 1e-9:
        raise ValueError(
            f"solution half width {m_sol} is not a whole number of space cells "
            f"(dx = {config.dx}); adjust cells_x"
        )
    return GridSpec(
        (0.0,) + (-m_sol,) * d,
        (config.horizon,) + (2 * m_sol,) * d,
        (config.cells_t,) + (int(round(n_sol)),) * d,
    )


@dataclass(frozen=True)
class WaveSolution:
    """Mild-solution samples on the (time x space) node grid."""

    config: WaveConfig
    values: np.ndarray
    seed: int

    def solution_grid(self) -> GridSpec:
        return solution_grid(self.config)

    def to_field(self) -> FieldRealization:
        tag = (
            GeneratorTag.GAUSSIAN_EXACT
            if self.config.noise_generator == "gaussian_exact"
            else GeneratorTag.HERMITE_VARIATION
        )
        return FieldRealization(
            grid=self.solution_grid(),
            values=self.values,
            hurst=self.config.hurst(),
            seed=self.seed,
            generator_tag=tag,
            time_axis=0,
        )


def require_existence(config: WaveConfig) -> BetaReport:
    rep = beta_exponent(config)
    if not rep.exists:
        raise ExistenceError(
            f"no mild solution: existence requires beta < 2H + 1, but "
            f"beta = {rep.beta:.6g} >= {rep.existence_bound:.6g}"
        )
    return rep


def sample_noise_increments(config: WaveConfig, rng: RngStream) -> np.ndarray:
    """Generalized increments of the driving sheet over every space-time cell.

    The sheet is generated on an origin-0 box and its increments reused on
    the shifted box [0,T] x [-M,M]^d; increment laws agree by stationarity.
    """
    grid = noise_grid(config)
    hurst = config.hurst()
    if config.noise_generator == "gaussian_exact":
        field = generate_gaussian_exact(grid, hurst, rng)
    else:
        field = generate_hermite_variation(grid, hurst, config.resolved_noise_resolution(), rng)
    return cell_increments(field.values)


def solve_wave_values(
    config: WaveConfig,
    rng: RngStream,
    points: np.ndarray,
    weights: np.ndarray | None = None,
    noise: np.ndarray | None = None,
) -> np.ndarray:
    """u at the query points for one driving realization."""
    require_existence(config)
    if config.space_dim > 2:
        raise ValueError("sampling supports d in {1, 2} (d=3 Green's function is a measure)")
    if weights is None:
        weights = wave_query_weights(config, points)
    if noise is None:
        noise = sample_noise_increments(config, rng)
    return weights.reshape(weights.shape[0], -1) @ noise.ravel()


def solve_wave_mild(config: WaveConfig, rng: RngStream) -> WaveSolution:
    """Mild solution on the full node grid; u(0, .) = 0 exactly."""
    require_existence(config)
    if config.space_dim > 2:
        raise ValueError("sampling supports d in {1, 2} (d=3 Green's function is a measure)")
    grid = solution_grid(config)
    axes = [grid.axis_nodes(i) for i in range(grid.d)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, grid.d)
    noise = sample_noise_increments(config, rng)
    vals = np.zeros(mesh.shape[0])
    chunk = max(1, 2**22 // max(noise.size, 1))
    for start in range(0, mesh.shape[0], chunk):
        pts = mesh[start : start + chunk]
        w = wave_query_weights(config, pts)
        vals[start : start + pts.shape[0]] = w.reshape(pts.shape[0], -1) @ noise.ravel()
    return WaveSolution(config=config, values=vals.reshape(grid.node_counts), seed=rng.seed)


# ---------------------------------------------------------------------------
# Deterministic second-moment oracles
# ---------------------------------------------------------------------------


def _d1_cross_moment_mesh(
    config: WaveConfig, p1: Sequence[float], p2: Sequence[float], n_time: int
) -> float:
    """Closed-spatial-kernel route (d=1): singular time weight integrated
    exactly over cell pairs, smooth spatial kernel at cell midpoints."""
    H = config.hurst_time
    h1 = config.hurst_space[0]
    (t, x), (s, y) = (float(p1[0]), float(p1[1])), (float(p2[0]), float(p2[1]))
    if t == 0 or s == 0:
        return 0.0
    delta = t - s
    eu = np.linspace(0.0, t, n_time + 1)
    ev = np.linspace(0.0, s, n_time + 1)
    mu = 0.5 * (eu[:-1] + eu[1:])
    mv = 0.5 * (ev[:-1] + ev[1:])
    w = axis_increment_cov(
        H,
        eu[:-1, None] - delta,
        eu[1:, None] - delta,
        ev[None, :-1],
        ev[None, 1:],
    )
    k = 0.25 * axis_increment_cov(
        h1, x - mu[:, None], x + mu[:, None], y - mv[None, :], y + mv[None, :]
    )
    return float(np.sum(w * k))


def _spectral_grid(hurst_space: Sequence[float], xi_max: float, n_w: int):
    """Per-axis flattening substitution xi = w^{1/(2(1-H))} for the measure
    |xi|^{1-2H} dxi; midpoint nodes in w-space."""
    nodes, weights = [], []
    for h in hurst_space:
        kappa = 2 * h * (2 * h - 1) * math.exp(gammaln(2 * h - 1)) * math.sin(math.pi * h)
        e = 2 * (1 - h)
        wmax = xi_max**e
        w = (np.arange(n_w) + 0.5) * (wmax / n_w)
        xi = w ** (1.0 / e)
        # measure: kappa/pi * dw / (2(1-H)) per half-axis, cos factor handles signs
        weights.append(np.full(n_w, kappa / math.pi * (wmax / n_w) / e))
        nodes.append(xi)
    return nodes, weights


def spectral_time_kernel(
    hurst_space: Sequence[float],
    u: np.ndarray,
    v: np.ndarray,
    delta: Sequence[float],
    xi_max: float = 256.0,
    n_w: int = 2048,
) -> np.ndarray:
    """S(u, v) = int sin(u|xi|) sin(v|xi|) / |xi|^2 cos(xi . delta) mu(dxi)."""
    d = len(hurst_space)
    nodes, weights = _spectral_grid(hurst_space, xi_max, n_w)
    if d == 1:
        rho = nodes[0]
        wts = weights[0] * np.cos(nodes[0] * float(delta[0]))
    else:
        rho = np.sqrt(nodes[0][:, None] ** 2 + nodes[1][None, :] ** 2).ravel()
        wts = (
            np.outer(weights[0] * np.cos(nodes[0] * float(delta[0])),
                     weights[1] * np.cos(nodes[1] * float(delta[1])))
        ).ravel()
    su = u[:, None] * np.sinc(np.outer(u, rho) / np.pi)
    sv = v[:, None] * np.sinc(np.outer(v, rho) / np.pi)
    return (su * wts[None, :]) @ sv.T


def _spectral_cross_moment(
    config: WaveConfig,
    p1: Sequence[float],
    p2: Sequence[float],
    n_time: int,
    xi_max: float,
    n_w: int,
) -> float:
    H = config.hurst_time
    t, s = float(p1[0]), float(p2[0])
    if t == 0 or s == 0:
        return 0.0
    delta_x = np.asarray(p1[1:], float) - np.asarray(p2[1:], float)
    eu = np.linspace(0.0, t, n_time + 1)
    ev = np.linspace(0.0, s, n_time + 1)
    w = axis_increment_cov(
        H,
        eu[:-1, None] - (t - s),
        eu[1:, None] - (t - s),
        ev[None, :-1],
        ev[None, 1:],
    )
    smat = spectral_time_kernel(
        config.hurst_space,
        0.5 * (eu[:-1] + eu[1:]),
        0.5 * (ev[:-1] + ev[1:]),
        delta_x,
        xi_max,
        n_w,
    )
    return float(np.sum(w * smat))


def solution_cross_moment(
    config: WaveConfig,
    p1: Sequence[float],
    p2: Sequence[float],
    n_time: int = 128,
    rtol: float = 0.01,
    route: str | None = None,
    xi_max: float = 256.0,
    n_w: int = 2048,
) -> float:
    """E[u(p1) u(p2)] by deterministic quadrature with a refinement check.

    route "closed" (d=1 only) uses the exact spatial kernel; "spectral"
    works for d in {1, 2}.  The value at mesh n_time must agree with the
    doubled mesh within rtol, else AccuracyError carries the fine value.
    """
    require_existence(config)
    if route is None:
        route = "closed" if config.space_dim == 1 else "spectral"
    if route == "closed":
        if config.space_dim != 1:
            raise ValueError("closed route applies to d=1 only")
        coarse = _d1_cross_moment_mesh(config, p1, p2, n_time)
        fine = _d1_cross_moment_mesh(config, p1, p2, 2 * n_time)
    elif route == "spectral":
        if config.space_dim > 2:
            raise ValueError("spectral route supports d in {1, 2}")
        coarse = _spectral_cross_moment(config, p1, p2, n_time, xi_max, n_w)
        fine = _spectral_cross_moment(config, p1, p2, 2 * n_time, xi_max, n_w)
    else:
        raise ValueError(f"unknown route {route!r}")
    scale = max(abs(fine), 1e-300)
    if abs(fine - coarse) > rtol * scale:
        raise AccuracyError(
            f"oracle not converged at n_time {n_time}->{2*n_time}: {coarse:.6g} vs {fine:.6g}",
            estimate=fine,
        )
    return fine


def solution_variance_oracle(config: WaveConfig, t: float, x, n_time: int = 128, **kw) -> float:
    """E u(t,x)^2 by the deterministic quadrature route for this dimension."""
    x = (float(x),) if np.isscalar(x) else tuple(float(v) for v in x)
    p = (float(t), *x)
    return solution_cross_moment(config, p, p, n_time=n_time, **kw)


@dataclass(frozen=True)
class CovarianceMatrixReport:
    matrix: np.ndarray
    determinant: float
    tolerance: float
    positive: bool


def solution_covariance_matrix(
    config: WaveConfig, p1: Sequence[float], p2: Sequence[float], n_time: int = 128, **kw
) -> CovarianceMatrixReport:
    """2x2 covariance of (u(p1), u(p2)) with the strict-positivity verdict."""
    v1 = solution_cross_moment(config, p1, p1, n_time=n_time, **kw)
    v2 = solution_cross_moment(config, p2, p2, n_time=n_time, **kw)
    c = solution_cross_moment(config, p1, p2, n_time=n_time, **kw)
    det = v1 * v2 - c * c
    tol = 1e-10 * abs(v1 * v2)
    return CovarianceMatrixReport(
        matrix=np.array([[v1, c], [c, v2]]),
        determinant=det,
        tolerance=tol,
        positive=det > tol,
    )


# ---------------------------------------------------------------------------
# Increment-scaling verifier
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IncrementScalingReport:
    axis: str
    separations: tuple[float, ...]
    moments: tuple[float, ...]
    moment_ses: tuple[float, ...]
    slope: float
    slope_se: float
    theory: float
    ratio_lo: float
    ratio_hi: float

    def rows(self) -> list[tuple]:
        z = (self.slope - self.theory) / self.slope_se if self.slope_se > 0 else 0.0
        out = [(f"scaling_slope_{self.axis}", self.slope, self.slope_se, self.theory, z)]
        for sep, m, se in zip(self.separations, self.moments, self.moment_ses):
            out.append((f"moment_{self.axis}_{sep:g}", m, se, None, None))
        return out


def verify_increment_scaling(
    config: WaveConfig,
    axis: str,
    separations: Sequence[float],
    replicates: int,
    seed: int,
    base_time: float | None = None,
) -> IncrementScalingReport:
    """Log-log slope of MC E|u(p) - u(p')|^2 against separation on one axis.

    Requires the regularity window; probes pairs anchored at (T, 0) by
    default, moving backward in time or sideways in space.
    """
    rep = require_existence(config)
    # closed left endpoint: the boundary case beta = 2H - 1 still scales
    # cleanly and covers the reference configurations
    if not (rep.window_lo <= rep.beta < rep.window_hi):
        raise ExistenceError(
            f"increment scaling needs beta in [{rep.window_lo:.6g}, {rep.window_hi:.6g}), "
            f"got beta = {rep.beta:.6g}"
        )
    seps = [float(s) for s in separations]
    t0 = config.horizon if base_time is None else float(base_time)
    zeros = (0.0,) * config.space_dim
    base = (t0, *zeros)
    pts = [base]
    for s in seps:
        if axis == "time":
            pts.append((t0 - s, *zeros))
        elif axis == "space":
            shifted = (s,) + (0.0,) * (config.space_dim - 1)
            pts.append((t0, *shifted))
        else:
            raise ValueError("axis must be 'time' or 'space'")
    points = np.asarray(pts)
    weights = wave_query_weights(config, points)
    diffs = np.zeros((replicates, len(seps)))
    for r in range(replicates):
        vals = solve_wave_values(config, RngStream(seed, r), points, weights=weights)
        diffs[r] = (vals[1:] - vals[0]) ** 2
    moments = diffs.mean(axis=0)
    ses = diffs.std(axis=0, ddof=1) / math.sqrt(replicates)
    reg = scaling_regression(seps, moments)
    theta = rep.scaling_exponent
    ratios = moments / np.asarray(seps) ** theta
    return IncrementScalingReport(
        axis=axis,
        separations=tuple(seps),
        moments=tuple(float(m) for m in moments),
        moment_ses=tuple(float(s) for s in ses),
        slope=reg.slope,
        slope_se=reg.slope_se,
        theory=theta,
        ratio_lo=float(ratios.min()),
        ratio_hi=float(ratios.max()),
    )
