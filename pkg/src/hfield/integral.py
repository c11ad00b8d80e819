"""The integrand Hilbert space and Wiener integrals against a sampled field.

The inner product carries the singular weight prod_i |u_i - v_i|^{2H_i - 2}.
For rectangle pairs the double integral has a closed form per axis (the
increment covariance of fractional Brownian motion), so step-function inner
products are exact; general integrands are reduced to fine step functions
and inherit the closed form cell pair by cell pair, which keeps quadrature
away from the diagonal singularity entirely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from hfield.core import FieldRealization, GridSpec, HurstIndex, increment_over_rectangle
from hfield.hermite import axis_increment_cov


class AccuracyError(RuntimeError):
    """Quadrature failed to reach the requested accuracy; carries the estimate."""

    def __init__(self, message: str, estimate: float):
        super().__init__(message)
        self.estimate = estimate


@dataclass(frozen=True)
class StepFunction:
    """Finite combination sum_l a_l 1_{(lo_l, hi_l]} of rectangle indicators."""

    terms: tuple[tuple[float, tuple[float, ...], tuple[float, ...]], ...]

    def __post_init__(self):
        norm = []
        d = None
        for a, lo, hi in self.terms:
            lo = tuple(float(x) for x in lo)
            hi = tuple(float(x) for x in hi)
            if d is None:
                d = len(lo)
            if len(lo) != d or len(hi) != d:
                raise ValueError("all rectangles must share one dimension")
            if not all(l < h for l, h in zip(lo, hi)):
                raise ValueError(f"rectangle must satisfy lo < hi, got {lo}, {hi}")
            norm.append((float(a), lo, hi))
        if d is None:
            raise ValueError("step function needs at least one term")
        object.__setattr__(self, "terms", tuple(norm))

    @property
    def d(self) -> int:
        return len(self.terms[0][1])

    def __call__(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at points of shape (..., d) with the (lo, hi] convention."""
        pts = np.asarray(points, dtype=float)
        out = np.zeros(pts.shape[:-1])
        for a, lo, hi in self.terms:
            inside = np.ones(pts.shape[:-1], dtype=bool)
            for i in range(self.d):
                inside &= (pts[..., i] > lo[i]) & (pts[..., i] <= hi[i])
            out += a * inside
        return out

    def scaled(self, factor: float) -> "StepFunction":
        return StepFunction(tuple((factor * a, lo, hi) for a, lo, hi in self.terms))

    def to_csv_rows(self) -> list[tuple]:
        return [(a, *lo, *hi) for a, lo, hi in self.terms]

    @classmethod
    def from_csv_rows(cls, rows: Sequence[Sequence[float]]) -> "StepFunction":
        terms = []
        for row in rows:
            vals = [float(x) for x in row]
            d = (len(vals) - 1) // 2
            if len(vals) != 1 + 2 * d:
                raise ValueError(f"bad step-function row of length {len(vals)}")
            terms.append((vals[0], tuple(vals[1 : 1 + d]), tuple(vals[1 + d :])))
        return cls(tuple(terms))


@dataclass(frozen=True)
class IntegrandFunction:
    """Real function on R^d with a declared bounded support box."""

    fn: Callable[[np.ndarray], np.ndarray]
    support_lo: tuple[float, ...]
    support_hi: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(x) for x in self.support_lo)
        hi = tuple(float(x) for x in self.support_hi)
        if len(lo) != len(hi) or not all(np.isfinite(lo + hi)):
            raise ValueError("support box must be finite with matching dimensions")
        if not all(l < h for l, h in zip(lo, hi)):
            raise ValueError("support box must have positive extent")
        object.__setattr__(self, "support_lo", lo)
        object.__setattr__(self, "support_hi", hi)

    @property
    def d(self) -> int:
        return len(self.support_lo)


def _step_inner(f: StepFunction, g: StepFunction, hurst: HurstIndex) -> float:
    """Exact inner product of two step functions (closed form per axis)."""
    total = 0.0
    for af, lof, hif in f.terms:
        for ag, log_, hig in g.terms:
            prod = af * ag
            for h, a, b, c, e in zip(hurst.H, lof, hif, log_, hig):
                prod *= axis_increment_cov(h, a, b, c, e)
            total += prod
    return total


def _midpoint_steps(f, lo, hi, mesh: int, take_abs: bool = False) -> StepFunction:
    """Piecewise-constant reduction of f on a mesh^d partition of [lo, hi]."""
    d = len(lo)
    axes = [np.linspace(lo[i], hi[i], mesh + 1) for i in range(d)]
    mids = [0.5 * (ax[:-1] + ax[1:]) for ax in axes]
    pts = np.stack(np.meshgrid(*mids, indexing="ij"), axis=-1)
    vals = np.asarray(f(pts), dtype=float)
    if take_abs:
        vals = np.abs(vals)
    terms = []
    for idx in np.ndindex(*([mesh] * d)):
        a = float(vals[idx])
        if a == 0.0:
            continue
        cl = tuple(axes[i][idx[i]] for i in range(d))
        ch = tuple(axes[i][idx[i] + 1] for i in range(d))
        terms.append((a, cl, ch))
    if not terms:
        terms.append((0.0, tuple(lo), tuple(hi)))
    return StepFunction(tuple(terms))


def _function_inner(
    f: IntegrandFunction | StepFunction,
    g: IntegrandFunction | StepFunction,
    hurst: HurstIndex,
    mesh: int,
    rtol: float,
    take_abs: bool,
) -> float:
    def reduce(obj, m):
        if isinstance(obj, StepFunction):
            if not take_abs:
                return obj
            lo = tuple(min(t[1][i] for t in obj.terms) for i in range(obj.d))
            hi = tuple(max(t[2][i] for t in obj.terms) for i in range(obj.d))
            return _midpoint_steps(obj, lo, hi, m, take_abs=True)
        return _midpoint_steps(obj.fn, obj.support_lo, obj.support_hi, m, take_abs=take_abs)

    coarse = _step_inner(reduce(f, mesh), reduce(g, mesh), hurst)
    fine = _step_inner(reduce(f, 2 * mesh), reduce(g, 2 * mesh), hurst)
    scale = max(abs(fine), 1e-300)
    if abs(fine - coarse) > rtol * scale:
        raise AccuracyError(
            f"quadrature not converged at mesh {mesh}->{2*mesh}: "
            f"{coarse:.6g} vs {fine:.6g}",
            estimate=fine,
        )
    return fine


def inner_product_H(
    f: StepFunction | IntegrandFunction,
    g: StepFunction | IntegrandFunction,
    hurst: HurstIndex,
    mesh: int = 64,
    rtol: float = 0.05,
) -> float:
    """Inner product with weight prod_i H_i(2H_i-1)|u_i - v_i|^{2H_i - 2}.

    Step-function pairs are exact; anything else is reduced to midpoint
    step functions on ``mesh`` cells per axis and checked against the
    doubled mesh (AccuracyError if the two disagree beyond rtol).
    """
    if isinstance(f, StepFunction) and isinstance(g, StepFunction):
        return _step_inner(f, g, hurst)
    return _function_inner(f, g, hurst, mesh, rtol, take_abs=False)


def norm_H(f, hurst: HurstIndex, **kw) -> float:
    val = inner_product_H(f, f, hurst, **kw)
    return math.sqrt(max(val, 0.0))


@dataclass(frozen=True)
class MembershipReport:
    value: float
    refined_value: float
    converged: bool


def check_membership_absH(
    f: IntegrandFunction | StepFunction,
    hurst: HurstIndex,
    mesh: int = 64,
    rtol: float = 0.01,
) -> MembershipReport:
    """Double integral of |f||f| against the singular weight.

    A finite, mesh-stable value certifies membership in the absolute-value
    subspace (hence integrability of the inner product without sign
    cancellation); non-convergence is reported, not raised.
    """
    try:
        fine = _function_inner(f, f, hurst, mesh, rtol, take_abs=True)
        return MembershipReport(value=fine, refined_value=fine, converged=True)
    except AccuracyError as exc:
        return MembershipReport(value=exc.estimate, refined_value=exc.estimate, converged=False)


def wiener_integral(f: StepFunction, field: FieldRealization) -> float:
    """sum_l a_l * (increment of the field over rectangle l); linear in both."""
    total = 0.0
    for a, lo, hi in f.terms:
        total += a * increment_over_rectangle(field, lo, hi)
    return total


def project_to_steps(f: IntegrandFunction | StepFunction, grid: GridSpec) -> StepFunction:
    """Cell-midpoint step approximation of f on the grid cells.

    Grid-aligned step functions are fixed points; the approximation error
    in the H-norm decreases under mesh refinement.
    """
    if isinstance(f, IntegrandFunction):
        if not grid.contains_box(f.support_lo, f.support_hi):
            raise ValueError("integrand support exceeds the grid box")
        fn = f.fn
    else:
        fn = f
    axes = [grid.axis_nodes(i) for i in range(grid.d)]
    mids = [0.5 * (ax[:-1] + ax[1:]) for ax in axes]
    pts = np.stack(np.meshgrid(*mids, indexing="ij"), axis=-1)
    vals = np.asarray(fn(pts), dtype=float)
    terms = []
    for idx in np.ndindex(*grid.cells):
        a = float(vals[idx])
        if a == 0.0:
            continue
        lo = tuple(axes[i][idx[i]] for i in range(grid.d))
        hi = tuple(axes[i][idx[i] + 1] for i in range(grid.d))
        terms.append((a, lo, hi))
    if not terms:
        lo = tuple(grid.origin)
        hi = tuple(o + e for o, e in zip(grid.origin, grid.extent))
        terms.append((0.0, lo, hi))
    return StepFunction(tuple(terms))


def projection_error_H(
    f: IntegrandFunction, grid: GridSpec, hurst: HurstIndex, mesh: int = 128
) -> float:
    """H-norm of f minus its step projection (by fine-mesh reduction of both)."""
    proj = project_to_steps(f, grid)

    def diff(points):
        return np.asarray(f.fn(points), dtype=float) - proj(points)

    d = IntegrandFunction(diff, f.support_lo, f.support_hi)
    val = _function_inner(d, d, hurst, mesh, rtol=math.inf, take_abs=False)
    return math.sqrt(max(val, 0.0))


# ---------------------------------------------------------------------------
# Isometry checking against sampled fields
# ---------------------------------------------------------------------------


def variation_integral_variance(f: StepFunction, hurst: HurstIndex, resolution: int) -> float:
    """Exact variance of the integral against the lattice variation field.

    Expands each rectangle increment into its corner sum and applies the
    exact finite-lattice covariance, so the discretization bias of the
    sampler is known without Monte Carlo.
    """
    from hfield.core import corner_points, _increment_signs
    from hfield.hermite import variation_lattice_covariance

    d = f.d
    signs = _increment_signs(d)
    total = 0.0
    for af, lof, hif in f.terms:
        cf = corner_points(lof, hif)
        for ag, log_, hig in f.terms:
            cg = corner_points(log_, hig)
            for si, pi in zip(signs, cf):
                for sj, pj in zip(signs, cg):
                    total += af * ag * si * sj * variation_lattice_covariance(
                        hurst, resolution, pi, pj
                    )
    return total


@dataclass(frozen=True)
class IsometryReport:
    inner_product: float
    lattice_variance: float
    mc_variance: float
    mc_se: float

    @property
    def z(self) -> float:
        if self.mc_se == 0:
            return 0.0
        return (self.mc_variance - self.inner_product) / self.mc_se

    @property
    def z_lattice(self) -> float:
        if self.mc_se == 0:
            return 0.0
        return (self.mc_variance - self.lattice_variance) / self.mc_se

    @property
    def bias(self) -> float:
        return self.lattice_variance - self.inner_product


def mc_isometry_check(
    f: StepFunction,
    hurst: HurstIndex,
    resolution: int,
    replicates: int,
    seed: int,
    threads: int = 1,
) -> IsometryReport:
    """Monte Carlo variance of the Wiener integral vs the exact inner product."""
    from hfield.hermite import generate_hermite_variation
    from hfield.randgen import RngStream

    d = f.d
    lo = [min(t[1][i] for t in f.terms) for i in range(d)]
    hi = [max(t[2][i] for t in f.terms) for i in range(d)]
    if any(x < -1e-12 for x in lo):
        raise ValueError("MC isometry checks require rectangles in the positive orthant")
    extent = tuple(math.ceil(resolution * h - 1e-9) / resolution for h in hi)
    grid = GridSpec((0.0,) * d, extent, tuple(int(round(resolution * e)) for e in extent))

    def one(rep: int) -> float:
        field = generate_hermite_variation(grid, hurst, resolution, RngStream(seed, rep))
        return wiener_integral(f, field)

    if threads <= 1:
        vals = np.array([one(r) for r in range(replicates)])
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = np.array(list(pool.map(one, range(replicates))))
    sq = vals**2
    return IsometryReport(
        inner_product=inner_product_H(f, f, hurst),
        lattice_variance=variation_integral_variance(f, hurst, resolution),
        mc_variance=float(sq.mean()),
        mc_se=float(sq.std(ddof=1) / math.sqrt(replicates)),
    )


def random_step_functions(
    count: int, d: int, seed: int, lattice: int = 8, max_terms: int = 3
) -> list[StepFunction]:
    """Deterministic pseudo-random step functions on the unit box, lattice-aligned."""
    from hfield.randgen import RngStream

    rng = RngStream(seed, stream_id=987654321)
    u = iter(rng.uniforms(count * max_terms * (2 * d + 2) * 4))
    out = []
    for _ in range(count):
        n_terms = 1 + int(next(u) * max_terms)
        terms = []
        for _ in range(n_terms):
            lo, hi = [], []
            for _ in range(d):
                a = int(next(u) * (lattice - 1))
                b = a + 1 + int(next(u) * (lattice - a - 1))
                lo.append(a / lattice)
                hi.append(b / lattice)
            coeff = round(4 * next(u) - 2, 3) or 1.0
            terms.append((coeff, tuple(lo), tuple(hi)))
        out.append(StepFunction(tuple(terms)))
    return out
