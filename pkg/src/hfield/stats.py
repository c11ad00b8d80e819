"""Path statistics: occupation measures, local-time estimators, and the
log-log scaling regression shared by the verifiers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from hfield.core import GridSpec


@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    slope_se: float


def scaling_regression(
    separations: Sequence[float],
    moments: Sequence[float],
    weights: Sequence[float] | None = None,
) -> RegressionResult:
    """OLS of log(moment) on log(separation); slope SE from residuals."""
    seps = np.asarray(separations, dtype=float)
    y = np.asarray(moments, dtype=float)
    if seps.size < 3:
        raise ValueError("need at least 3 separations")
    if np.any(seps <= 0) or np.any(y <= 0):
        raise ValueError("separations and moments must be positive")
    x = np.log(seps)
    y = np.log(y)
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float)
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    wsum = w.sum()
    xbar = float((w * x).sum() / wsum)
    ybar = float((w * y).sum() / wsum)
    sxx = float((w * (x - xbar) ** 2).sum())
    if sxx == 0:
        raise ValueError("separations must not all coincide")
    slope = float((w * (x - xbar) * (y - ybar)).sum() / sxx)
    intercept = ybar - slope * xbar
    resid = y - (intercept + slope * x)
    dof = max(x.size - 2, 1)
    sigma2 = float((w * resid**2).sum() / dof)
    return RegressionResult(slope=slope, intercept=intercept, slope_se=math.sqrt(sigma2 / sxx))


def _cell_values(values: np.ndarray) -> np.ndarray:
    """Low-corner node value per cell (left-point rule)."""
    return values[tuple(slice(0, -1) for _ in range(values.ndim))]


def occupation_measure(values: np.ndarray, grid: GridSpec, a: float, b: float) -> float:
    """Parameter volume the sampled path spends with values in [a, b).

    Cell value is the low-corner node value, which makes the occupation
    time formula an exact identity for bin indicators.
    """
    if values.shape != grid.node_counts:
        raise ValueError("values shape does not match the grid")
    if grid.cell_volume() == 0:
        return 0.0
    cv = _cell_values(values)
    return float(grid.cell_volume() * np.count_nonzero((cv >= a) & (cv < b)))


@dataclass(frozen=True)
class LocalTimeEstimate:
    """Histogram occupation density over a parameter box.

    density[k] = mu(bin_k) / bin_width, so sum(density)*width recovers the
    box volume exactly whenever the path stays inside the binned range.
    """

    box_volume: float
    bin_edges: np.ndarray
    density: np.ndarray

    @property
    def bin_width(self) -> float:
        return float(self.bin_edges[1] - self.bin_edges[0])

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    def total_mass(self) -> float:
        return float(np.sum(self.density) * self.bin_width)

    def l2_norm_sq(self) -> float:
        """integral of density^2 over the value axis."""
        return float(np.sum(self.density**2) * self.bin_width)

    def to_csv_rows(self) -> list[tuple[float, float]]:
        return [(float(c), float(d)) for c, d in zip(self.bin_centers, self.density)]


def local_time_histogram(
    values: np.ndarray, grid: GridSpec, bin_edges: Sequence[float]
) -> LocalTimeEstimate:
    """Occupation density per value bin; refuses values outside the bin range."""
    if values.shape != grid.node_counts:
        raise ValueError("values shape does not match the grid")
    edges = np.asarray(bin_edges, dtype=float)
    if edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("bin edges must be increasing with at least one bin")
    widths = np.diff(edges)
    if not np.allclose(widths, widths[0], rtol=1e-9, atol=0):
        raise ValueError("bins must have uniform width")
    cv = _cell_values(values)
    if cv.size and (cv.min() < edges[0] or cv.max() >= edges[-1]):
        raise ValueError(
            f"path values [{cv.min():.6g}, {cv.max():.6g}] fall outside the bin "
            f"range [{edges[0]:.6g}, {edges[-1]:.6g}); enlarge the bins explicitly"
        )
    counts, _ = np.histogram(cv.ravel(), bins=edges)
    vol = grid.cell_volume()
    density = counts * vol / widths[0]
    return LocalTimeEstimate(
        box_volume=vol * cv.size, bin_edges=edges, density=density
    )


def _trapezoid_weights(grid: GridSpec) -> np.ndarray:
    w = np.ones(1)
    for i in range(grid.d):
        axis = np.full(grid.cells[i] + 1, grid.widths[i])
        axis[0] *= 0.5
        axis[-1] *= 0.5
        w = np.multiply.outer(w, axis)
    return w.reshape(grid.node_counts)


def local_time_fourier(
    values: np.ndarray,
    grid: GridSpec,
    x_values: Sequence[float],
    z_max: float,
    n_z: int = 257,
) -> np.ndarray:
    """Fourier occupation-density estimate at the given value points.

    (2 pi)^{-1} int_{-Z}^{Z} dz e^{-izx} int_I e^{i u z}, both integrals by
    the trapezoid rule on the sampled path.
    """
    if values.shape != grid.node_counts:
        raise ValueError("values shape does not match the grid")
    w = _trapezoid_weights(grid).ravel()
    u = np.asarray(values, dtype=float).ravel()
    z = np.linspace(-z_max, z_max, int(n_z))
    char = np.exp(1j * np.outer(z, u)) @ w
    zw = np.full(z.size, z[1] - z[0])
    zw[0] *= 0.5
    zw[-1] *= 0.5
    x = np.asarray(x_values, dtype=float)
    osc = np.exp(-1j * np.outer(x, z))
    return np.real(osc @ (zw * char)) / (2 * np.pi)
