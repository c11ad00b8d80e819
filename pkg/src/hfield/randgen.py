"""Seeded Gaussian building blocks.

All randomness flows through counter-based Philox streams keyed by
(seed, stream_id); Gaussians are produced by the inverse normal CDF applied
to 53-bit uniforms, so identical keys give bit-identical output on every
platform regardless of how many variates earlier code consumed.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import ndtri

from hfield.core import FieldRealization, GeneratorTag, GridSpec, HurstIndex


class FactorizationError(ValueError):
    """Per-axis covariance factorization failed (matrix not PD at tolerance)."""

    def __init__(self, axis: int, detail: str):
        super().__init__(f"axis {axis}: covariance factorization failed ({detail})")
        self.axis = axis


@dataclass(frozen=True)
class RngStream:
    """Deterministic Gaussian stream, cheap to construct.

    Distinct ``stream_id`` values give independent streams for the same
    seed; replicate loops use stream_id = replicate index so results do
    not depend on scheduling.
    """

    seed: int
    stream_id: int = 0

    def _bits(self, n: int) -> np.ndarray:
        key = np.array([self.seed % 2**64, self.stream_id % 2**64], dtype=np.uint64)
        return np.random.Philox(key=key).random_raw(n)

    def uniforms(self, n: int) -> np.ndarray:
        """Uniforms in the open interval (0, 1)."""
        raw = self._bits(int(n))
        return (raw >> np.uint64(11)) * 2.0**-53 + 2.0**-54

    def gaussians(self, shape) -> np.ndarray:
        """Standard normals via the inverse-CDF transform of uniforms."""
        shape = (int(shape),) if np.isscalar(shape) else tuple(int(s) for s in shape)
        n = int(np.prod(shape)) if shape else 1
        return ndtri(self.uniforms(n)).reshape(shape)

    def substream(self, k: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id * 1_000_003 + k + 1)


def sample_white_noise(grid: GridSpec, rng: RngStream) -> np.ndarray:
    """Independent N(0, cell volume) increments, one per grid cell.

    Cumulative sums of these (with a zero low boundary) realize the
    Brownian sheet on the grid nodes: covariance prod_i s_i ^ t_i when
    the origin is 0.
    """
    widths = grid.widths
    if np.any(widths <= 0):
        raise ValueError("white noise requires strictly positive cell volumes")
    vol = float(np.prod(widths))
    return rng.gaussians(grid.cells) * np.sqrt(vol)


def brownian_sheet_values(grid: GridSpec, rng: RngStream) -> np.ndarray:
    """Brownian-sheet node values: cumulative sums of white noise, zero boundary."""
    inc = sample_white_noise(grid, rng)
    for axis in range(grid.d):
        inc = np.cumsum(inc, axis=axis)
    out = np.zeros(grid.node_counts)
    out[tuple(slice(1, None) for _ in range(grid.d))] = inc
    return out


def fgn_covariance(h: float, k) -> np.ndarray | float:
    """Fractional-Gaussian-noise autocovariance at integer lag k, Hurst h in (0,1)."""
    if not 0.0 < h < 1.0:
        raise ValueError(f"fGn Hurst parameter must lie in (0,1), got {h}")
    ka = np.abs(np.asarray(k, dtype=float))
    out = 0.5 * ((ka + 1) ** (2 * h) - 2 * ka ** (2 * h) + np.abs(ka - 1) ** (2 * h))
    return float(out) if np.isscalar(k) else out


@lru_cache(maxsize=64)
def _fgn_cholesky(n: int, h: float, axis: int) -> np.ndarray:
    cov = fgn_covariance(h, np.abs(np.subtract.outer(np.arange(n), np.arange(n))))
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(axis, f"n={n}, h={h}: {exc}") from exc
    chol.flags.writeable = False
    return chol


@dataclass(frozen=True)
class FgnSheet:
    """Stationary Gaussian lattice with separable covariance prod_i r_{h_i}(k_i)."""

    cells: tuple[int, ...]
    hurst: tuple[float, ...]
    values: np.ndarray


def sample_fgn_sheet(cells: Sequence[int], hurst: Sequence[float], rng: RngStream) -> FgnSheet:
    """Exact fGn sheet via per-axis Toeplitz Cholesky factors (Kronecker apply).

    Marginal variance is 1 everywhere by construction; the covariance at
    lag k is the product over axes of fgn_covariance(h_i, k_i).
    """
    cells = tuple(int(c) for c in cells)
    hurst = tuple(float(h) for h in hurst)
    if len(cells) != len(hurst):
        raise ValueError("cells and hurst must have equal length")
    x = rng.gaussians(cells)
    for axis, (n, h) in enumerate(zip(cells, hurst)):
        chol = _fgn_cholesky(n, h, axis)
        x = np.moveaxis(np.tensordot(chol, x, axes=(1, axis)), 0, axis)
    return FgnSheet(cells=cells, hurst=hurst, values=x)


_MAX_HERMITE_ORDER = 8


def hermite_poly(q: int, x) -> np.ndarray | float:
    """Probabilists' Hermite polynomial H_q (leading coefficient 1), q <= 8."""
    if int(q) != q or q < 0 or q > _MAX_HERMITE_ORDER:
        raise ValueError(f"Hermite order must be an integer in [0, {_MAX_HERMITE_ORDER}], got {q}")
    xa = np.asarray(x, dtype=float)
    prev = np.ones_like(xa)
    if q == 0:
        return float(prev) if np.isscalar(x) else prev
    cur = xa.copy()
    for k in range(1, q):
        prev, cur = cur, xa * cur - k * prev
    return float(cur) if np.isscalar(x) else cur


def white_noise_field(grid: GridSpec, hurst: HurstIndex, rng: RngStream) -> FieldRealization:
    """Brownian-sheet realization wrapped as a field (gaussian_exact tag)."""
    return FieldRealization(
        grid=grid,
        values=brownian_sheet_values(grid, rng),
        hurst=hurst,
        seed=rng.seed,
        generator_tag=GeneratorTag.GAUSSIAN_EXACT,
    )
