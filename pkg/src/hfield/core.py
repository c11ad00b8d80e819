"""Multi-index arithmetic, rectangular grids, generalized increments, and field I/O.

Fields live on the nodes of a rectangular grid; increments are taken over
grid-aligned rectangles as alternating sums of the 2^d corner values. There
is no interpolation anywhere: asking for an off-node coordinate is an error.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

_NODE_TOL = 1e-9


class OffGridError(ValueError):
    """A coordinate does not coincide with a grid node."""


class FieldFormatError(ValueError):
    """Bad magic, version, or header structure in a field file."""


class TruncatedFieldError(FieldFormatError):
    """Field file ends before the declared payload is complete."""


class NanPayloadError(ValueError):
    """NaN encountered in field values (forbidden in every payload)."""


def _as_floats(entries: Iterable[float]) -> tuple[float, ...]:
    out = tuple(float(x) for x in entries)
    if len(out) < 1:
        raise ValueError("multi-index needs at least one entry")
    return out


@dataclass(frozen=True)
class MultiIndex:
    """Point in R^d with the componentwise conventions used throughout.

    ``a*b``, ``a/b`` act componentwise; ``a.powprod(b)`` is the scalar
    product-power prod_i a_i^{b_i}; comparisons are strict componentwise.
    """

    entries: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", _as_floats(self.entries))

    @classmethod
    def of(cls, *entries: float) -> "MultiIndex":
        return cls(entries)

    @property
    def d(self) -> int:
        return len(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i: int) -> float:
        return self.entries[i]

    def _coerce(self, other) -> tuple[float, ...]:
        if isinstance(other, MultiIndex):
            other = other.entries
        if np.isscalar(other):
            return (float(other),) * self.d
        other = tuple(float(x) for x in other)
        if len(other) != self.d:
            raise ValueError(f"dimension mismatch: {self.d} vs {len(other)}")
        return other

    def __add__(self, other) -> "MultiIndex":
        o = self._coerce(other)
        return MultiIndex(tuple(a + b for a, b in zip(self.entries, o)))

    def __sub__(self, other) -> "MultiIndex":
        o = self._coerce(other)
        return MultiIndex(tuple(a - b for a, b in zip(self.entries, o)))

    def __mul__(self, other) -> "MultiIndex":
        o = self._coerce(other)
        return MultiIndex(tuple(a * b for a, b in zip(self.entries, o)))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "MultiIndex":
        o = self._coerce(other)
        return MultiIndex(tuple(a / b for a, b in zip(self.entries, o)))

    def powprod(self, exponents) -> float:
        """prod_i a_i^{b_i} (scalar)."""
        o = self._coerce(exponents)
        return float(np.prod([a**b for a, b in zip(self.entries, o)]))

    def prod(self) -> float:
        return float(np.prod(self.entries))

    def __lt__(self, other) -> bool:
        o = self._coerce(other)
        return all(a < b for a, b in zip(self.entries, o))

    def __le__(self, other) -> bool:
        o = self._coerce(other)
        return all(a <= b for a, b in zip(self.entries, o))

    def array(self) -> np.ndarray:
        return np.asarray(self.entries, dtype=float)


@dataclass(frozen=True)
class HurstIndex:
    """Hurst multi-index H in (1/2, 1)^d together with the order q >= 1."""

    H: tuple[float, ...]
    q: int

    def __post_init__(self):
        object.__setattr__(self, "H", _as_floats(self.H))
        if not all(0.5 < h < 1.0 for h in self.H):
            raise ValueError(f"every Hurst entry must lie strictly in (1/2, 1), got {self.H}")
        if int(self.q) != self.q or self.q < 1:
            raise ValueError(f"order q must be an integer >= 1, got {self.q}")
        object.__setattr__(self, "q", int(self.q))

    @property
    def d(self) -> int:
        return len(self.H)

    def array(self) -> np.ndarray:
        return np.asarray(self.H, dtype=float)

    def sum(self) -> float:
        return float(np.sum(self.H))


@dataclass(frozen=True)
class GridSpec:
    """Rectangular node grid: ``cells[i]`` cells of equal width per axis.

    Nodes per axis number ``cells[i] + 1``.  A zero-cell axis is the
    degenerate single-node case and then requires zero extent.
    """

    origin: tuple[float, ...]
    extent: tuple[float, ...]
    cells: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "origin", _as_floats(self.origin))
        object.__setattr__(self, "extent", _as_floats(self.extent))
        cells = tuple(int(c) for c in self.cells)
        object.__setattr__(self, "cells", cells)
        if not (len(self.origin) == len(self.extent) == len(cells)):
            raise ValueError("origin, extent and cells must share one dimension")
        for i, (e, c) in enumerate(zip(self.extent, cells)):
            if c < 0:
                raise ValueError(f"axis {i}: cell count must be >= 0")
            if c > 0 and e <= 0:
                raise ValueError(f"axis {i}: extent must be positive when cells > 0")
            if c == 0 and e != 0:
                raise ValueError(f"axis {i}: zero-cell axis requires zero extent")

    @property
    def d(self) -> int:
        return len(self.cells)

    @property
    def widths(self) -> np.ndarray:
        return np.array(
            [e / c if c > 0 else 0.0 for e, c in zip(self.extent, self.cells)]
        )

    @property
    def node_counts(self) -> tuple[int, ...]:
        return tuple(c + 1 for c in self.cells)

    @property
    def node_total(self) -> int:
        return int(np.prod(self.node_counts))

    def cell_volume(self) -> float:
        return float(np.prod(self.widths))

    def axis_nodes(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.widths[axis] * np.arange(self.cells[axis] + 1)

    def node_index(self, point: Sequence[float]) -> tuple[int, ...]:
        """Map a coordinate to its node multi-index; refuse off-node points."""
        point = tuple(float(x) for x in point)
        if len(point) != self.d:
            raise ValueError(f"point dimension {len(point)} != grid dimension {self.d}")
        idx = []
        for i, x in enumerate(point):
            if self.cells[i] == 0:
                if abs(x - self.origin[i]) > _NODE_TOL:
                    raise OffGridError(f"axis {i}: {x} is not the single node {self.origin[i]}")
                idx.append(0)
                continue
            w = self.widths[i]
            k = round((x - self.origin[i]) / w)
            if not (0 <= k <= self.cells[i]) or abs(x - (self.origin[i] + k * w)) > _NODE_TOL * max(1.0, abs(x)):
                raise OffGridError(f"axis {i}: coordinate {x} is not a grid node (no interpolation)")
            idx.append(int(k))
        return tuple(idx)

    def contains_box(self, lo: Sequence[float], hi: Sequence[float]) -> bool:
        return all(
            o - _NODE_TOL <= a and b <= o + e + _NODE_TOL
            for o, e, a, b in zip(self.origin, self.extent, lo, hi)
        )


class GeneratorTag(IntEnum):
    KERNEL = 0
    HERMITE_VARIATION = 1
    GAUSSIAN_EXACT = 2


@dataclass(frozen=True)
class FieldRealization:
    """A sampled scalar field on grid nodes, row-major, last axis fastest.

    Immutable after construction; the value array is marked read-only.
    NaN values are rejected up front so generators fail loudly.
    """

    grid: GridSpec
    values: np.ndarray
    hurst: HurstIndex
    seed: int
    generator_tag: GeneratorTag
    time_axis: int | None = None

    def __post_init__(self):
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if vals.shape != self.grid.node_counts:
            raise ValueError(
                f"values shape {vals.shape} does not match node grid {self.grid.node_counts}"
            )
        if np.isnan(vals).any():
            raise NanPayloadError("field values contain NaN")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "generator_tag", GeneratorTag(self.generator_tag))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def d(self) -> int:
        return self.grid.d

    def value_at(self, point: Sequence[float]) -> float:
        return float(self.values[self.grid.node_index(point)])


def _increment_signs(d: int) -> np.ndarray:
    """(-1)^(d - sum r) over r in {0,1}^d, in lexicographic r order."""
    r = np.arange(2**d)
    bits = np.array([bin(k).count("1") for k in r])
    return (-1.0) ** (d - bits)


def generalized_increment(corners: Sequence[float]) -> float:
    """Alternating 2^d-corner sum of field values over a rectangle.

    Corners are ordered lexicographically in r in {0,1}^d with r = 0 the
    low corner, i.e. corner(r) = lo + r*(hi - lo).  For d=1 this is
    X_hi - X_lo; for d=2 it is X_11 - X_10 - X_01 + X_00.
    """
    vals = np.asarray(list(corners), dtype=float)
    n = vals.size
    d = n.bit_length() - 1
    if n < 2 or 2**d != n:
        raise ValueError(f"corner count {n} is not a power of two >= 2")
    return float(np.dot(_increment_signs(d), vals))


def corner_points(lo: Sequence[float], hi: Sequence[float]) -> list[tuple[float, ...]]:
    """The 2^d rectangle corners in the order generalized_increment expects."""
    lo = tuple(float(x) for x in lo)
    hi = tuple(float(x) for x in hi)
    d = len(lo)
    pts = []
    for k in range(2**d):
        r = [(k >> (d - 1 - i)) & 1 for i in range(d)]
        pts.append(tuple(lo[i] + r[i] * (hi[i] - lo[i]) for i in range(d)))
    return pts


def increment_over_rectangle(field: FieldRealization, lo: Sequence[float], hi: Sequence[float]) -> float:
    """Generalized increment of a field over a node-aligned rectangle [lo, hi]."""
    lo = tuple(float(x) for x in lo)
    hi = tuple(float(x) for x in hi)
    if len(lo) != field.d or len(hi) != field.d:
        raise ValueError("rectangle dimension does not match field dimension")
    if not all(a <= b for a, b in zip(lo, hi)):
        raise ValueError(f"rectangle must satisfy lo <= hi, got {lo} > {hi}")
    ilo = field.grid.node_index(lo)
    ihi = field.grid.node_index(hi)
    d = field.d
    corners = []
    for k in range(2**d):
        idx = tuple(
            ihi[i] if (k >> (d - 1 - i)) & 1 else ilo[i] for i in range(d)
        )
        corners.append(field.values[idx])
    return generalized_increment(corners)


def cell_increments(values: np.ndarray) -> np.ndarray:
    """Generalized increments of every grid cell, by successive axis differencing."""
    out = np.asarray(values, dtype=float)
    for axis in range(out.ndim):
        out = np.diff(out, axis=axis)
    return out


_MAGIC = b"HFLD"
_VERSION = 1
_NO_TIME_AXIS = 0xFF


def write_field(field: FieldRealization, path) -> None:
    """Binary field file: pinned header, then node values f64 LE row-major.

    Header: magic "HFLD", u16 version, u8 d, u8 q, d f64 Hurst, d u32
    cells, d f64 origin, d f64 extent, then u64 seed, u8 generator tag,
    u8 time-axis flag (0xFF when absent).
    """
    if np.isnan(field.values).any():
        raise NanPayloadError("refusing to write NaN values")
    d = field.d
    buf = bytearray()
    buf += _MAGIC
    buf += struct.pack("<H", _VERSION)
    buf += struct.pack("<BB", d, field.hurst.q)
    buf += struct.pack(f"<{d}d", *field.hurst.H)
    buf += struct.pack(f"<{d}I", *field.grid.cells)
    buf += struct.pack(f"<{d}d", *field.grid.origin)
    buf += struct.pack(f"<{d}d", *field.grid.extent)
    buf += struct.pack("<Q", field.seed % 2**64)
    tflag = _NO_TIME_AXIS if field.time_axis is None else int(field.time_axis)
    buf += struct.pack("<BB", int(field.generator_tag), tflag)
    buf += np.ascontiguousarray(field.values, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(buf))


def _take(fh, n: int, what: str) -> bytes:
    b = fh.read(n)
    if len(b) != n:
        raise TruncatedFieldError(f"file truncated while reading {what}")
    return b


def read_field(path) -> FieldRealization:
    """Read a field written by write_field; bit-exact payload round trip."""
    with open(path, "rb") as fh:
        magic = _take(fh, 4, "magic")
        if magic != _MAGIC:
            raise FieldFormatError(f"bad magic {magic!r}, expected {_MAGIC!r}")
        (version,) = struct.unpack("<H", _take(fh, 2, "version"))
        if version != _VERSION:
            raise FieldFormatError(f"unsupported version {version}")
        d, q = struct.unpack("<BB", _take(fh, 2, "dims"))
        if d < 1:
            raise FieldFormatError("dimension must be >= 1")
        hurst_vals = struct.unpack(f"<{d}d", _take(fh, 8 * d, "hurst"))
        cells = struct.unpack(f"<{d}I", _take(fh, 4 * d, "cells"))
        origin = struct.unpack(f"<{d}d", _take(fh, 8 * d, "origin"))
        extent = struct.unpack(f"<{d}d", _take(fh, 8 * d, "extent"))
        (seed,) = struct.unpack("<Q", _take(fh, 8, "seed"))
        tag, tflag = struct.unpack("<BB", _take(fh, 2, "tags"))
        grid = GridSpec(origin, extent, cells)
        n = grid.node_total
        raw = _take(fh, 8 * n, "values")
        vals = np.frombuffer(raw, dtype="<f8").reshape(grid.node_counts)
        if np.isnan(vals).any():
            raise NanPayloadError("field file contains NaN values")
        return FieldRealization(
            grid=grid,
            values=vals,
            hurst=HurstIndex(hurst_vals, q),
            seed=seed,
            generator_tag=GeneratorTag(tag),
            time_axis=None if tflag == _NO_TIME_AXIS else tflag,
        )


def write_field_csv(field: FieldRealization, path) -> None:
    """One node per line: coordinates then value."""
    axes = [field.grid.axis_nodes(i) for i in range(field.d)]
    with open(path, "w") as fh:
        for idx in np.ndindex(*field.grid.node_counts):
            coords = [axes[i][idx[i]] for i in range(field.d)]
            row = [repr(float(c)) for c in coords] + [repr(float(field.values[idx]))]
            fh.write(",".join(row) + "\n")
