"""Regular grids and scalar value fields sampled on them."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import GridMismatch, OutOfBounds

TRUE_VALUE = 1e9
"""Finite stand-in for +infinity (robustness of ``true``, field of the empty set)."""

_MAGIC = b"SFFV"
_VERSION = 1


@dataclass(frozen=True)
class Axis:
    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"axis needs at least 3 points, got {self.n}")
        if not self.lo < self.hi:
            raise ValueError(f"axis bounds must satisfy lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / (self.n - 1)

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n)


@dataclass(frozen=True)
class Grid:
    axes: tuple[Axis, ...]

    @classmethod
    def from_bounds(cls, bounds: Sequence[Sequence[float]], n_points: Sequence[int]) -> "Grid":
        if len(bounds) != len(n_points):
            raise ValueError("bounds and n_points lengths differ")
        return cls(tuple(Axis(float(lo), float(hi), int(n)) for (lo, hi), n in zip(bounds, n_points)))

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.n for a in self.axes)

    @property
    def spacing(self) -> np.ndarray:
        return np.array([a.spacing for a in self.axes])

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_diagonal(self) -> float:
        return float(np.linalg.norm(self.spacing))

    @property
    def lo(self) -> np.ndarray:
        return np.array([a.lo for a in self.axes])

    @property
    def hi(self) -> np.ndarray:
        return np.array([a.hi for a in self.axes])

    def states(self) -> np.ndarray:
        """Node coordinates, shape ``shape + (ndim,)``."""
        mesh = np.meshgrid(*[a.points for a in self.axes], indexing="ij")
        return np.stack(mesh, axis=-1)

    def contains(self, x: Sequence[float], tol: float = 1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))


@dataclass
class ValueField:
    """Scalar field on a grid; the encoded set is ``{x : value(x) < 0}``.

    ``snapshots`` optionally holds ``(t, values)`` pairs retained by the
    solver, earliest last (the solve runs backward in time).
    """

    grid: Grid
    values: np.ndarray
    snapshots: list[tuple[float, np.ndarray]] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise GridMismatch(f"values shape {self.values.shape} != grid shape {self.grid.shape}")

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "ValueField":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def empty_set(cls, grid: Grid) -> "ValueField":
        return cls.constant(grid, TRUE_VALUE)

    @classmethod
    def whole_space(cls, grid: Grid) -> "ValueField":
        return cls.constant(grid, -TRUE_VALUE)

    def min(self) -> float:
        return float(self.values.min())

    def dump(self, path: str | Path) -> None:
        write_field(self, path)


def _check_same(h1: ValueField, h2: ValueField) -> None:
    if h1.grid != h2.grid:
        raise GridMismatch("value fields live on different grids")


def value_and(h1: ValueField, h2: ValueField) -> ValueField:
    """Field of the intersection: pointwise maximum."""
    _check_same(h1, h2)
    return ValueField(h1.grid, np.maximum(h1.values, h2.values))


def value_or(h1: ValueField, h2: ValueField) -> ValueField:
    """Field of the union: pointwise minimum."""
    _check_same(h1, h2)
    return ValueField(h1.grid, np.minimum(h1.values, h2.values))


def value_not(h: ValueField) -> ValueField:
    """Field of the complement: negation."""
    return ValueField(h.grid, -h.values)


def value_at(h: ValueField, x: Sequence[float]) -> float:
    """Multilinear interpolation of ``h`` at state ``x``."""
    grid = h.grid
    x = np.asarray(x, dtype=float)
    if x.shape != (grid.ndim,):
        raise OutOfBounds(f"state of dimension {x.shape} for a {grid.ndim}-D grid")
    if not grid.contains(x):
        raise OutOfBounds(f"state {x.tolist()} outside grid [{grid.lo.tolist()}, {grid.hi.tolist()}]")
    idx0 = []
    frac = []
    for xi, ax in zip(x, grid.axes):
        s = (xi - ax.lo) / ax.spacing
        i = int(np.clip(np.floor(s), 0, ax.n - 2))
        idx0.append(i)
        frac.append(float(np.clip(s - i, 0.0, 1.0)))
    total = 0.0
    for corner in range(1 << grid.ndim):
        w = 1.0
        idx = []
        for d in range(grid.ndim):
            bit = (corner >> d) & 1
            w *= frac[d] if bit else 1.0 - frac[d]
            idx.append(idx0[d] + bit)
        if w:
            total += w * h.values[tuple(idx)]
    return float(total)


def write_field(h: ValueField, path: str | Path) -> None:
    """Write the little-endian ``SFFV`` dump: header then row-major f64 values."""
    grid = h.grid
    parts = [_MAGIC, struct.pack("<II", _VERSION, grid.ndim)]
    for ax in grid.axes:
        parts.append(struct.pack("<ddQ", ax.lo, ax.hi, ax.n))
    parts.append(np.ascontiguousarray(h.values, dtype="<f8").tobytes(order="C"))
    Path(path).write_bytes(b"".join(parts))


def read_field(path: str | Path) -> ValueField:
    data = Path(path).read_bytes()
    if data[:4] != _MAGIC:
        raise ValueError(f"{path}: not a value-field dump")
    version, ndim = struct.unpack_from("<II", data, 4)
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported dump version {version}")
    off = 12
    axes = []
    for _ in range(ndim):
        lo, hi, n = struct.unpack_from("<ddQ", data, off)
        off += 24
        axes.append(Axis(lo, hi, int(n)))
    grid = Grid(tuple(axes))
    values = np.frombuffer(data, dtype="<f8", offset=off, count=grid.size).reshape(grid.shape)
    return ValueField(grid, values.astype(float))
