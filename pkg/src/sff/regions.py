"""Named regions and atomic predicates.

Regions live in the position subspace of the state (the first one or two
state coordinates, depending on the dynamics). Every region is described as
an intersection of halfspaces ``a . p <= b`` with unit normals, which is the
form the planner needs; boxes additionally get an exact signed distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence, Union

import numpy as np

Sense = Literal["<=", ">="]


@dataclass(frozen=True)
class TimeWindow:
    """Closed window ``[t_on, t_off]`` in mission-relative seconds."""

    t_on: float
    t_off: float

    def __post_init__(self):
        if self.t_off < self.t_on:
            raise ValueError(f"window t_off={self.t_off} precedes t_on={self.t_on}")

    def contains(self, t: float, tol: float = 1e-9) -> bool:
        return self.t_on - tol <= t <= self.t_off + tol


@dataclass(frozen=True)
class Region:
    """A convex region of the position plane.

    Exactly one of ``box`` and ``halfspaces`` is set. ``box`` holds
    ``(lo, hi)`` pairs per position axis; ``halfspaces`` holds ``(a, b)``
    pairs meaning ``a . p <= b``.
    """

    name: str
    box: tuple[tuple[float, float], ...] | None = None
    halfspaces: tuple[tuple[tuple[float, ...], float], ...] | None = None
    kind: str = "region"
    window: TimeWindow | None = None

    def __post_init__(self):
        if (self.box is None) == (self.halfspaces is None):
            raise ValueError(f"region {self.name!r} needs exactly one of box / halfspaces")
        if self.box is not None:
            for lo, hi in self.box:
                if hi < lo:
                    raise ValueError(f"region {self.name!r} has an inverted box axis")

    @classmethod
    def from_bounds(cls, name: str, bounds: Sequence[float], **kw) -> "Region":
        """Build a box from the flat ``(xmin, xmax, ymin, ymax)`` convention."""
        if len(bounds) % 2:
            raise ValueError("box bounds must come in (min, max) pairs")
        pairs = tuple((float(bounds[i]), float(bounds[i + 1])) for i in range(0, len(bounds), 2))
        return cls(name=name, box=pairs, **kw)

    @property
    def dim(self) -> int:
        if self.box is not None:
            return len(self.box)
        return len(self.halfspaces[0][0])

    @property
    def is_blocking(self) -> bool:
        """Obstacles block always; windowed regions block during their window."""
        return self.kind == "obstacle" or self.window is not None

    def blocked_at(self, t: float) -> bool:
        if self.kind == "obstacle" and self.window is None:
            return True
        return self.window is not None and self.window.contains(t)

    def faces(self) -> list[tuple[np.ndarray, float]]:
        """Halfspace description ``[(a, b), ...]`` with ``a . p <= b``, unit ``a``."""
        if self.box is not None:
            out = []
            for axis, (lo, hi) in enumerate(self.box):
                e = np.zeros(self.dim)
                e[axis] = 1.0
                out.append((-e, -lo))
                out.append((e.copy(), hi))
            return out
        out = []
        for a, b in self.halfspaces:
            a = np.asarray(a, dtype=float)
            n = np.linalg.norm(a)
            out.append((a / n, float(b) / n))
        return out

    def robustness(self, p: np.ndarray) -> float:
        """Membership margin: minimum slack over the faces, positive inside."""
        p = np.asarray(p, dtype=float)
        return float(min(b - a @ p for a, b in self.faces()))

    def sdf(self, points: np.ndarray) -> np.ndarray:
        """Signed distance (negative inside) for points of shape ``(..., dim)``.

        Exact for boxes. For general halfspace intersections this is the
        maximum face violation, exact inside and a lower bound outside.
        """
        points = np.asarray(points, dtype=float)
        if self.box is not None:
            lo = np.array([b[0] for b in self.box])
            hi = np.array([b[1] for b in self.box])
            centre = 0.5 * (lo + hi)
            half = 0.5 * (hi - lo)
            q = np.abs(points - centre) - half
            outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
            inside = np.minimum(np.max(q, axis=-1), 0.0)
            return outside + inside
        vals = [points @ a - b for a, b in self.faces()]
        return np.max(np.stack(vals, axis=0), axis=0)

    def to_json(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.box is not None:
            d["box"] = [v for pair in self.box for v in pair]
        else:
            d["halfspaces"] = [{"a": list(a), "b": b} for a, b in self.halfspaces]
        if self.window is not None:
            d["window"] = [self.window.t_on, self.window.t_off]
        return d


@dataclass(frozen=True)
class LinearInequality:
    """``a . x (sense) b`` over the full state vector."""

    a: tuple[float, ...]
    b: float
    sense: Sense = "<="

    def robustness(self, x: np.ndarray) -> float:
        v = float(np.dot(self.a, x))
        return v - self.b if self.sense == ">=" else self.b - v

    def field(self, states: np.ndarray) -> np.ndarray:
        """Raw affine field, negative where satisfied."""
        v = states @ np.asarray(self.a, dtype=float)
        return v - self.b if self.sense == "<=" else self.b - v

    def as_leq(self) -> tuple[np.ndarray, float]:
        a = np.asarray(self.a, dtype=float)
        if self.sense == "<=":
            return a, float(self.b)
        return -a, -float(self.b)


@dataclass(frozen=True)
class RegionRef:
    region: str


@dataclass(frozen=True)
class NonlinearForm:
    """A named predicate with no linear description, kept as its source text.

    It links (the name is known) but cannot be evaluated, reached or planned
    against; every consumer raises ``NonlinearAtom``.
    """

    text: str


@dataclass(frozen=True)
class AtomicPredicate:
    name: str
    form: Union[LinearInequality, RegionRef, NonlinearForm]
    meta: dict = field(default_factory=dict, compare=False, hash=False)
