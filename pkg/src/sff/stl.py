"""STL syntax tree, text grammar, and quantitative robustness semantics.

Text grammar (weakest binding first: ``|``, ``&``, ``U[a,b]``, then the
prefix operators ``!``, ``G[a,b]``, ``F[a,b]``)::

    formula  := or
    or       := and ("|" and)*
    and      := until ("&" until)*
    until    := unary ("U[" num "," num "]" unary)?
    unary    := "!" unary | "G[" num "," num "]" unary | "F[" num "," num "]" unary
              | "(" formula ")" | "true" | IDENT
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Iterable, Iterator, Sequence, Union

import numpy as np

from .errors import BadInterval, HorizonExceeded, NonlinearAtom, StlSyntaxError, UnknownPredicate
from .fields import TRUE_VALUE, Grid, ValueField
from .regions import AtomicPredicate, LinearInequality, NonlinearForm, RegionRef

if TYPE_CHECKING:
    from .scenario import Scenario


# ---------------------------------------------------------------------------
# Syntax tree


@dataclass(frozen=True)
class Interval:
    """Closed time window ``[a, b]`` in seconds."""

    a: float
    b: float

    def __post_init__(self):
        if self.a < 0 or self.b < self.a:
            raise BadInterval(f"interval [{self.a}, {self.b}] must satisfy 0 <= a <= b")

    def indices(self, dt: float) -> tuple[int, int]:
        """Inclusive sample-index offsets covered at sampling period ``dt``."""
        return int(round(self.a / dt)), int(round(self.b / dt))

    def __str__(self) -> str:
        return f"[{_num(self.a)},{_num(self.b)}]"


class Formula:
    """Base class of the STL syntax tree. Nodes are immutable and hashable."""

    def children(self) -> tuple["Formula", ...]:
        return ()

    def __and__(self, other: "Formula") -> "Formula":
        return And((self, other))

    def __or__(self, other: "Formula") -> "Formula":
        return Or((self, other))

    def __invert__(self) -> "Formula":
        return Not(self)

    def __str__(self) -> str:
        return format_stl(self)


@dataclass(frozen=True, eq=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True, eq=True)
class Atom(Formula):
    name: str


@dataclass(frozen=True, eq=True)
class Not(Formula):
    child: Formula

    def children(self):
        return (self.child,)


def _flatten(kind: type, children: Iterable[Formula]) -> tuple[Formula, ...]:
    out: list[Formula] = []
    for c in children:
        if isinstance(c, kind):
            out.extend(c.children())
        else:
            out.append(c)
    return tuple(out)


@dataclass(frozen=True, eq=True)
class And(Formula):
    items: tuple[Formula, ...]

    def __post_init__(self):
        flat = _flatten(And, self.items)
        if not flat:
            raise ValueError("And needs at least one child")
        object.__setattr__(self, "items", flat)

    def children(self):
        return self.items


@dataclass(frozen=True, eq=True)
class Or(Formula):
    items: tuple[Formula, ...]

    def __post_init__(self):
        flat = _flatten(Or, self.items)
        if not flat:
            raise ValueError("Or needs at least one child")
        object.__setattr__(self, "items", flat)

    def children(self):
        return self.items


@dataclass(frozen=True, eq=True)
class Until(Formula):
    interval: Interval
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True, eq=True)
class Eventually(Formula):
    interval: Interval
    child: Formula

    def children(self):
        return (self.child,)


@dataclass(frozen=True, eq=True)
class Always(Formula):
    interval: Interval
    child: Formula

    def children(self):
        return (self.child,)


TEMPORAL = (Until, Eventually, Always)


def conj(*fs: Formula) -> Formula:
    """Conjunction that collapses to its only child when given one formula."""
    return fs[0] if len(fs) == 1 else And(tuple(fs))


def disj(*fs: Formula) -> Formula:
    return fs[0] if len(fs) == 1 else Or(tuple(fs))


def rebuild(f: Formula, children: Sequence[Formula]) -> Formula:
    """Return a node of the same kind as ``f`` with new children."""
    if isinstance(f, (TrueF, Atom)):
        return f
    if isinstance(f, Not):
        return Not(children[0])
    if isinstance(f, And):
        return And(tuple(children))
    if isinstance(f, Or):
        return Or(tuple(children))
    if isinstance(f, Until):
        return Until(f.interval, children[0], children[1])
    if isinstance(f, Eventually):
        return Eventually(f.interval, children[0])
    if isinstance(f, Always):
        return Always(f.interval, children[0])
    raise TypeError(f"not a formula: {f!r}")


def atoms(f: Formula) -> list[str]:
    """Atom names in first-occurrence order."""
    seen: dict[str, None] = {}

    def walk(g: Formula):
        if isinstance(g, Atom):
            seen.setdefault(g.name, None)
        for c in g.children():
            walk(c)

    walk(f)
    return list(seen)


def is_temporal_free(f: Formula) -> bool:
    if isinstance(f, TEMPORAL):
        return False
    return all(is_temporal_free(c) for c in f.children())


def subterm(f: Formula, path: Sequence[int]) -> Formula:
    """Follow child indices ``path`` from ``f``."""
    for i in path:
        f = f.children()[i]
    return f


def horizon(f: Formula) -> float:
    """Time span (seconds) the formula looks ahead from its evaluation time."""
    if isinstance(f, Until):
        return f.interval.b + max(horizon(f.left), horizon(f.right))
    if isinstance(f, (Eventually, Always)):
        return f.interval.b + horizon(f.child)
    return max((horizon(c) for c in f.children()), default=0.0)


# ---------------------------------------------------------------------------
# Printer


def _num(v: float) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def format_stl(f: Formula) -> str:
    """Canonical text form; ``parse_stl`` of the result gives back ``f``."""
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, Not):
        return f"(! {format_stl(f.child)})"
    if isinstance(f, And):
        return "(" + " & ".join(format_stl(c) for c in f.items) + ")"
    if isinstance(f, Or):
        return "(" + " | ".join(format_stl(c) for c in f.items) + ")"
    if isinstance(f, Until):
        return f"({format_stl(f.left)} U{f.interval} {format_stl(f.right)})"
    if isinstance(f, Eventually):
        return f"F{f.interval} {format_stl(f.child)}"
    if isinstance(f, Always):
        return f"G{f.interval} {format_stl(f.child)}"
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# Parser

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<temporal>[GFU]\s*\[)
  | (?P<num>\d+(?:\.\d*)?(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[!&|(),\]])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise StlSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind == "temporal":
            toks.append(_Tok(m.group()[0] + "[", m.group(), pos))
        elif kind == "op":
            toks.append(_Tok(m.group(), m.group(), pos))
        elif kind != "ws":
            toks.append(_Tok(kind, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str, table: Callable[[str], bool] | None):
        self.toks = _tokenize(text)
        self.i = 0
        self.known = table

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def fail(self, expected: list[str]):
        t = self.tok
        what = "end of input" if t.kind == "eof" else f"token {t.text!r}"
        raise StlSyntaxError(f"unexpected {what}", t.pos, expected)

    def expect(self, kind: str) -> _Tok:
        if self.tok.kind != kind:
            self.fail([kind])
        t = self.tok
        self.i += 1
        return t

    def parse(self) -> Formula:
        f = self.or_()
        if self.tok.kind != "eof":
            self.fail(["&", "|", "U[", "end of input"])
        return f

    def or_(self) -> Formula:
        items = [self.and_()]
        while self.tok.kind == "|":
            self.i += 1
            items.append(self.and_())
        return disj(*items)

    def and_(self) -> Formula:
        items = [self.until()]
        while self.tok.kind == "&":
            self.i += 1
            items.append(self.until())
        return conj(*items)

    def until(self) -> Formula:
        left = self.unary()
        if self.tok.kind == "U[":
            self.i += 1
            iv = self.interval()
            right = self.unary()
            return Until(iv, left, right)
        return left

    def interval(self) -> Interval:
        start = self.tok.pos
        a = float(self.expect("num").text)
        self.expect(",")
        b = float(self.expect("num").text)
        self.expect("]")
        if a > b:
            raise BadInterval(f"interval [{_num(a)},{_num(b)}] at position {start} has a > b")
        return Interval(a, b)

    def unary(self) -> Formula:
        t = self.tok
        if t.kind == "!":
            self.i += 1
            return Not(self.unary())
        if t.kind in ("G[", "F["):
            self.i += 1
            iv = self.interval()
            child = self.unary()
            return Always(iv, child) if t.kind == "G[" else Eventually(iv, child)
        if t.kind == "(":
            self.i += 1
            f = self.or_()
            self.expect(")")
            return f
        if t.kind == "ident":
            self.i += 1
            if t.text == "true":
                return TrueF()
            if self.known is not None and not self.known(t.text):
                raise UnknownPredicate(t.text)
            return Atom(t.text)
        self.fail(["!", "G[", "F[", "(", "true", "identifier"])


def parse_stl(text: str, table: Iterable[str] | None = None) -> Formula:
    """Parse STL text into a syntax tree.

    Args:
        text: formula text in the grammar of this module.
        table: names allowed as bare identifiers. ``None`` accepts any name.

    Raises:
        StlSyntaxError: malformed text, with position and expected tokens.
        UnknownPredicate: an identifier missing from ``table``.
        BadInterval: an interval with ``a > b``.
    """
    known = None
    if table is not None:
        names = set(table)
        known = names.__contains__
    return _Parser(text, known).parse()


# ---------------------------------------------------------------------------
# Robustness


@dataclass(frozen=True)
class Trajectory:
    """Sampled signal: ``samples[k]`` is the state at time ``k * dt``."""

    dt: float
    samples: np.ndarray

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.samples, dtype=float))
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if s.shape[0] < 1:
            raise ValueError("trajectory needs at least one sample")
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self)) * self.dt


def predicate_value(pred: AtomicPredicate, x: np.ndarray, scenario: "Scenario") -> float:
    """Robustness ``pi(x) - c`` of one atomic predicate at state ``x``."""
    if isinstance(pred.form, NonlinearForm):
        raise NonlinearAtom(f"predicate {pred.name!r} is nonlinear: {pred.form.text}")
    if isinstance(pred.form, LinearInequality):
        return pred.form.robustness(x)
    region = scenario.region(pred.form.region)
    return region.robustness(np.asarray(x)[list(scenario.position_dims)])


def robustness(
    traj: Trajectory,
    t_index: int,
    f: Formula,
    scenario: "Scenario",
    true_value: float = TRUE_VALUE,
) -> float:
    """Quantitative semantics of ``f`` on ``traj`` at sample ``t_index``.

    Positive means satisfied. Windows are mapped to inclusive sample ranges
    and must fit inside the trajectory.
    """
    n = len(traj)
    if not 0 <= t_index < n:
        raise IndexError(f"t_index {t_index} outside trajectory of length {n}")
    dt = traj.dt
    memo: dict[tuple[int, int], float] = {}
    preds: dict[str, AtomicPredicate] = {}

    def window(iv: Interval, t: int) -> range:
        lo, hi = iv.indices(dt)
        if t + hi >= n:
            raise HorizonExceeded(
                f"window {iv} at t={t * dt:g}s needs sample {t + hi}, trajectory has {n}"
            )
        return range(t + lo, t + hi + 1)

    def rho(g: Formula, t: int) -> float:
        key = (id(g), t)
        if key in memo:
            return memo[key]
        if isinstance(g, TrueF):
            v = true_value
        elif isinstance(g, Atom):
            if g.name not in preds:
                preds[g.name] = scenario.resolve(g.name)
            v = predicate_value(preds[g.name], traj.samples[t], scenario)
        elif isinstance(g, Not):
            v = -rho(g.child, t)
        elif isinstance(g, And):
            v = min(rho(c, t) for c in g.items)
        elif isinstance(g, Or):
            v = max(rho(c, t) for c in g.items)
        elif isinstance(g, Eventually):
            v = max(rho(g.child, k) for k in window(g.interval, t))
        elif isinstance(g, Always):
            v = min(rho(g.child, k) for k in window(g.interval, t))
        elif isinstance(g, Until):
            best = -np.inf
            run = np.inf
            ks = window(g.interval, t)
            for k in range(t, ks.stop):
                run = min(run, rho(g.left, k))
                if k >= ks.start:
                    best = max(best, min(rho(g.right, k), run))
            v = float(best)
        else:
            raise TypeError(f"not a formula: {g!r}")
        memo[key] = v
        return v

    return float(rho(f, t_index))


# ---------------------------------------------------------------------------
# Predicate fields


def predicate_field(atom: Union[AtomicPredicate, Atom, str], scenario: "Scenario", grid: Grid) -> ValueField:
    """Field of an atom's satisfaction set on ``grid``, negative inside.

    Regions use signed distance over the position axes; linear inequalities
    use the raw affine value ``a . x - b``.
    """
    if isinstance(atom, Atom):
        atom = atom.name
    if isinstance(atom, str):
        atom = scenario.resolve(atom)
    if isinstance(atom.form, NonlinearForm):
        raise NonlinearAtom(f"predicate {atom.name!r} is nonlinear: {atom.form.text}")
    states = grid.states()
    if isinstance(atom.form, LinearInequality):
        if len(atom.form.a) != grid.ndim:
            raise ValueError(
                f"predicate {atom.name!r} has {len(atom.form.a)} coefficients for a {grid.ndim}-D state"
            )
        return ValueField(grid, atom.form.field(states))
    region = scenario.region(atom.form.region)
    pos = states[..., list(scenario.position_dims)]
    return ValueField(grid, region.sdf(pos))


def iter_nodes(f: Formula, path: tuple[int, ...] = ()) -> Iterator[tuple[tuple[int, ...], Formula]]:
    yield path, f
    for i, c in enumerate(f.children()):
        yield from iter_nodes(c, path + (i,))
