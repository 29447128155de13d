"""Rewriting an STL formula into a conjunction of simpler subformulas.

Three rules are available:

* ``always``:     G[a,b](p & q)  ->  G[a,b] p & G[a,b] q        (exact)
* ``until``:      p U[a,b] q     ->  G[0,b] p & F[a,b] q         (conservative)
* ``eventually``: F[a,b](p & q)  ->  G[a,b] p & F[a,b] q         (conservative)

Level 0 uses ``always``; level 1 adds ``until``; level 2 adds ``eventually``.
Rules are applied top-down to a fixpoint. Negations and disjunctions are
left untouched, together with everything below them, so every rewrite
happens in positive position.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Union

from .stl import (
    Always,
    And,
    Eventually,
    Formula,
    Interval,
    Until,
    conj,
    format_stl,
)

LEVEL_RULES: dict[int, frozenset[str]] = {
    0: frozenset({"always"}),
    1: frozenset({"always", "until"}),
    2: frozenset({"always", "until", "eventually"}),
}

EXACT_RULES = frozenset({"always"})

KeepRule = Union[Literal["first", "last"], int]


@dataclass(frozen=True)
class Origin:
    """Where a subformula came from.

    ``path`` indexes the node of the original formula the subformula's body
    was taken from. ``merged`` lists paths of identical conjuncts that were
    folded into this one.
    """

    path: tuple[int, ...]
    rewrites: tuple[str, ...] = ()
    merged: tuple[tuple[int, ...], ...] = ()
    notes: tuple[str, ...] = ()

    @property
    def exact(self) -> bool:
        return set(self.rewrites) <= EXACT_RULES

    def to_json(self) -> dict:
        return {
            "path": list(self.path),
            "rewrites": list(self.rewrites),
            "exact": self.exact,
            "merged": [list(p) for p in self.merged],
            "notes": list(self.notes),
        }


@dataclass
class SubformulaSet:
    original: Formula
    level: int
    subformulas: list[Formula]
    origins: list[Origin]
    keep: KeepRule = "last"

    def __len__(self) -> int:
        return len(self.subformulas)

    def __iter__(self):
        return iter(self.subformulas)

    @property
    def conjunction(self) -> Formula:
        return conj(*self.subformulas)

    @property
    def exact(self) -> bool:
        return all(o.exact for o in self.origins)


def _keep_index(keep: KeepRule, n: int) -> int:
    if keep == "last":
        return n - 1
    if keep == "first":
        return 0
    idx = int(keep)
    if not -n <= idx < n:
        raise ValueError(f"eventually-keep index {idx} out of range for {n} conjuncts")
    return idx % n


def rewrite_always(f: Formula) -> Formula:
    """One application of the ``always`` split at the root of ``f``."""
    if isinstance(f, Always) and isinstance(f.child, And):
        return And(tuple(Always(f.interval, c) for c in f.child.items))
    return f


def rewrite_until(f: Formula) -> Formula:
    if isinstance(f, Until):
        return And((Always(Interval(0.0, f.interval.b), f.left), Eventually(f.interval, f.right)))
    return f


def rewrite_eventually(f: Formula, keep: KeepRule = "last") -> Formula:
    if isinstance(f, Eventually) and isinstance(f.child, And) and len(f.child.items) > 1:
        items = f.child.items
        k = _keep_index(keep, len(items))
        return And(tuple(
            Eventually(f.interval, c) if i == k else Always(f.interval, c)
            for i, c in enumerate(items)
        ))
    return f


_Piece = tuple[Formula, tuple[int, ...], tuple[str, ...], tuple[str, ...]]


class _Splitter:
    def __init__(self, rules: frozenset[str], keep: KeepRule):
        self.rules = rules
        self.keep = keep

    def split(self, f: Formula, path: tuple[int, ...],
              child_paths: list[tuple[int, ...]] | None = None) -> list[_Piece]:
        cp = child_paths or [path + (i,) for i in range(len(f.children()))]
        if isinstance(f, And):
            out: list[_Piece] = []
            for c, p in zip(f.items, cp):
                out.extend(self.split(c, p))
            return out
        if isinstance(f, Always):
            inner = self.split(f.child, cp[0])
            if "always" in self.rules and len(inner) > 1:
                return [(Always(f.interval, c), p, _add(rw, "always"), nt) for c, p, rw, nt in inner]
            return [_wrap(Always, f.interval, inner, path)]
        if isinstance(f, Eventually):
            inner = self.split(f.child, cp[0])
            if "eventually" in self.rules and len(inner) > 1:
                k = _keep_index(self.keep, len(inner))
                out = []
                for j, (c, p, rw, nt) in enumerate(inner):
                    if j == k:
                        note = f"kept conjunct {j + 1} of {len(inner)} under F"
                        out.append((Eventually(f.interval, c), p, _add(rw, "eventually"), nt + (note,)))
                    else:
                        out.append((Always(f.interval, c), p, _add(rw, "eventually"), nt))
                return out
            return [_wrap(Eventually, f.interval, inner, path)]
        if isinstance(f, Until):
            if "until" in self.rules:
                held = Always(Interval(0.0, f.interval.b), f.left)
                reached = Eventually(f.interval, f.right)
                pieces = self.split(held, cp[0], [cp[0]]) + self.split(reached, cp[1], [cp[1]])
                return [(g, p, _add(rw, "until", first=True), nt) for g, p, rw, nt in pieces]
            li = self.split(f.left, cp[0])
            ri = self.split(f.right, cp[1])
            rw = tuple(dict.fromkeys(r for piece in li + ri for r in piece[2]))
            nt = tuple(n for piece in li + ri for n in piece[3])
            left = conj(*[piece[0] for piece in li])
            right = conj(*[piece[0] for piece in ri])
            return [(Until(f.interval, left, right), path, rw, nt)]
        # Not, Or, atoms and true pass through unchanged.
        return [(f, path, (), ())]


def _add(rw: tuple[str, ...], rule: str, first: bool = False) -> tuple[str, ...]:
    return tuple(dict.fromkeys((rule,) + rw if first else rw + (rule,)))


def _wrap(kind, iv: Interval, inner: list[_Piece], path: tuple[int, ...]) -> _Piece:
    rw = tuple(dict.fromkeys(r for piece in inner for r in piece[2]))
    nt = tuple(n for piece in inner for n in piece[3])
    return (kind(iv, conj(*[piece[0] for piece in inner])), path, rw, nt)


def decompose(f: Formula, level: int, keep: KeepRule = "last") -> SubformulaSet:
    """Split ``f`` into subformulas whose conjunction is the decomposed formula.

    Identical conjuncts are kept once, at their first occurrence; the paths
    of the dropped copies are recorded in ``Origin.merged``.
    """
    if level not in LEVEL_RULES:
        raise ValueError(f"decomposition level must be 0, 1 or 2, got {level!r}")
    pieces = _Splitter(LEVEL_RULES[level], keep).split(f, ())
    subs: list[Formula] = []
    origins: list[Origin] = []
    index: dict[Formula, int] = {}
    for g, path, rw, notes in pieces:
        if g in index:
            i = index[g]
            o = origins[i]
            origins[i] = Origin(o.path, tuple(dict.fromkeys(o.rewrites + rw)), o.merged + (path,), o.notes)
            continue
        index[g] = len(subs)
        subs.append(g)
        origins.append(Origin(path, rw, (), notes))
    return SubformulaSet(f, level, subs, origins, keep)


def describe(sset: SubformulaSet) -> list[str]:
    return [format_stl(g) for g in sset.subformulas]
