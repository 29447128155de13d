"""Hypothesis strategies for formulas and signals."""

from __future__ import annotations

import numpy as np
from hypothesis import strategies as st

from sff.stl import Always, And, Atom, Eventually, Interval, Not, Or, TrueF, Until, horizon

NAMES = ("p", "q", "r")
# Thresholds of the 1-D predicates ``x >= c``; see ``PREDICATES``.
THRESHOLDS = {"p": 0.0, "q": 1.0, "r": -1.0}
PREDICATES = {name: {"a": [1.0], "b": c, "sense": ">="} for name, c in THRESHOLDS.items()}
ORACLE_PREDS = {name: (lambda x, c=c: x[0] - c) for name, c in THRESHOLDS.items()}


def intervals(max_b: int = 3, real: bool = False):
    num = (st.floats(0, max_b, allow_nan=False, allow_infinity=False) if real
           else st.integers(0, max_b).map(float))
    return st.tuples(num, num).map(lambda ab: Interval(min(ab), max(ab)))


def formulas(max_depth: int = 4, max_b: int = 3, real: bool = False, true_leaf: bool = True):
    leaves = st.sampled_from(NAMES).map(Atom)
    if true_leaf:
        leaves = leaves | st.just(TrueF())
    iv = intervals(max_b, real)

    def extend(inner):
        lists = st.lists(inner, min_size=2, max_size=3).map(tuple)
        return st.one_of(
            inner.map(Not),
            lists.map(And),
            lists.map(Or),
            st.builds(Eventually, iv, inner),
            st.builds(Always, iv, inner),
            st.builds(Until, iv, inner, inner),
        )

    return st.recursive(leaves, extend, max_leaves=2 ** max_depth)


def depth(f) -> int:
    return 1 + max((depth(c) for c in f.children()), default=0)


@st.composite
def signal_for(draw, f, dt: float = 1.0):
    """Piecewise-constant 1-D signal long enough for ``f``."""
    n = int(round(horizon(f) / dt)) + 1
    pieces = draw(st.lists(st.tuples(st.integers(1, 4), st.integers(-6, 6)), min_size=1, max_size=n))
    vals = []
    for length, level in pieces:
        vals.extend([level * 0.5] * length)
    while len(vals) < n:
        vals.append(vals[-1])
    return np.array(vals[:max(n, 1)], dtype=float).reshape(-1, 1)
