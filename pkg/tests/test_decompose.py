from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import S3_MISSION, line_scenario
from strategies import PREDICATES, formulas, signal_for
from sff.decompose import decompose, rewrite_always, rewrite_eventually, rewrite_until
from sff.stl import (
    Always,
    And,
    Atom,
    Eventually,
    Interval,
    Not,
    Trajectory,
    Until,
    format_stl,
    iter_nodes,
    parse_stl,
    robustness,
    subterm,
)

LINE = line_scenario(predicates=PREDICATES)
S3_TABLE = {"O1", "Right", "Left", "g1", "g2", "t1", "rd1", "rd2"}


def P(text):
    return parse_stl(text, S3_TABLE | {"p", "q", "r"})


def listing(level):
    return [format_stl(g) for g in decompose(P(S3_MISSION), level).subformulas]


def test_rewrite_always_splits():
    assert rewrite_always(P("G[0,30](!O1 & !Right)")) == P("G[0,30] !O1 & G[0,30] !Right")


def test_rewrite_always_identity_single_child():
    f = P("G[0,5] p")
    assert rewrite_always(f) == f


def test_rewrite_always_three_conjuncts():
    out = rewrite_always(P("G[0,5](p & q & r)"))
    assert isinstance(out, And) and len(out.items) == 3


def test_rewrite_until_examples():
    assert rewrite_until(P("!t1 U[0,30] g2")) == P("G[0,30] !t1 & F[0,30] g2")
    assert rewrite_until(P("p U[2,7] q")) == P("G[0,7] p & F[2,7] q")


def test_until_inside_always_rewritten_at_its_node():
    # The Until rewrite creates an And under G, which the always rule then splits.
    sset = decompose(P("G[0,2](p U[0,3] q)"), 1)
    assert sset.subformulas == [P("G[0,2] G[0,3] p"), P("G[0,2] F[0,3] q")]
    assert decompose(P("G[0,2](p U[0,3] q)"), 0).subformulas == [P("G[0,2](p U[0,3] q)")]


def test_rewrite_eventually_examples():
    assert rewrite_eventually(P("F[0,30](Left & g1)")) == P("G[0,30] Left & F[0,30] g1")
    assert rewrite_eventually(P("F[0,30](g2 & rd1)")) == P("G[0,30] g2 & F[0,30] rd1")
    f = P("F[0,5] p")
    assert rewrite_eventually(f) == f


def test_eventually_keep_override():
    assert rewrite_eventually(P("F[0,3](p & q)"), keep="first") == P("F[0,3] p & G[0,3] q")
    sset = decompose(P("F[0,3](p & q & r)"), 2, keep=1)
    assert sset.subformulas == [P("G[0,3] p"), P("F[0,3] q"), P("G[0,3] r")]


def test_eventually_rewrite_flagged_in_provenance():
    sset = decompose(P("F[0,30](g2 & rd1)"), 2)
    for o in sset.origins:
        assert "eventually" in o.rewrites and not o.exact
    assert any("kept conjunct" in n for o in sset.origins for n in o.notes)


def test_scenario3_level0_listing():
    assert listing(0) == [
        "G[0,30] (! O1)",
        "G[0,30] (! Right)",
        "F[0,30] (Left & g1)",
        "F[0,30] (Left & g2)",
        "((! t1) U[0,30] g2)",
        "G[0,30] ((Left & rd1) | rd2)",
    ]


def test_scenario3_level1_listing():
    assert listing(1) == [
        "G[0,30] (! O1)",
        "G[0,30] (! Right)",
        "F[0,30] (Left & g1)",
        "F[0,30] (Left & g2)",
        "G[0,30] (! t1)",
        "F[0,30] g2",
        "G[0,30] ((Left & rd1) | rd2)",
    ]


def test_scenario3_level2_listing():
    assert listing(2) == [
        "G[0,30] (! O1)",
        "G[0,30] (! Right)",
        "G[0,30] Left",
        "F[0,30] g1",
        "F[0,30] g2",
        "G[0,30] (! t1)",
        "G[0,30] ((Left & rd1) | rd2)",
    ]


def test_level2_merges_duplicates_keeping_first():
    sset = decompose(P(S3_MISSION), 2)
    i = sset.subformulas.index(P("G[0,30] Left"))
    assert sset.origins[i].merged
    j = sset.subformulas.index(P("F[0,30] g2"))
    assert sset.origins[j].merged


def test_exactness_flag():
    assert decompose(P(S3_MISSION), 0).exact
    assert not decompose(P(S3_MISSION), 1).exact


def test_disjunction_not_split():
    f = P("G[0,3](p | (q & r))")
    assert decompose(f, 2).subformulas == [f]


def test_bad_level():
    with pytest.raises(ValueError):
        decompose(P("p"), 3)


# -- properties -----------------------------------------------------------


def _rho_sets(f, level, x):
    traj = Trajectory(1.0, x)
    sset = decompose(f, level)
    return robustness(traj, 0, f, LINE), min(robustness(traj, 0, g, LINE) for g in sset.subformulas)


@settings(max_examples=1000, deadline=None)
@given(st.data())
def test_level0_exact(data):
    f = data.draw(formulas(max_depth=4))
    x = data.draw(signal_for(f))
    orig, dec = _rho_sets(f, 0, x)
    assert orig == dec


@settings(max_examples=1000, deadline=None)
@given(st.data(), st.sampled_from([1, 2]))
def test_levels_1_2_conservative(data, level):
    f = data.draw(formulas(max_depth=4))
    x = data.draw(signal_for(f))
    orig, dec = _rho_sets(f, level, x)
    if dec > 0:
        assert orig > 0


def test_conservative_counterexample_until():
    # p holds only until q is reached; G p fails afterwards, the until holds.
    f = P("p U[0,2] q")
    x = np.array([[0.5], [1.5], [-0.5]])
    orig, dec = _rho_sets(f, 1, x)
    assert orig > 0 and dec < 0


def test_conservative_counterexample_eventually():
    # p and q hold together at one sample, but p does not hold throughout.
    f = P("F[0,2](p & q)")
    x = np.array([[-0.5], [1.5], [-2.0]])
    orig, dec = _rho_sets(f, 2, x)
    assert orig > 0 and dec < 0


@settings(max_examples=300, deadline=None)
@given(formulas(max_depth=4), st.sampled_from([0, 1, 2]))
def test_idempotent(f, level):
    once = decompose(f, level)
    twice = decompose(once.conjunction, level)
    assert Counter(twice.subformulas) == Counter(once.subformulas)


@settings(max_examples=300, deadline=None)
@given(formulas(max_depth=4), st.sampled_from([0, 1, 2]))
def test_provenance_paths_resolve(f, level):
    nodes = {path for path, _ in iter_nodes(f)}
    sset = decompose(f, level)
    for o in sset.origins:
        assert o.path in nodes
        subterm(f, o.path)
        for p in o.merged:
            assert p in nodes


@settings(max_examples=300, deadline=None)
@given(formulas(max_depth=4), st.sampled_from([0, 1, 2]))
def test_no_top_level_and(f, level):
    for g in decompose(f, level).subformulas:
        assert not isinstance(g, And)


def test_keep_rule_default_is_last_conjunct():
    out = rewrite_eventually(Eventually(Interval(0, 1), And((Atom("p"), Atom("q")))))
    assert out == And((Always(Interval(0, 1), Atom("p")), Eventually(Interval(0, 1), Atom("q"))))
    assert not isinstance(rewrite_until(Not(Atom("p"))), And)
    assert isinstance(rewrite_until(Until(Interval(0, 1), Atom("p"), Atom("q"))), And)
