"""STL-constrained trajectory planning as a mixed-integer linear program.

Each halfspace predicate ``a . x <= b`` at step ``k`` gets one binary
``z`` tied to the state by a big-M pair

    a . x + M z <= b - rho + M       (z = 1  =>  a . x <= b - rho)
    a . x + M z >= b + rho           (z = 0  =>  a . x >= b + rho)

and boolean / temporal nodes are encoded recursively with continuous
indicators in ``[0, 1]``; they are integral whenever the predicate binaries
are. Identical (subformula, step) pairs share one indicator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..decompose import SubformulaSet
from ..errors import HorizonTooShort, NonlinearAtom
from ..regions import LinearInequality, RegionRef
from ..stl import Always, And, Atom, Eventually, Formula, Not, Or, TrueF, Until
from .milp import MilpModel

# A literal is ``const + coef * z[var]``; ``var`` is None for constants.
Literal_ = tuple[int | None, float, float]
TRUE: Literal_ = (None, 0.0, 1.0)
FALSE: Literal_ = (None, 0.0, 0.0)


@dataclass
class CostSpec:
    """Weighted L1 control effort ``sum w_kd |u_kd|``.

    A nonzero ``perturbation`` spreads the weights generically over
    ``[1, 1 + p)``, which makes the optimum unique in practice. ``robustness_weight`` is used only when the
    robustness margin is a decision variable.
    """

    perturbation: float = 0.0
    robustness_weight: float = 10.0

    def weights(self, steps: int, m: int) -> np.ndarray:
        idx = np.arange(1, steps * m + 1, dtype=float)
        frac = (idx * 0.6180339887498949) % 1.0
        return (1.0 + self.perturbation * frac).reshape(steps, m)


@dataclass
class Encoding:
    model: MilpModel
    x_idx: np.ndarray
    u_idx: np.ndarray
    steps: int
    dt: float
    formulas: list[Formula]
    roots: list[Literal_]
    rho_idx: int | None = None
    counts: dict[str, int] = field(default_factory=dict)


def _is_const(lit: Literal_) -> bool:
    return lit[0] is None


def _value(lit: Literal_) -> float:
    return lit[2]


def _negate(lit: Literal_) -> Literal_:
    v, coef, const = lit
    return (v, -coef, 1.0 - const)


def reachable_boxes(A, B, c, u_lo, u_hi, x0, lo, hi, steps):
    """Interval bounds on ``x_k`` implied by the dynamics, clipped to ``[lo, hi]``.

    Returns arrays of shape ``(steps + 1, n)``.
    """
    Ap, An = np.maximum(A, 0.0), np.minimum(A, 0.0)
    Bp, Bn = np.maximum(B, 0.0), np.minimum(B, 0.0)
    push_lo = Bp @ u_lo + Bn @ u_hi + c
    push_hi = Bp @ u_hi + Bn @ u_lo + c
    out_lo = [np.asarray(x0, dtype=float)]
    out_hi = [np.asarray(x0, dtype=float)]
    for _ in range(steps):
        a, b = out_lo[-1], out_hi[-1]
        out_lo.append(np.maximum(Ap @ a + An @ b + push_lo, lo))
        out_hi.append(np.minimum(Ap @ b + An @ a + push_hi, hi))
    return np.array(out_lo), np.array(out_hi)


class _Encoder:
    def __init__(self, scenario, steps: int, dt: float, cost: CostSpec, margin: float,
                 maximize_robustness: bool, x0: np.ndarray | None, tighten: bool):
        self.sc = scenario
        self.N = steps
        self.dt = dt
        self.m = MilpModel()
        self.memo: dict[tuple[Formula, int], Literal_] = {}
        self.halfspaces: dict[tuple[tuple[float, ...], float], int] = {}
        self.pred_memo: dict[tuple[int, int], Literal_] = {}
        self.paths: dict[Formula, str] = {}
        self.counts: dict[str, int] = {}
        self.margin = margin
        dyn = scenario.dynamics
        n, mu = dyn.state_dim, dyn.control_dim
        lo, hi = scenario.state_bounds()
        x0 = scenario.x0 if x0 is None else np.asarray(x0, dtype=float)
        A, B, c = dyn.discrete(dt)
        if tighten:
            self.lo, self.hi = reachable_boxes(A, B, c, dyn.u_lo, dyn.u_hi, x0, lo, hi, steps)
        else:
            self.lo, self.hi = np.tile(lo, (steps + 1, 1)), np.tile(hi, (steps + 1, 1))
        m = self.m
        self.x_idx = np.array([[m.add_var(f"x_{k}_{d}", self.lo[k, d], self.hi[k, d], group="state")
                                for d in range(n)] for k in range(steps + 1)], dtype=int)
        self.u_idx = np.array([[m.add_var(f"u_{k}_{d}", dyn.u_lo[d], dyn.u_hi[d], group="control")
                                for d in range(mu)] for k in range(steps)], dtype=int).reshape(steps, mu)
        umag = np.maximum(np.abs(dyn.u_lo), np.abs(dyn.u_hi))
        weights = cost.weights(steps, mu)
        for k in range(steps):
            for d in range(mu):
                s = m.add_var(f"s_{k}_{d}", 0.0, umag[d], group="effort")
                u = self.u_idx[k, d]
                m.add_row({s: 1.0, u: -1.0}, ">=", 0.0, f"abs_pos_{k}_{d}")
                m.add_row({s: 1.0, u: 1.0}, ">=", 0.0, f"abs_neg_{k}_{d}")
                m.objective[s] = float(weights[k, d])
        for k in range(steps):
            for i in range(n):
                terms = {self.x_idx[k + 1, i]: 1.0}
                for j in range(n):
                    if A[i, j]:
                        terms[self.x_idx[k, j]] = terms.get(self.x_idx[k, j], 0.0) - A[i, j]
                for j in range(mu):
                    if B[i, j]:
                        terms[self.u_idx[k, j]] = -B[i, j]
                m.add_row(terms, "=", float(c[i]), f"dyn_{k}_{i}")
        for i in range(n):
            m.add_row({self.x_idx[0, i]: 1.0}, "=", float(x0[i]), f"init_{i}")
        self.rho = None
        if maximize_robustness:
            self.rho = m.add_var("rho", 0.0, 1.0, group="robustness")
            m.objective[self.rho] = -cost.robustness_weight

    # -- predicates -------------------------------------------------------

    def _halfspaces(self, name: str) -> list[tuple[np.ndarray, float]]:
        pred = self.sc.resolve(name)
        n = self.sc.state_dim
        if isinstance(pred.form, LinearInequality):
            a, b = pred.form.as_leq()
            if a.size != n:
                raise ValueError(f"predicate {name!r} has {a.size} coefficients, state has {n}")
            return [(a, b)]
        if not isinstance(pred.form, RegionRef):
            raise NonlinearAtom(f"predicate {name!r} is not a linear inequality or region")
        region = self.sc.region(pred.form.region)
        out = []
        for a_pos, b in region.faces():
            a = np.zeros(n)
            a[list(self.sc.position_dims)] = a_pos
            out.append((a, float(b)))
        return out

    def _halfspace_lit(self, a: np.ndarray, b: float, k: int) -> Literal_:
        key = (tuple(np.round(a, 12)), round(b, 12))
        hid = self.halfspaces.setdefault(key, len(self.halfspaces))
        if (hid, k) in self.pred_memo:
            return self.pred_memo[(hid, k)]
        used = a != 0
        lo, hi = self.lo[k], self.hi[k]
        top = float(np.sum(np.maximum(a * lo, a * hi)[used]) - b)
        bot = float(np.sum(np.minimum(a * lo, a * hi)[used]) - b)
        # The initial state is given, not decided, so no margin applies to it.
        margin = self.margin if k > 0 else 0.0
        if top <= -margin:
            lit = TRUE
        elif bot > margin:
            lit = FALSE
        else:
            M = 2.0 * max(abs(top), abs(bot)) + 1.0
            if not np.isfinite(M):
                raise ValueError(f"predicate halfspace {hid} is unbounded over the state box; bound the state")
            z = self.m.add_binary(f"z_h{hid}_{k}", group="predicate")
            terms = {int(self.x_idx[k, i]): float(a[i]) for i in range(a.size) if a[i]}
            hi_row = dict(terms)
            hi_row[z] = M
            lo_row = dict(terms)
            lo_row[z] = M
            if self.rho is None or k == 0:
                self.m.add_row(hi_row, "<=", b - margin + M, f"bigm_hi_h{hid}_{k}")
                self.m.add_row(lo_row, ">=", b + margin, f"bigm_lo_h{hid}_{k}")
            else:
                hi_row[self.rho] = 1.0
                lo_row[self.rho] = -1.0
                self.m.add_row(hi_row, "<=", b + M, f"bigm_hi_h{hid}_{k}")
                self.m.add_row(lo_row, ">=", b, f"bigm_lo_h{hid}_{k}")
            lit = (z, 1.0, 0.0)
        self.pred_memo[(hid, k)] = lit
        return lit

    # -- combinators ------------------------------------------------------

    def _name(self, f: Formula, k: int) -> str:
        return f"z_{self.paths.get(f, 'n')}_{k}"

    def _and(self, lits: list[Literal_], name: str, group: str) -> Literal_:
        if any(_is_const(l) and _value(l) < 0.5 for l in lits):
            return FALSE
        lits = [l for l in lits if not _is_const(l)]
        uniq = list(dict.fromkeys(lits))
        if not uniq:
            return TRUE
        if len(uniq) == 1:
            return uniq[0]
        z = self._fresh(name, group)
        total = {z: 1.0}
        const = 0.0
        for v, coef, c0 in uniq:
            self.m.add_row({z: 1.0, v: -coef}, "<=", c0)
            total[v] = total.get(v, 0.0) - coef
            const += c0
        self.m.add_row(total, ">=", const - (len(uniq) - 1))
        return (z, 1.0, 0.0)

    def _or(self, lits: list[Literal_], name: str, group: str) -> Literal_:
        if any(_is_const(l) and _value(l) > 0.5 for l in lits):
            return TRUE
        lits = [l for l in lits if not _is_const(l)]
        uniq = list(dict.fromkeys(lits))
        if not uniq:
            return FALSE
        if len(uniq) == 1:
            return uniq[0]
        z = self._fresh(name, group)
        total = {z: 1.0}
        const = 0.0
        for v, coef, c0 in uniq:
            self.m.add_row({z: 1.0, v: -coef}, ">=", c0)
            total[v] = total.get(v, 0.0) - coef
            const += c0
        self.m.add_row(total, "<=", const)
        return (z, 1.0, 0.0)

    def _fresh(self, name: str, group: str) -> int:
        self.counts[group] = self.counts.get(group, 0) + 1
        base, j = name, 1
        while name in self.m.index:
            j += 1
            name = f"{base}_{j}"
        return self.m.add_var(name, 0.0, 1.0, group=group)

    def _window(self, f, k: int) -> range:
        lo, hi = f.interval.indices(self.dt)
        if k + hi > self.N:
            raise HorizonTooShort(
                f"window {f.interval} at step {k} needs step {k + hi}, plan has {self.N} steps"
            )
        return range(k + lo, k + hi + 1)

    def lit(self, f: Formula, k: int, path: str = "r") -> Literal_:
        self.paths.setdefault(f, path)
        key = (f, k)
        if key in self.memo:
            return self.memo[key]
        name = self._name(f, k)
        if isinstance(f, TrueF):
            out = TRUE
        elif isinstance(f, Atom):
            faces = [self._halfspace_lit(a, b, k) for a, b in self._halfspaces(f.name)]
            out = self._and(faces, name, "atom")
        elif isinstance(f, Not):
            out = _negate(self.lit(f.child, k, path + "_0"))
        elif isinstance(f, And):
            out = self._and([self.lit(c, k, f"{path}_{i}") for i, c in enumerate(f.items)], name, "and")
        elif isinstance(f, Or):
            out = self._or([self.lit(c, k, f"{path}_{i}") for i, c in enumerate(f.items)], name, "or")
        elif isinstance(f, Always):
            out = self._and([self.lit(f.child, j, path + "_0") for j in self._window(f, k)], name, "always")
        elif isinstance(f, Eventually):
            out = self._or([self.lit(f.child, j, path + "_0") for j in self._window(f, k)], name, "eventually")
        elif isinstance(f, Until):
            win = self._window(f, k)
            options = []
            for j in win:
                held = [self.lit(f.left, i, path + "_0") for i in range(k, j + 1)]
                options.append(self._and(held + [self.lit(f.right, j, path + "_1")], f"{name}_s{j}", "until"))
            out = self._or(options, name, "until")
        else:
            raise TypeError(f"not a formula: {f!r}")
        self.memo[key] = out
        return out

    def require(self, lit: Literal_, name: str) -> None:
        v, coef, const = lit
        if v is None:
            if const < 0.5:
                self.m.add_row({}, "=", 1.0, name)
            return
        self.m.add_row({v: coef}, "=", 1.0 - const, name)


def encode(formulas: SubformulaSet | Formula | Sequence[Formula], scenario, steps: int | None = None,
           cost: CostSpec | None = None, *, margin: float = 0.0, maximize_robustness: bool = False,
           avoid_blocking: bool = True, x0=None, tighten: bool = False) -> Encoding:
    """Build the planning MILP for the conjunction of ``formulas``.

    Args:
        formulas: A decomposition result, one formula, or a list of them.
        scenario: Supplies dynamics, bounds, regions, ``x0`` and ``dt``.
        steps: Planning horizon in samples; defaults to the scenario's.
        margin: Fixed robustness margin ``rho`` in the big-M rows.
        maximize_robustness: Make ``rho`` a variable rewarded in the cost.
        avoid_blocking: Also keep every sample out of obstacles and out of
            blocked zones during their windows.
        tighten: Bound each ``x_k`` by the box reachable from ``x0`` in
            ``k`` steps. This tightens big-M constants and folds predicates
            that cannot change value; off, every step uses the state box.

    Raises:
        HorizonTooShort: a temporal window reaches past ``steps``.
        NonlinearAtom: an atom has no linear description.
    """
    if isinstance(formulas, SubformulaSet):
        fs = list(formulas.subformulas)
    elif isinstance(formulas, Formula):
        fs = [formulas]
    else:
        fs = list(formulas)
    steps = scenario.steps if steps is None else int(steps)
    enc = _Encoder(scenario, steps, scenario.dt, cost or CostSpec(), margin, maximize_robustness, x0, tighten)
    roots = []
    for i, f in enumerate(fs):
        lit = enc.lit(f, 0, f"s{i}")
        enc.require(lit, f"root_{i}")
        roots.append(lit)
    if avoid_blocking:
        for r in scenario.blocking_regions():
            for k in range(steps + 1):
                if r.blocked_at(k * scenario.dt):
                    enc.require(enc.lit(Not(Atom(r.name)), k, f"keepout_{r.name}"), f"keepout_{r.name}_{k}")
    counts = dict(enc.counts)
    counts["predicate"] = len(enc.m.groups.get("predicate", []))
    return Encoding(enc.m, enc.x_idx, enc.u_idx, steps, scenario.dt, fs, roots, enc.rho, counts)
