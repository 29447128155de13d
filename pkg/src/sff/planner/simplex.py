"""Dense bounded-variable primal simplex.

Solves ``min c.x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  lb <= x <= ub`` with
finite lower bounds. Inequalities get slack columns; a phase-one problem
over artificial columns finds a basis. Pricing is Dantzig's rule, switching
to Bland's rule after a run of degenerate pivots so the method cannot cycle.
The basis inverse is kept explicitly and refactorised periodically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_TOL = 1e-9
_PIVOT_TOL = 1e-9


@dataclass
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded" | "iteration_limit"
    x: np.ndarray | None
    objective: float
    iterations: int


class _Tableau:
    def __init__(self, A: np.ndarray, b: np.ndarray, lb: np.ndarray, ub: np.ndarray, max_iter: int):
        self.A = A
        self.b = b
        self.lb = lb
        self.ub = ub
        self.m, self.n = A.shape
        self.max_iter = max_iter
        self.iterations = 0

    def refactor(self):
        self.Binv = np.linalg.inv(self.A[:, self.basis])
        self.update_basic()

    def update_basic(self):
        nb = self.x.copy()
        nb[self.basis] = 0.0
        self.x[self.basis] = self.Binv @ (self.b - self.A @ nb)

    def run(self, c: np.ndarray) -> str:
        degenerate = 0
        since_refactor = 0
        in_basis = np.zeros(self.n, dtype=bool)
        in_basis[self.basis] = True
        while True:
            if self.iterations >= self.max_iter:
                return "iteration_limit"
            y = c[self.basis] @ self.Binv
            d = c - y @ self.A
            at_lo = self.x <= self.lb + _TOL
            at_hi = self.x >= self.ub - _TOL
            gain = np.where(~in_basis & ~at_hi & (d < -_TOL), -d, 0.0)
            gain = np.maximum(gain, np.where(~in_basis & ~at_lo & (d > _TOL), d, 0.0))
            if not gain.any():
                return "optimal"
            bland = degenerate > 50
            j = int(np.flatnonzero(gain)[0]) if bland else int(np.argmax(gain))
            direction = 1.0 if d[j] < 0 else -1.0
            alpha = self.Binv @ self.A[:, j]
            # Step length: basic variables move by -direction * t * alpha.
            move = direction * alpha
            xb = self.x[self.basis]
            lbb, ubb = self.lb[self.basis], self.ub[self.basis]
            ratios = np.full(self.m, np.inf)
            dec = move > _PIVOT_TOL
            inc = move < -_PIVOT_TOL
            ratios[dec] = (xb[dec] - lbb[dec]) / move[dec]
            ratios[inc] = (ubb[inc] - xb[inc]) / -move[inc]
            ratios = np.maximum(ratios, 0.0)
            flip = self.ub[j] - self.lb[j]
            t_basic = ratios.min() if self.m else np.inf
            if min(t_basic, flip) == np.inf:
                return "unbounded"
            self.iterations += 1
            if flip <= t_basic:
                t = flip
                self.x[j] = self.ub[j] if direction > 0 else self.lb[j]
                self.x[self.basis] = xb - t * move
                degenerate = 0
                continue
            t = t_basic
            ties = np.flatnonzero(ratios <= t + 1e-12)
            if bland:
                r = int(ties[np.argmin(np.asarray(self.basis)[ties])])
            else:
                r = int(ties[np.argmax(np.abs(alpha[ties]))])
            leaving = self.basis[r]
            self.x[self.basis] = xb - t * move
            self.x[j] += direction * t
            self.x[leaving] = self.lb[leaving] if move[r] > 0 else self.ub[leaving]
            degenerate = degenerate + 1 if t <= _TOL else 0
            # Eta update of the explicit inverse.
            piv = alpha[r]
            row = self.Binv[r] / piv
            self.Binv -= np.outer(alpha, row)
            self.Binv[r] = row
            in_basis[leaving] = False
            in_basis[j] = True
            self.basis[r] = j
            since_refactor += 1
            if since_refactor >= 64:
                self.refactor()
                since_refactor = 0


def solve_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, lb=None, ub=None,
             max_iter: int = 50_000) -> LpResult:
    """Solve a bounded LP; all lower bounds must be finite."""
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub.todense() if hasattr(A_ub, "todense") else A_ub, dtype=float)
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq.todense() if hasattr(A_eq, "todense") else A_eq, dtype=float)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    lb = np.zeros(n) if lb is None else np.asarray(lb, dtype=float)
    ub = np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=float)
    if np.any(~np.isfinite(lb)):
        raise ValueError("simplex backend needs finite lower bounds")
    if np.any(lb > ub + _TOL):
        return LpResult("infeasible", None, np.inf, 0)

    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq
    # Columns: structural | slacks | artificials.
    A = np.zeros((m, n + m_ub + m))
    A[:m_ub, :n] = A_ub
    A[m_ub:, :n] = A_eq
    A[:m_ub, n:n + m_ub] = np.eye(m_ub)
    b = np.concatenate([b_ub, b_eq])
    lo = np.concatenate([lb, np.zeros(m_ub), np.zeros(m)])
    hi = np.concatenate([ub, np.full(m_ub, np.inf), np.full(m, np.inf)])

    x = np.zeros(A.shape[1])
    x[:n] = lb
    resid = b - A[:, :n] @ lb
    # Slacks absorb nonnegative residuals of <= rows directly.
    basis = []
    art = n + m_ub
    for i in range(m):
        if i < m_ub and resid[i] >= 0:
            x[n + i] = resid[i]
            basis.append(n + i)
            hi[art + i] = 0.0
        else:
            A[i, art + i] = 1.0 if resid[i] >= 0 else -1.0
            x[art + i] = abs(resid[i])
            basis.append(art + i)

    tab = _Tableau(A, b, lo, hi, max_iter)
    tab.x = x
    tab.basis = basis
    tab.Binv = np.linalg.inv(A[:, basis]) if m else np.zeros((0, 0))

    phase1 = np.zeros(A.shape[1])
    phase1[art:] = 1.0
    status = tab.run(phase1)
    if status == "iteration_limit":
        return LpResult(status, None, np.inf, tab.iterations)
    if tab.x[art:].sum() > 1e-7 * max(1.0, np.abs(b).max(initial=0.0)):
        return LpResult("infeasible", None, np.inf, tab.iterations)
    # Freeze artificials at zero for phase two.
    tab.ub[art:] = 0.0
    tab.x[art:] = np.clip(tab.x[art:], 0.0, 0.0)
    if m:
        tab.refactor()
    cost = np.concatenate([c, np.zeros(m_ub + m)])
    status = tab.run(cost)
    if status != "optimal":
        return LpResult(status, None, np.inf if status != "unbounded" else -np.inf, tab.iterations)
    xs = np.clip(tab.x[:n], lb, ub)
    return LpResult("optimal", xs, float(c @ xs), tab.iterations)
