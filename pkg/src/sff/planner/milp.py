"""Mixed-integer linear program container and CPLEX LP text export."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Literal

import numpy as np
from scipy import sparse

Sense = Literal["<=", ">=", "="]


@dataclass
class Row:
    name: str
    cols: np.ndarray
    vals: np.ndarray
    sense: Sense
    rhs: float


@dataclass
class MilpModel:
    """Variables with bounds and integrality, linear rows, and a minimisation objective."""

    names: list[str] = field(default_factory=list)
    lb: list[float] = field(default_factory=list)
    ub: list[float] = field(default_factory=list)
    integer: list[bool] = field(default_factory=list)
    rows: list[Row] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    objective_constant: float = 0.0
    index: dict[str, int] = field(default_factory=dict)
    groups: dict[str, list[int]] = field(default_factory=dict)

    # -- building ---------------------------------------------------------

    def add_var(self, name: str, lb: float = 0.0, ub: float = np.inf, integer: bool = False,
                group: str | None = None) -> int:
        if name in self.index:
            raise ValueError(f"duplicate variable name {name!r}")
        j = len(self.names)
        self.names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.integer.append(bool(integer))
        self.index[name] = j
        if group:
            self.groups.setdefault(group, []).append(j)
        return j

    def add_binary(self, name: str, group: str | None = None) -> int:
        return self.add_var(name, 0.0, 1.0, integer=True, group=group)

    def add_row(self, terms: dict[int, float] | Iterable[tuple[int, float]], sense: Sense, rhs: float,
                name: str | None = None) -> int:
        items = terms.items() if isinstance(terms, dict) else terms
        acc: dict[int, float] = {}
        for j, v in items:
            acc[j] = acc.get(j, 0.0) + float(v)
        cols = np.array([j for j, v in acc.items() if v != 0.0], dtype=int)
        vals = np.array([acc[j] for j in cols], dtype=float)
        i = len(self.rows)
        self.rows.append(Row(name or f"c{i}", cols, vals, sense, float(rhs)))
        return i

    # -- views ------------------------------------------------------------

    @property
    def n_vars(self) -> int:
        return len(self.names)

    @property
    def n_binaries(self) -> int:
        return int(sum(self.integer))

    @property
    def binaries(self) -> list[int]:
        return [j for j, b in enumerate(self.integer) if b]

    def cost_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for j, v in self.objective.items():
            c[j] = v
        return c

    def matrices(self):
        """``(A_ub, b_ub, A_eq, b_eq)`` as CSR matrices; ``>=`` rows are negated."""
        ub_r, ub_c, ub_v, b_ub = [], [], [], []
        eq_r, eq_c, eq_v, b_eq = [], [], [], []
        for row in self.rows:
            if row.sense == "=":
                k = len(b_eq)
                eq_r += [k] * len(row.cols)
                eq_c += row.cols.tolist()
                eq_v += row.vals.tolist()
                b_eq.append(row.rhs)
            else:
                s = 1.0 if row.sense == "<=" else -1.0
                k = len(b_ub)
                ub_r += [k] * len(row.cols)
                ub_c += row.cols.tolist()
                ub_v += (s * row.vals).tolist()
                b_ub.append(s * row.rhs)
        n = self.n_vars
        a_ub = sparse.csr_matrix((ub_v, (ub_r, ub_c)), shape=(len(b_ub), n))
        a_eq = sparse.csr_matrix((eq_v, (eq_r, eq_c)), shape=(len(b_eq), n))
        return a_ub, np.array(b_ub), a_eq, np.array(b_eq)

    def check(self, x: np.ndarray, tol: float = 1e-6) -> list[str]:
        """Names of rows and bounds violated by ``x`` beyond ``tol``."""
        bad = []
        x = np.asarray(x, dtype=float)
        for row in self.rows:
            v = float(row.vals @ x[row.cols]) if len(row.cols) else 0.0
            if (row.sense == "<=" and v > row.rhs + tol) or (row.sense == ">=" and v < row.rhs - tol) \
                    or (row.sense == "=" and abs(v - row.rhs) > tol):
                bad.append(row.name)
        lb, ub = np.array(self.lb), np.array(self.ub)
        for j in np.nonzero((x < lb - tol) | (x > ub + tol))[0]:
            bad.append(f"bound:{self.names[j]}")
        for j in self.binaries:
            if abs(x[j] - round(x[j])) > tol:
                bad.append(f"integrality:{self.names[j]}")
        return bad


def _num(v: float) -> str:
    if v == 0:
        return "0"
    return repr(float(v)) if not float(v).is_integer() else str(int(v))


def _terms(names, cols, vals) -> str:
    parts = []
    for j, v in zip(cols, vals):
        sign = "-" if v < 0 else "+"
        mag = abs(v)
        coef = "" if mag == 1 else _num(mag) + " "
        parts.append(f"{sign} {coef}{names[j]}")
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def export_lp(m: MilpModel) -> str:
    """CPLEX LP format text for ``m``."""
    lines = ["\\ Generated STL planning model", "Minimize"]
    obj = sorted((j, v) for j, v in m.objective.items() if v != 0)
    if obj:
        cols, vals = zip(*obj)
        lines.append(" obj: " + _terms(m.names, cols, vals))
    else:
        first = m.names[0] if m.names else "x_0_0"
        lines.append(f" obj: 0 {first}")
    lines.append("Subject To")
    for row in m.rows:
        op = {"<=": "<=", ">=": ">=", "=": "="}[row.sense]
        if len(row.cols):
            body = _terms(m.names, row.cols, row.vals)
        else:
            body = f"0 {m.names[0]}"
        lines.append(f" {row.name}: {body} {op} {_num(row.rhs)}")
    lines.append("Bounds")
    for j, name in enumerate(m.names):
        if m.integer[j]:
            continue
        lo, hi = m.lb[j], m.ub[j]
        if lo == hi:
            lines.append(f" {name} = {_num(lo)}")
        elif np.isinf(lo) and np.isinf(hi):
            lines.append(f" {name} free")
        else:
            left = "-inf" if np.isinf(lo) else _num(lo)
            right = "+inf" if np.isinf(hi) else _num(hi)
            lines.append(f" {left} <= {name} <= {right}")
    bins = [m.names[j] for j in m.binaries]
    if bins:
        lines.append("Binaries")
        for k in range(0, len(bins), 8):
            lines.append(" " + " ".join(bins[k:k + 8]))
    lines.append("End")
    return "\n".join(lines) + "\n"
