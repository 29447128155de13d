"""STL-constrained trajectory planning by mixed-integer linear programming."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..decompose import SubformulaSet, decompose
from ..errors import EncodingMismatch
from ..stl import Formula, Trajectory, robustness
from .bnb import MilpSolution, SolveConfig, solve_milp
from .encode import CostSpec, Encoding, encode
from .milp import MilpModel, Row, export_lp
from .simplex import LpResult, solve_lp

CHECK_TOL = 1e-6


@dataclass
class PlanResult:
    trajectory: Trajectory
    controls: np.ndarray
    objective: float
    robustness: float
    stats: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "dt": self.trajectory.dt,
            "states": self.trajectory.samples.tolist(),
            "controls": self.controls.tolist(),
            "objective": self.objective,
            "robustness": self.robustness,
            "stats": dict(self.stats),
        }


def solve(enc: Encoding, scenario, cfg: SolveConfig | None = None, check_tol: float = CHECK_TOL) -> PlanResult:
    """Solve an encoded plan and check the trajectory against every encoded formula.

    Raises:
        Infeasible, IterationLimit: from the MILP search.
        EncodingMismatch: the optimal trajectory violates a formula it was
            encoded to satisfy, which means the encoding is wrong.
    """
    sol = solve_milp(enc.model, cfg)
    states = sol.x[enc.x_idx]
    controls = sol.x[enc.u_idx]
    traj = Trajectory(enc.dt, states)
    rho = min((robustness(traj, 0, f, scenario) for f in enc.formulas), default=np.inf)
    if rho < -check_tol:
        raise EncodingMismatch(f"planned trajectory has robustness {rho:.3g} < -{check_tol:g}")
    stats = dict(sol.stats)
    stats.update({f"{k}_indicators": v for k, v in enc.counts.items()})
    return PlanResult(traj, controls, sol.objective, float(rho), stats)


def plan(formula: Formula | SubformulaSet, scenario, level: int | None = None,
         cfg: SolveConfig | None = None, cost: CostSpec | None = None, **encode_kw) -> PlanResult:
    """Encode and solve in one call; ``level`` decomposes ``formula`` first."""
    target = decompose(formula, level) if level is not None and isinstance(formula, Formula) else formula
    enc = encode(target, scenario, cost=cost, **encode_kw)
    return solve(enc, scenario, cfg)


__all__ = [
    "CostSpec",
    "Encoding",
    "LpResult",
    "MilpModel",
    "MilpSolution",
    "PlanResult",
    "Row",
    "SolveConfig",
    "encode",
    "export_lp",
    "plan",
    "solve",
    "solve_lp",
    "solve_milp",
]
