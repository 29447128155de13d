"""LP-based branch and bound for the planning MILP.

Nodes are taken in best-bound order with first-in-first-out ties. From each
one the search dives depth-first along the rounding direction, leaving the
siblings in the queue, until the dive is pruned, infeasible or integral. It
branches on the most fractional binary, lowest index on ties.

Planning models with hundreds of big-M binaries have very weak relaxations;
for those the whole MILP can instead be handed to HiGHS.
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from ..errors import Infeasible, IterationLimit, SffError
from .milp import MilpModel
from .simplex import solve_lp


@dataclass
class SolveConfig:
    """MILP search settings.

    ``solver="bnb"`` is the built-in branch and bound; ``"highs"`` hands the
    whole MILP to HiGHS (presolve, cuts, heuristics), which large planning
    models need; ``"auto"`` picks the built-in search up to
    ``auto_binaries`` binaries.
    """

    solver: str = "auto"  # "bnb" | "highs" | "auto"
    auto_binaries: int = 24
    time_limit: float | None = None
    gap: float = 1e-6
    max_nodes: int = 200_000
    max_lp_iters: int = 50_000_000
    int_tol: float = 1e-6
    lp: str = "auto"  # "simplex" | "highs" | "auto"
    auto_size: int = 40_000  # rows * cols above which "auto" picks HiGHS
    cutoff: float = np.inf  # prune nodes whose bound is not below this

    def __post_init__(self):
        if self.solver not in ("bnb", "highs", "auto"):
            raise ValueError(f"unknown MILP solver {self.solver!r}")
        if self.lp not in ("simplex", "highs", "auto"):
            raise ValueError(f"unknown LP backend {self.lp!r}")
        if self.gap < 0:
            raise ValueError("gap must be nonnegative")


@dataclass
class MilpSolution:
    x: np.ndarray
    objective: float
    stats: dict = field(default_factory=dict)


class _LpBackend:
    def __init__(self, model: MilpModel, which: str, auto_size: int):
        self.c = model.cost_vector()
        a_ub, self.b_ub, a_eq, self.b_eq = model.matrices()
        size = (a_ub.shape[0] + a_eq.shape[0]) * model.n_vars
        self.kind = which if which != "auto" else ("highs" if size > auto_size else "simplex")
        if self.kind == "simplex":
            self.a_ub, self.a_eq = a_ub.toarray(), a_eq.toarray()
        else:
            self.a_ub, self.a_eq = a_ub, a_eq

    def solve(self, lb: np.ndarray, ub: np.ndarray):
        """Return ``(status, x, objective, iterations)``."""
        if self.kind == "simplex":
            r = solve_lp(self.c, self.a_ub, self.b_ub, self.a_eq, self.b_eq, lb, ub)
            return r.status, r.x, r.objective, r.iterations
        res = linprog(
            self.c,
            A_ub=self.a_ub if self.a_ub.shape[0] else None,
            b_ub=self.b_ub if self.a_ub.shape[0] else None,
            A_eq=self.a_eq if self.a_eq.shape[0] else None,
            b_eq=self.b_eq if self.a_eq.shape[0] else None,
            bounds=np.column_stack([lb, ub]),
            method="highs-ds",
        )
        status = {0: "optimal", 1: "iteration_limit", 2: "infeasible", 3: "unbounded"}.get(res.status, "error")
        x = res.x if status == "optimal" else None
        obj = float(res.fun) if status == "optimal" else np.inf
        return status, x, obj, int(getattr(res, "nit", 0) or 0)


def solve_milp(model: MilpModel, cfg: SolveConfig | None = None, progress=None) -> MilpSolution:
    """Minimise ``model`` to proven optimality within ``cfg.gap`` (absolute).

    Raises:
        Infeasible: no integer-feasible point exists.
        IterationLimit: the node or LP budget ran out.
    """
    cfg = cfg or SolveConfig()
    solver = cfg.solver
    if solver == "auto":
        solver = "bnb" if model.n_binaries <= cfg.auto_binaries else "highs"
    if solver == "highs":
        return _solve_highs(model, cfg)
    t0 = time.perf_counter()
    lp = _LpBackend(model, cfg.lp, cfg.auto_size)
    binaries = np.array(model.binaries, dtype=int)
    lb0 = np.array(model.lb, dtype=float)
    ub0 = np.array(model.ub, dtype=float)
    stats = {"solver": "bnb", "nodes": 0, "lp_solves": 0, "lp_iterations": 0, "backend": lp.kind,
             "bound_violations": 0, "binaries": int(binaries.size), "rows": len(model.rows),
             "vars": model.n_vars}

    counter = itertools.count()
    heap: list[tuple[float, int, np.ndarray, np.ndarray]] = [(-np.inf, next(counter), lb0, ub0)]
    best_x, best_obj = None, float(cfg.cutoff)

    while heap:
        current = heapq.heappop(heap)
        # Plunge: follow the rounding-preferred child; siblings wait in the heap.
        while current is not None:
            parent_bound, _, lb, ub = current
            current = None
            if parent_bound >= best_obj - cfg.gap:
                break
            if stats["lp_solves"]:
                stats["nodes"] += 1
                if stats["nodes"] > cfg.max_nodes:
                    raise IterationLimit(f"branch and bound stopped after {cfg.max_nodes} nodes")
            if progress is not None and stats["nodes"] % 500 == 0:
                progress(stats, best_obj, min(parent_bound, heap[0][0]) if heap else parent_bound)
            status, x, obj, iters = lp.solve(lb, ub)
            stats["lp_solves"] += 1
            stats["lp_iterations"] += iters
            if stats["lp_iterations"] > cfg.max_lp_iters:
                raise IterationLimit(f"LP iteration budget of {cfg.max_lp_iters} exhausted")
            if status == "iteration_limit":
                raise IterationLimit("LP relaxation hit its iteration limit")
            if status == "unbounded":
                raise SffError("LP relaxation is unbounded")
            if status != "optimal":
                break
            if obj < parent_bound - 1e-7 * max(1.0, abs(parent_bound)):
                stats["bound_violations"] += 1
            if obj >= best_obj - cfg.gap:
                break
            vals = x[binaries]
            score = np.minimum(vals - np.floor(vals), np.ceil(vals) - vals)
            if not binaries.size or score.max() <= cfg.int_tol:
                x = x.copy()
                x[binaries] = np.round(vals)
                best_x, best_obj = x, obj
                break
            pick = int(np.flatnonzero(score >= score.max() - 1e-12)[0])
            j = binaries[pick]
            down_ub = ub.copy()
            down_ub[j] = 0.0
            up_lb = lb.copy()
            up_lb[j] = 1.0
            down = (obj, next(counter), lb, down_ub)
            up = (obj, next(counter), up_lb, ub)
            current, other = (up, down) if x[j] >= 0.5 else (down, up)
            heapq.heappush(heap, other)

    stats["wall_time_s"] = time.perf_counter() - t0
    if best_x is None:
        raise Infeasible("the planning problem has no feasible solution")
    return MilpSolution(best_x, float(best_obj + model.objective_constant), stats)


def _solve_highs(model: MilpModel, cfg: SolveConfig) -> MilpSolution:
    t0 = time.perf_counter()
    a_ub, b_ub, a_eq, b_eq = model.matrices()
    cons = []
    if a_ub.shape[0]:
        cons.append(LinearConstraint(a_ub, -np.inf, b_ub))
    if a_eq.shape[0]:
        cons.append(LinearConstraint(a_eq, b_eq, b_eq))
    c = model.cost_vector()
    scale = max(1.0, float(np.abs(c).sum()))
    options = {"mip_rel_gap": cfg.gap / scale, "node_limit": cfg.max_nodes}
    if cfg.time_limit is not None:
        options["time_limit"] = cfg.time_limit
    res = milp(c, constraints=cons, integrality=np.array(model.integer, dtype=int),
               bounds=Bounds(model.lb, model.ub), options=options)
    stats = {"solver": "highs", "nodes": int(getattr(res, "mip_node_count", 0) or 0),
             "lp_solves": None, "lp_iterations": None, "bound_violations": 0,
             "binaries": model.n_binaries, "rows": len(model.rows), "vars": model.n_vars,
             "mip_gap": getattr(res, "mip_gap", None), "wall_time_s": time.perf_counter() - t0}
    if res.status == 2:
        raise Infeasible("the planning problem has no feasible solution")
    if res.status == 1 or res.x is None:
        raise IterationLimit(f"HiGHS stopped before proving optimality: {res.message}")
    if res.status != 0:
        raise SffError(f"HiGHS failed: {res.message}")
    x = np.asarray(res.x, dtype=float).copy()
    b = np.array(model.binaries, dtype=int)
    x[b] = np.round(x[b])
    return MilpSolution(x, float(res.fun + model.objective_constant), stats)
