"""Pre-planning feasibility filter.

The formula is decomposed, every subformula gets its own value field, and
each field is read at the initial state. The mission proceeds only if every
subformula value is negative there; the aggregate is their maximum.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .decompose import KeepRule, Origin, decompose
from .errors import SffError
from .fields import Grid, ValueField, value_at
from .reach import SolverConfig, subformula_value
from .stl import Formula, format_stl

Verdict = Literal["Feasible", "InfeasibleEmptyBRT", "InfeasibleX0Outside", "Error"]
ERROR_VALUE = 1e9


@dataclass
class FilterConfig:
    """Knobs for :func:`run_filter`.

    ``margin`` scales the grid cell diagonal into the safety band required
    between the initial state and the zero level set.
    """

    margin: float = 0.5
    workers: int | None = None
    keep: KeepRule = "last"
    reach: SolverConfig = field(default_factory=SolverConfig)
    keep_fields: bool = False

    @classmethod
    def from_scenario(cls, scenario, **overrides) -> "FilterConfig":
        opts = dict(scenario.options.get("filter", {}))
        reach = SolverConfig(**scenario.options.get("reach", {}))
        opts.update(overrides)
        opts.setdefault("reach", reach)
        return cls(**opts)


@dataclass
class SubformulaVerdict:
    index: int
    subformula: Formula
    value_at_x0: float
    verdict: Verdict
    reason: str
    origin: Origin
    field_min: float = np.nan
    stats: dict = field(default_factory=dict)
    value_field: ValueField | None = None

    @property
    def feasible(self) -> bool:
        return self.verdict == "Feasible"

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "formula": format_stl(self.subformula),
            "value": self.value_at_x0,
            "verdict": self.verdict,
            "reason": self.reason,
            "field_min": self.field_min,
            "provenance": self.origin.to_json(),
            "stats": dict(self.stats),
        }


@dataclass
class FeasibilityReport:
    level: int
    formula: Formula
    verdicts: list[SubformulaVerdict]

    @property
    def aggregate_value(self) -> float:
        return max((v.value_at_x0 for v in self.verdicts), default=-np.inf)

    @property
    def inf(self) -> list[int]:
        return [v.index for v in self.verdicts if not v.feasible]

    @property
    def decision(self) -> str:
        return "Proceed" if not self.inf else "Reject"

    @property
    def infeasible(self) -> list[SubformulaVerdict]:
        return [v for v in self.verdicts if not v.feasible]

    def to_json(self) -> dict:
        return {
            "level": self.level,
            "formula": format_stl(self.formula),
            "decision": self.decision,
            "aggregate_value": self.aggregate_value,
            "inf": self.inf,
            "verdicts": [v.to_json() for v in self.verdicts],
        }


def classify(h: ValueField, x0, band: float) -> tuple[float, Verdict, str]:
    """Verdict for one subformula field read at ``x0``.

    The reported value is shifted by ``band``, so ``value < 0`` holds exactly
    when the initial state sits at least ``band`` inside the feasible set.
    """
    value = value_at(h, x0) + band
    if value < 0:
        return value, "Feasible", "initial state inside the feasible set"
    if h.min() >= 0:
        return value, "InfeasibleEmptyBRT", "no state satisfies the subformula"
    return value, "InfeasibleX0Outside", "the feasible set does not contain the initial state"


def nearest_feasible(h: ValueField, x0) -> float | None:
    """Distance from ``x0`` to the closest grid node with a negative value."""
    inside = h.values < 0
    if not inside.any():
        return None
    pts = h.grid.states()[inside]
    return float(np.min(np.linalg.norm(pts - np.asarray(x0, dtype=float), axis=-1)))


def _check_one(i, f, origin, scenario, grid, cfg: FilterConfig, band) -> SubformulaVerdict:
    t0 = time.perf_counter()
    try:
        h = subformula_value(f, scenario, grid, cfg.reach)
    except SffError as exc:
        return SubformulaVerdict(i, f, ERROR_VALUE, "Error", f"{type(exc).__name__}: {exc}", origin,
                                 stats={"wall_time_s": time.perf_counter() - t0, "error": type(exc).__name__})
    value, verdict, reason = classify(h, scenario.x0, band)
    stats = {"wall_time_s": time.perf_counter() - t0, "nearest_feasible": nearest_feasible(h, scenario.x0)}
    return SubformulaVerdict(i, f, float(value), verdict, reason, origin, float(h.min()), stats,
                             h if cfg.keep_fields else None)


def run_filter(f: Formula, scenario, level: int = 1, grid: Grid | None = None,
               cfg: FilterConfig | None = None) -> FeasibilityReport:
    """Decompose ``f`` and check each subformula against ``scenario``.

    Subformulas are solved concurrently; the report lists them in
    decomposition order whatever the completion order. A subformula whose
    solve raises gets an ``Error`` verdict with value ``1e9``, which forces
    a rejection.
    """
    cfg = cfg or FilterConfig.from_scenario(scenario)
    grid = grid or scenario.grid()
    if not grid.contains(scenario.x0):
        raise SffError(f"initial state {scenario.x0.tolist()} lies outside the grid")
    sset = decompose(f, level, cfg.keep)
    band = cfg.margin * grid.cell_diagonal
    jobs = list(zip(range(len(sset)), sset.subformulas, sset.origins))
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        futures = [pool.submit(_check_one, i, g, o, scenario, grid, cfg, band) for i, g, o in jobs]
        verdicts = [fut.result() for fut in futures]
    return FeasibilityReport(level, f, verdicts)
