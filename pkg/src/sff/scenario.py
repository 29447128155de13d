"""Scenario files: map, dynamics, initial state, and timing for one mission."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import jsonschema
import numpy as np

from .dynamics import LinearBoxModel, make_model
from .errors import RegionUnresolved, SchemaError, ScenarioValidationError, UnknownPredicate
from .fields import Grid
from .regions import AtomicPredicate, LinearInequality, NonlinearForm, Region, RegionRef, TimeWindow

_NUM = {"type": "number"}
_PAIR = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
_HALFSPACE = {
    "type": "object",
    "required": ["a", "b"],
    "properties": {"a": {"type": "array", "items": _NUM, "minItems": 1}, "b": _NUM},
    "additionalProperties": False,
}

SCENARIO_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["name", "workspace", "regions", "dynamics", "x0", "horizon_s", "dt_s", "grid"],
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "notes": {"type": "string"},
        "workspace": {"type": "array", "items": _PAIR, "minItems": 1},
        "regions": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "properties": {
                    "kind": {"enum": ["obstacle", "goal", "zone", "region", "start"]},
                    "box": {"type": "array", "items": _NUM, "minItems": 2},
                    "halfspace": _HALFSPACE,
                    "halfspaces": {"type": "array", "items": _HALFSPACE, "minItems": 1},
                    "window": _PAIR,
                    "note": {"type": "string"},
                },
                "oneOf": [
                    {"required": ["box"]},
                    {"required": ["halfspace"]},
                    {"required": ["halfspaces"]},
                ],
                "additionalProperties": False,
            },
        },
        "predicates": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["a", "b"],
                "properties": {
                    "a": {"type": "array", "items": _NUM},
                    "b": _NUM,
                    "sense": {"enum": ["<=", ">="]},
                },
                "additionalProperties": False,
            },
        },
        "dynamics": {
            "type": "object",
            "required": ["model"],
            "properties": {"model": {"type": "string"}, "params": {"type": "object"}},
            "additionalProperties": False,
        },
        "x0": {"type": "array", "items": _NUM, "minItems": 1},
        "horizon_s": {"type": "number", "exclusiveMinimum": 0},
        "dt_s": {"type": "number", "exclusiveMinimum": 0},
        "grid": {"type": "array", "items": {"type": "integer", "minimum": 3}, "minItems": 1},
        "reach": {"type": "object"},
        "planner": {"type": "object"},
        "filter": {"type": "object"},
    },
    "additionalProperties": False,
}


@dataclass
class Scenario:
    name: str
    workspace: np.ndarray
    regions: dict[str, Region]
    dynamics: LinearBoxModel
    x0: np.ndarray
    horizon: float
    dt: float
    grid_points: tuple[int, ...]
    predicates: dict[str, LinearInequality | NonlinearForm] = field(default_factory=dict)
    options: dict[str, dict] = field(default_factory=dict)
    description: str = ""

    def __post_init__(self):
        self.workspace = np.asarray(self.workspace, dtype=float).reshape(-1, 2)
        self.x0 = np.asarray(self.x0, dtype=float)
        self.grid_points = tuple(int(n) for n in self.grid_points)

    @property
    def position_dims(self) -> tuple[int, ...]:
        return self.dynamics.position_dims

    @property
    def state_dim(self) -> int:
        return self.dynamics.state_dim

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def table(self) -> set[str]:
        return set(self.regions) | set(self.predicates)

    def region(self, name: str) -> Region:
        try:
            return self.regions[name]
        except KeyError:
            raise RegionUnresolved(f"region {name!r} is not defined in scenario {self.name!r}") from None

    def resolve(self, name: str) -> AtomicPredicate:
        if name in self.regions:
            return AtomicPredicate(name, RegionRef(name))
        if name in self.predicates:
            return AtomicPredicate(name, self.predicates[name])
        raise UnknownPredicate(name)

    def blocking_regions(self) -> list[Region]:
        """Obstacles and regions with a blocked time window."""
        return [r for r in self.regions.values() if r.is_blocking]

    def state_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.dynamics.state_bounds(self.workspace)

    def grid(self, n_points: tuple[int, ...] | None = None) -> Grid:
        lo, hi = self.state_bounds()
        pts = n_points or self.grid_points
        return Grid.from_bounds(list(zip(lo, hi)), pts)

    def with_predicates(self, regions: Mapping[str, Region] = (),
                        predicates: Mapping[str, LinearInequality | NonlinearForm] = ()) -> "Scenario":
        """Copy with extra definitions; existing scenario names take precedence."""
        regs = dict(self.regions)
        for k, v in dict(regions).items():
            regs.setdefault(k, v)
        preds = dict(self.predicates)
        for k, v in dict(predicates).items():
            if k not in regs:
                preds.setdefault(k, v)
        return replace(self, regions=regs, predicates=preds)

    def validate(self) -> None:
        n = self.state_dim
        p = len(self.position_dims)
        if self.workspace.shape != (p, 2):
            raise ScenarioValidationError(f"workspace needs {p} axes for {self.dynamics.name}")
        if self.x0.shape != (n,):
            raise ScenarioValidationError(f"x0 has {self.x0.size} entries, state dimension is {n}")
        if len(self.grid_points) != n:
            raise ScenarioValidationError(f"grid has {len(self.grid_points)} axes, state dimension is {n}")
        lo, hi = self.state_bounds()
        if np.any(self.x0 < lo - 1e-9) or np.any(self.x0 > hi + 1e-9):
            raise ScenarioValidationError(f"x0 {self.x0.tolist()} lies outside the workspace")
        for r in self.regions.values():
            if r.dim != p:
                raise ScenarioValidationError(f"region {r.name!r} has dimension {r.dim}, expected {p}")
            if r.box is not None:
                for (blo, bhi), (wlo, whi) in zip(r.box, self.workspace):
                    if blo < wlo - 1e-9 or bhi > whi + 1e-9:
                        raise ScenarioValidationError(f"region {r.name!r} extends outside the workspace")
        for name, pred in self.predicates.items():
            if isinstance(pred, LinearInequality) and len(pred.a) != n:
                raise ScenarioValidationError(f"predicate {name!r} has {len(pred.a)} coefficients, state dimension is {n}")
        ratio = self.horizon / self.dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ScenarioValidationError(f"dt_s={self.dt} does not divide horizon_s={self.horizon}")

    def to_json(self) -> dict:
        out = {
            "name": self.name,
            "workspace": self.workspace.tolist(),
            "regions": {k: r.to_json() for k, r in self.regions.items()},
            "dynamics": self.dynamics.to_json(),
            "x0": self.x0.tolist(),
            "horizon_s": self.horizon,
            "dt_s": self.dt,
            "grid": list(self.grid_points),
        }
        if self.predicates:
            out["predicates"] = {k: {"a": list(v.a), "b": v.b, "sense": v.sense}
                                 for k, v in self.predicates.items() if isinstance(v, LinearInequality)}
        out.update(self.options)
        return out


def _pointer(err: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in err.absolute_path]
    if err.validator == "required" and isinstance(err.instance, dict):
        missing = [k for k in err.validator_value if k not in err.instance]
        if missing:
            parts.append(missing[0])
    return "/" + "/".join(parts) if parts else ""


def _region_from_json(name: str, d: dict) -> Region:
    window = TimeWindow(*map(float, d["window"])) if "window" in d else None
    kind = d.get("kind", "region")
    if "box" in d:
        return Region.from_bounds(name, d["box"], kind=kind, window=window)
    hs = [d["halfspace"]] if "halfspace" in d else d["halfspaces"]
    spaces = tuple((tuple(float(v) for v in h["a"]), float(h["b"])) for h in hs)
    return Region(name=name, halfspaces=spaces, kind=kind, window=window)


def scenario_from_dict(doc: dict) -> Scenario:
    """Validate a scenario document against the schema and build it."""
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    err = jsonschema.exceptions.best_match(validator.iter_errors(doc))
    if err is not None:
        raise SchemaError(_pointer(err), err.message)
    try:
        model = make_model(doc["dynamics"]["model"], doc["dynamics"].get("params"))
    except (TypeError, ValueError) as exc:
        raise SchemaError("/dynamics", str(exc)) from None
    regions = {name: _region_from_json(name, d) for name, d in doc["regions"].items()}
    preds = {
        name: LinearInequality(tuple(map(float, d["a"])), float(d["b"]), d.get("sense", "<="))
        for name, d in doc.get("predicates", {}).items()
    }
    overlap = set(regions) & set(preds)
    if overlap:
        raise ScenarioValidationError(f"names defined as both region and predicate: {sorted(overlap)}")
    sc = Scenario(
        name=doc["name"],
        workspace=np.asarray(doc["workspace"], dtype=float),
        regions=regions,
        dynamics=model,
        x0=np.asarray(doc["x0"], dtype=float),
        horizon=float(doc["horizon_s"]),
        dt=float(doc["dt_s"]),
        grid_points=tuple(doc["grid"]),
        predicates=preds,
        options={k: doc[k] for k in ("reach", "planner", "filter") if k in doc},
        description=doc.get("description", ""),
    )
    sc.validate()
    return sc


def load_scenario(path: str | Path) -> Scenario:
    """Load a scenario JSON file, or a bundled one by name (``"scenario1"``)."""
    p = Path(path)
    if not p.exists() and not p.suffix:
        ref = resources.files("sff.data").joinpath(f"{p.name}.json")
        if ref.is_file():
            return scenario_from_dict(json.loads(ref.read_text()))
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError("", f"invalid JSON: {exc}") from None
    return scenario_from_dict(doc)


def bundled(name: str) -> Scenario:
    return load_scenario(name)
