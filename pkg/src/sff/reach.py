"""Grid Hamilton-Jacobi reachability and the STL-to-value-field constructions.

The solver marches the value function backward in time from the horizon
with first-order upwind differences and global Lax-Friedrichs dissipation.
Target and constraint sets enter in variational form: every step takes
``max(min(V, h_target(t)), h_constraint(t))``, so reaching the target
freezes the value and leaving the constraint set is masked.

Conventions: a field encodes the set where it is negative. Feasibility of
a subformula at state ``x`` corresponds to ``h(x) < 0``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .dynamics import LinearBoxModel, Mode
from .errors import CflViolation, DimensionMismatch, GridTooCoarse, UnsupportedNesting
from .fields import TRUE_VALUE, Grid, ValueField, value_and, value_not, value_or
from .regions import TimeWindow
from .stl import (
    Always,
    And,
    Atom,
    Eventually,
    Formula,
    Not,
    Or,
    TrueF,
    Until,
    format_stl,
    is_temporal_free,
    predicate_field,
)


@dataclass(frozen=True)
class TimedSet:
    """A static field switched on during ``window`` (solver time, seconds).

    Outside the window the set is empty when used as a target and the whole
    space when used as a constraint. ``window=None`` means always on.
    """

    base: ValueField
    window: TimeWindow | None = None

    def at(self, t: float, role: str) -> np.ndarray:
        if self.window is None or self.window.contains(t):
            return self.base.values
        fill = TRUE_VALUE if role == "target" else -TRUE_VALUE
        return np.full(self.base.grid.shape, fill)

    def breakpoints(self) -> tuple[float, ...]:
        return () if self.window is None else (self.window.t_on, self.window.t_off)


@dataclass
class SolverConfig:
    """HJ solver settings.

    Attributes:
        cfl: Courant factor; the step is ``cfl * min(spacing / alpha)``.
        dt: Fixed step override. Rejected if it breaks the CFL bound.
        max_snapshots: Upper bound on retained time slices.
        max_steps: Hard cap on the number of backward steps.
        order: 1 for first-order upwind with forward Euler, 2 for ENO2
            differences with two-stage TVD Runge-Kutta.
        dissipation: ``"global"`` uses one Lax-Friedrichs coefficient per
            axis for the whole grid; ``"local"`` bounds it node by node.
        steady_tol: Once a step changes no node by more than this, the
            value is stationary and the march jumps to the next time at
            which a set switches. Negative disables the shortcut.
        clearance: Inflation of obstacles and blocked zones, in grid cell
            diagonals. Touching regions otherwise leave a seam of zero
            values that numerical dissipation leaks through.
    """

    cfl: float = 0.5
    dt: float | None = None
    max_snapshots: int = 64
    max_steps: int = 200_000
    order: int = 1
    dissipation: str = "global"
    clearance: float = 1.0
    steady_tol: float = 1e-12

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValueError(f"order must be 1 or 2, got {self.order}")
        if self.dissipation not in ("global", "local"):
            raise ValueError(f"dissipation must be 'global' or 'local', got {self.dissipation!r}")


def _as_list(s: TimedSet | ValueField | Sequence[TimedSet] | None) -> list[TimedSet]:
    if s is None:
        return []
    if isinstance(s, ValueField):
        return [TimedSet(s)]
    if isinstance(s, TimedSet):
        return [s]
    return list(s)


def _gather(sets: list[TimedSet], t: float, role: str, shape) -> np.ndarray:
    if not sets:
        return np.full(shape, TRUE_VALUE if role == "target" else -TRUE_VALUE)
    out = sets[0].at(t, role)
    for s in sets[1:]:
        # Targets are unions, constraints are intersections.
        out = np.minimum(out, s.at(t, role)) if role == "target" else np.maximum(out, s.at(t, role))
    return out


def _ghosts(v: np.ndarray, axis: int, count: int) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Ghost layers extrapolated upward from each edge, nearest first.

    Ghosts never fall below the edge value, so no lower value flows in from
    outside the grid; states cannot leave the domain.
    """
    out = []
    for edge, inner in ((0, 1), (-1, -2)):
        e = np.take(v, [edge], axis=axis)
        slope = np.abs(e - np.take(v, [inner], axis=axis))
        out.append([e + (i + 1) * slope for i in range(count)])
    return out[0], out[1]


def _one_sided(v: np.ndarray, axis: int, dx: float) -> tuple[np.ndarray, np.ndarray]:
    """Backward and forward differences with one ghost node per side."""
    (lo,), (hi,) = _ghosts(v, axis, 1)
    d = np.diff(np.concatenate([lo, v, hi], axis=axis), axis=axis) / dx
    n = v.shape[axis]
    minus = np.take(d, np.arange(n), axis=axis)
    plus = np.take(d, np.arange(1, n + 1), axis=axis)
    return minus, plus


def _eno2(v: np.ndarray, axis: int, dx: float) -> tuple[np.ndarray, np.ndarray]:
    """Second-order ENO one-sided differences (two ghosts per side)."""
    (lo1, lo2), (hi1, hi2) = _ghosts(v, axis, 2)
    w = np.concatenate([lo2, lo1, v, hi1, hi2], axis=axis)
    d1 = np.diff(w, axis=axis) / dx
    d2 = np.diff(d1, axis=axis) / (2 * dx)
    n = v.shape[axis]
    i = np.arange(n)

    def pick(a, b):
        return np.where(np.abs(a) <= np.abs(b), a, b)

    take = lambda a, idx: np.take(a, idx, axis=axis)  # noqa: E731
    minus = take(d1, i + 1) + dx * pick(take(d2, i), take(d2, i + 1))
    plus = take(d1, i + 2) - dx * pick(take(d2, i + 1), take(d2, i + 2))
    return minus, plus


def _time_stamps(horizon: float, dt_max: float, breaks: Iterable[float], max_steps: int) -> np.ndarray:
    """Decreasing solver times from ``horizon`` to 0 hitting every breakpoint."""
    knots = {0.0, float(horizon)}
    knots.update(b for b in breaks if 0.0 < b < horizon)
    knots = sorted(knots)
    stamps = [knots[0]]
    for a, b in zip(knots[:-1], knots[1:]):
        k = max(1, math.ceil((b - a) / dt_max - 1e-12))
        stamps.extend(np.linspace(a, b, k + 1)[1:])
    if len(stamps) - 1 > max_steps:
        raise CflViolation(f"{len(stamps) - 1} steps needed, max_steps is {max_steps}")
    return np.array(stamps[::-1])


def _warn_thin(target: list[TimedSet]) -> None:
    for ts in target:
        neg = ts.base.values < 0
        if not neg.any():
            continue
        for axis in range(neg.ndim):
            other = tuple(i for i in range(neg.ndim) if i != axis)
            span = np.count_nonzero(np.any(neg, axis=other)) if other else np.count_nonzero(neg)
            if span < 3:
                warnings.warn(
                    f"target spans only {span} grid points along axis {axis}",
                    GridTooCoarse, stacklevel=3,
                )
                return


def _solve(model: LinearBoxModel, target, constraint, horizon: float, grid: Grid,
           cfg: SolverConfig, mode: Mode) -> ValueField:
    if grid.ndim != model.state_dim:
        raise DimensionMismatch(f"{grid.ndim}-D grid for {model.state_dim}-D model {model.name}")
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    targets = _as_list(target)
    constraints = _as_list(constraint)
    _warn_thin(targets)

    alpha = model.dissipation(grid.lo, grid.hi)
    dx = grid.spacing
    rate = float(np.sum(alpha / dx))
    dt_cfl = math.inf if rate == 0 else 1.0 / rate
    if cfg.dt is not None:
        if cfg.dt * rate > 1.0 + 1e-12:
            raise CflViolation(f"step {cfg.dt:g}s exceeds the CFL limit {dt_cfl:g}s")
        dt_max = cfg.dt
    else:
        if not 0 < cfg.cfl <= 1:
            raise CflViolation(f"CFL factor {cfg.cfl} outside (0, 1]")
        active = alpha > 0
        dt_max = cfg.cfl * float(np.min(dx[active] / alpha[active])) if rate else (horizon or 1.0)

    breaks = [b for s in targets + constraints for b in s.breakpoints()]
    stamps = _time_stamps(horizon, dt_max, breaks, cfg.max_steps)
    shape = grid.shape
    states = grid.states()

    deriv = _one_sided if cfg.order == 1 else _eno2
    local = cfg.dissipation == "local"

    def rate(v: np.ndarray) -> np.ndarray:
        minus, plus = zip(*(deriv(v, axis, dx[axis]) for axis in range(grid.ndim)))
        p_avg = np.stack([(m + p) / 2 for m, p in zip(minus, plus)], axis=-1)
        ham = model.hamiltonian(states, p_avg, mode)
        if local:
            p_lo = np.stack([np.minimum(m, p) for m, p in zip(minus, plus)], axis=-1)
            p_hi = np.stack([np.maximum(m, p) for m, p in zip(minus, plus)], axis=-1)
            a = np.minimum(model.local_dissipation(states, p_lo, p_hi), alpha)
            return ham + sum(a[..., i] * (plus[i] - minus[i]) / 2 for i in range(grid.ndim))
        return ham + sum(alpha[i] * (plus[i] - minus[i]) / 2 for i in range(grid.ndim))

    def project(v: np.ndarray, t: float) -> np.ndarray:
        return np.maximum(np.minimum(v, _gather(targets, t, "target", shape)),
                          _gather(constraints, t, "constraint", shape))

    v = project(_gather(targets, stamps[0], "target", shape), stamps[0])
    last = len(stamps) - 1
    stride = max(1, math.ceil(last / max(cfg.max_snapshots - 1, 1)))
    # Index of the next stamp at which some set switches, for each stamp.
    knot_times = {0.0} | {b for b in breaks if 0.0 < b < horizon}
    knots = [k for k, t in enumerate(stamps) if any(abs(t - b) <= 1e-9 for b in knot_times)]
    snaps = [(float(stamps[0]), v.copy())]
    k = 1
    while k <= last:
        step = stamps[k - 1] - stamps[k]
        t = float(stamps[k])
        if cfg.order == 1:
            new = project(v + step * rate(v), t)
        else:
            v1 = project(v + step * rate(v), t)
            v2 = v1 + step * rate(v1)
            new = project(0.5 * (v + v2), t)
        steady = float(np.max(np.abs(new - v))) <= cfg.steady_tol
        v = new
        end = next(j for j in knots if j >= k) if steady else k
        for j in range(k, end + 1):
            if j % stride == 0 or j == last:
                snaps.append((float(stamps[j]), v.copy()))
        k = end + 1
    return ValueField(grid, v, snaps)


def solve_maximal_brt(model: LinearBoxModel, target, constraint, horizon: float, grid: Grid,
                      cfg: SolverConfig | None = None) -> ValueField:
    """States from which some control reaches ``target`` within ``horizon``
    while staying in ``constraint``, for every disturbance.

    ``target`` may be a field, a :class:`TimedSet`, or a list of timed sets
    (union). ``constraint`` likewise (intersection); ``None`` means no
    constraint. The returned field is the value at time 0; ``snapshots``
    holds earlier solver times.
    """
    return _solve(model, target, constraint, horizon, grid, cfg or SolverConfig(), "control_minimizes")


def solve_minimal_brt(model: LinearBoxModel, target, horizon: float, grid: Grid,
                      cfg: SolverConfig | None = None) -> ValueField:
    """States from which ``target`` is reached whatever the control does."""
    return _solve(model, target, None, horizon, grid, cfg or SolverConfig(), "control_maximizes")


# ---------------------------------------------------------------------------
# STL subformulas


def static_field(f: Formula, scenario, grid: Grid) -> ValueField:
    """Field of a temporal-free formula: predicate fields joined by the value algebra."""
    if isinstance(f, TrueF):
        return ValueField.whole_space(grid)
    if isinstance(f, Atom):
        return predicate_field(f, scenario, grid)
    if isinstance(f, Not):
        return value_not(static_field(f.child, scenario, grid))
    if isinstance(f, (And, Or)):
        join = value_and if isinstance(f, And) else value_or
        out = static_field(f.items[0], scenario, grid)
        for c in f.items[1:]:
            out = join(out, static_field(c, scenario, grid))
        return out
    raise UnsupportedNesting(f"temporal operator inside a state formula: {format_stl(f)}")


def obstacle_sets(scenario, grid: Grid, offset: float = 0.0, inflate: float = 0.0) -> list[TimedSet]:
    """Constraint sets keeping the state out of obstacles and blocked zones.

    Windows are shifted by ``offset`` so solver time 0 is mission time
    ``offset``. Each region is grown by ``inflate`` in position units.
    """
    out = []
    pos = grid.states()[..., list(scenario.position_dims)]
    for r in scenario.blocking_regions():
        keep_out = ValueField(grid, inflate - r.sdf(pos))
        if r.kind == "obstacle" and r.window is None:
            out.append(TimedSet(keep_out))
        else:
            w = r.window
            if w.t_off - offset < 0:
                continue
            out.append(TimedSet(keep_out, TimeWindow(max(w.t_on - offset, 0.0), w.t_off - offset)))
    return out


def _blocked_as_targets(scenario, grid: Grid, inflate: float) -> list[TimedSet]:
    out = []
    for ts in obstacle_sets(scenario, grid, inflate=inflate):
        out.append(TimedSet(value_not(ts.base), ts.window))
    return out


def _static(f: Formula, what: str) -> None:
    if not is_temporal_free(f):
        raise UnsupportedNesting(f"{what} must be temporal-free, got {format_stl(f)}")


def subformula_value(f: Formula, scenario, grid: Grid | None = None,
                     cfg: SolverConfig | None = None, obstacles: bool = True) -> ValueField:
    """Value field whose negative region is where ``f`` is feasible at time 0.

    Obstacles and blocked zones of ``scenario``, grown by
    ``cfg.clearance`` cell diagonals, are applied as global constraints to
    every temporal construction unless ``obstacles`` is false.

    Raises:
        UnsupportedNesting: for nested temporal operators or boolean
            combinations of temporal subformulas.
    """
    grid = grid or scenario.grid()
    cfg = cfg or SolverConfig()
    model = scenario.dynamics
    inflate = cfg.clearance * grid.cell_diagonal
    keep_out = obstacle_sets(scenario, grid, inflate=inflate) if obstacles else []

    # Push negations through temporal operators onto their duals.
    neg = False
    g = f
    while isinstance(g, Not) and not is_temporal_free(g):
        neg = not neg
        g = g.child
    if neg:
        if isinstance(g, Eventually):
            g = Always(g.interval, Not(g.child))
        elif isinstance(g, Always):
            g = Eventually(g.interval, Not(g.child))
        else:
            raise UnsupportedNesting(f"negated {type(g).__name__} is not supported: {format_stl(f)}")

    if is_temporal_free(g):
        return static_field(g, scenario, grid)

    if isinstance(g, Eventually):
        _static(g.child, "the body of F")
        window = TimeWindow(g.interval.a, g.interval.b)
        target = TimedSet(static_field(g.child, scenario, grid), window)
        return solve_maximal_brt(model, target, keep_out, g.interval.b, grid, cfg)

    if isinstance(g, Always):
        _static(g.child, "the body of G")
        window = TimeWindow(g.interval.a, g.interval.b)
        bad = TimedSet(value_not(static_field(g.child, scenario, grid)), window)
        avoid = [bad] + (_blocked_as_targets(scenario, grid, inflate) if obstacles else [])
        return value_not(solve_minimal_brt(model, avoid, g.interval.b, grid, cfg))

    if isinstance(g, Until):
        _static(g.left, "the left side of U")
        _static(g.right, "the right side of U")
        hold = static_field(g.left, scenario, grid)
        goal = value_and(hold, static_field(g.right, scenario, grid))
        target = TimedSet(goal, TimeWindow(g.interval.a, g.interval.b))
        constraint = [TimedSet(hold)] + keep_out
        return solve_maximal_brt(model, target, constraint, g.interval.b, grid, cfg)

    raise UnsupportedNesting(
        f"boolean combination of temporal subformulas is not supported: {format_stl(f)}"
    )


__all__ = [
    "TimedSet", "SolverConfig", "solve_maximal_brt", "solve_minimal_brt",
    "static_field", "obstacle_sets", "subformula_value",
]
