"""System dynamics ``xdot = f(x, t, u, d)`` for the reach solver and planner.

All built-in models are linear with box-bounded inputs,

    xdot = M x + N u + D d + c,

so the Hamiltonian extremum over ``u`` and ``d`` is attained at box
vertices and is computed in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.linalg import expm

from .errors import ControlOutOfBounds, DimensionMismatch

Mode = Literal["control_minimizes", "control_maximizes"]


def _box_extreme(q: np.ndarray, lo: np.ndarray, hi: np.ndarray, minimize: bool) -> np.ndarray:
    """``min`` (or ``max``) over ``v`` in ``[lo, hi]`` of ``q . v``; ``q`` has shape (..., m)."""
    a = q * lo
    b = q * hi
    pick = np.minimum(a, b) if minimize else np.maximum(a, b)
    return pick.sum(axis=-1)


@dataclass
class LinearBoxModel:
    """Linear dynamics with box control and box disturbance sets."""

    name: str
    M: np.ndarray
    N: np.ndarray
    u_lo: np.ndarray
    u_hi: np.ndarray
    D: np.ndarray | None = None
    d_lo: np.ndarray | None = None
    d_hi: np.ndarray | None = None
    c: np.ndarray | None = None
    position_dims: tuple[int, ...] = (0, 1)
    velocity_bounds: dict[int, float] = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.M = np.atleast_2d(np.asarray(self.M, dtype=float))
        n = self.M.shape[0]
        self.N = np.asarray(self.N, dtype=float).reshape(n, -1)
        self.u_lo = np.asarray(self.u_lo, dtype=float).reshape(-1)
        self.u_hi = np.asarray(self.u_hi, dtype=float).reshape(-1)
        if self.D is None:
            self.D = np.zeros((n, 0))
            self.d_lo = np.zeros(0)
            self.d_hi = np.zeros(0)
        self.D = np.asarray(self.D, dtype=float).reshape(n, -1)
        self.d_lo = np.asarray(self.d_lo, dtype=float).reshape(-1)
        self.d_hi = np.asarray(self.d_hi, dtype=float).reshape(-1)
        self.c = np.zeros(n) if self.c is None else np.asarray(self.c, dtype=float).reshape(n)

    @property
    def state_dim(self) -> int:
        return self.M.shape[0]

    @property
    def control_dim(self) -> int:
        return self.N.shape[1]

    def flow(self, x: np.ndarray, u: np.ndarray, d: np.ndarray | None = None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = x @ self.M.T + np.asarray(u, dtype=float) @ self.N.T + self.c
        if d is not None and self.D.shape[1]:
            out = out + np.asarray(d, dtype=float) @ self.D.T
        return out

    def hamiltonian(self, x: np.ndarray, p: np.ndarray, mode: Mode = "control_minimizes") -> np.ndarray:
        """Vectorised ``min_u max_d p . f`` (or ``max_u min_d``) over trailing axis."""
        minimize = mode == "control_minimizes"
        drift = x @ self.M.T + self.c
        h = np.sum(p * drift, axis=-1)
        h = h + _box_extreme(p @ self.N, self.u_lo, self.u_hi, minimize)
        if self.D.shape[1]:
            h = h + _box_extreme(p @ self.D, self.d_lo, self.d_hi, not minimize)
        return h

    def dissipation(self, lo: Sequence[float], hi: Sequence[float]) -> np.ndarray:
        """Per-axis bound on ``|dH/dp_i|`` over the state box ``[lo, hi]``."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        alpha = np.zeros(self.state_dim)
        umag = np.maximum(np.abs(self.u_lo), np.abs(self.u_hi))
        dmag = np.maximum(np.abs(self.d_lo), np.abs(self.d_hi))
        for i in range(self.state_dim):
            row = self.M[i]
            top = self.c[i] + np.sum(np.maximum(row * lo, row * hi))
            bot = self.c[i] + np.sum(np.minimum(row * lo, row * hi))
            alpha[i] = max(abs(top), abs(bot)) + np.abs(self.N[i]) @ umag + np.abs(self.D[i]) @ dmag
        return alpha

    def local_dissipation(self, x: np.ndarray, p_lo: np.ndarray, p_hi: np.ndarray) -> np.ndarray:
        """Per-node bound on ``|dH/dp_i|``; shape ``x.shape``. ``p`` ranges are unused here."""
        umag = np.maximum(np.abs(self.u_lo), np.abs(self.u_hi))
        dmag = np.maximum(np.abs(self.d_lo), np.abs(self.d_hi))
        return np.abs(x @ self.M.T + self.c) + np.abs(self.N) @ umag + np.abs(self.D) @ dmag

    def discrete(self, dt: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Exact zero-order-hold ``(A, B, c)`` with ``x+ = A x + B u + c``."""
        n, m = self.state_dim, self.control_dim
        aug = np.zeros((n + m + 1, n + m + 1))
        aug[:n, :n] = self.M
        aug[:n, n:n + m] = self.N
        aug[:n, -1] = self.c
        aug *= dt
        # Integrator chains are nilpotent; the truncated series is then exact.
        power = np.eye(n + m + 1)
        total = power.copy()
        for k in range(1, n + m + 2):
            power = power @ aug / k
            if not power.any():
                break
            total = total + power
        else:
            total = expm(aug)
        return total[:n, :n], total[:n, n:n + m], total[:n, -1]

    def state_bounds(self, workspace: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """State box: positions from ``workspace``, velocities from their bounds."""
        lo = np.full(self.state_dim, -np.inf)
        hi = np.full(self.state_dim, np.inf)
        for k, axis in enumerate(self.position_dims):
            lo[axis], hi[axis] = workspace[k]
        for axis, vmax in self.velocity_bounds.items():
            lo[axis], hi[axis] = -vmax, vmax
        return lo, hi

    def to_json(self) -> dict:
        return {"model": self.name, "params": dict(self.params)}


@dataclass
class BallControlModel(LinearBoxModel):
    """Linear model whose control set is a Euclidean ball of radius ``u_radius``.

    ``u_lo``/``u_hi`` hold the bounding box of the ball; the planner uses that
    box, the reach solver uses the ball.
    """

    u_radius: float = 1.0

    def hamiltonian(self, x: np.ndarray, p: np.ndarray, mode: Mode = "control_minimizes") -> np.ndarray:
        minimize = mode == "control_minimizes"
        drift = x @ self.M.T + self.c
        h = np.sum(p * drift, axis=-1)
        reach = self.u_radius * np.linalg.norm(p @ self.N, axis=-1)
        h = h - reach if minimize else h + reach
        if self.D.shape[1]:
            h = h + _box_extreme(p @ self.D, self.d_lo, self.d_hi, not minimize)
        return h

    def local_dissipation(self, x: np.ndarray, p_lo: np.ndarray, p_hi: np.ndarray) -> np.ndarray:
        # |d/dp_i (r |N^T p|)| <= r |q_i| / |q| maximised over the costate box.
        hi = np.maximum(np.abs(p_lo), np.abs(p_hi))
        lo = np.where((p_lo <= 0) & (p_hi >= 0), 0.0, np.minimum(np.abs(p_lo), np.abs(p_hi)))
        rest = np.sum(lo ** 2, axis=-1, keepdims=True) - lo ** 2
        den = np.sqrt(hi ** 2 + rest)
        frac = np.divide(hi, den, out=np.ones_like(hi), where=den > 0)
        dmag = np.maximum(np.abs(self.d_lo), np.abs(self.d_hi))
        return np.abs(x @ self.M.T + self.c) + self.u_radius * frac + np.abs(self.D) @ dmag


def single_integrator_2d_ball(v_max: float = 1.0, drift: Sequence[float] = (0.0, 0.0)) -> BallControlModel:
    """``xdot = u + drift`` with ``||u||_2 <= v_max``."""
    return BallControlModel(
        name="single_integrator_2d_ball",
        M=np.zeros((2, 2)), N=np.eye(2), u_lo=[-v_max] * 2, u_hi=[v_max] * 2,
        c=np.asarray(drift, dtype=float), position_dims=(0, 1),
        params={"v_max": v_max, "drift": list(map(float, drift))},
        u_radius=v_max,
    )


def single_integrator_2d(v_max: float = 1.0, d_max: float = 0.0,
                         drift: Sequence[float] = (0.0, 0.0)) -> LinearBoxModel:
    """``xdot = u + d + drift`` with ``|u_i| <= v_max`` and ``|d_i| <= d_max``."""
    eye = np.eye(2)
    return LinearBoxModel(
        name="single_integrator_2d",
        M=np.zeros((2, 2)), N=eye, u_lo=[-v_max] * 2, u_hi=[v_max] * 2,
        D=eye if d_max else None, d_lo=[-d_max] * 2 if d_max else None,
        d_hi=[d_max] * 2 if d_max else None,
        c=np.asarray(drift, dtype=float),
        position_dims=(0, 1),
        params={"v_max": v_max, "d_max": d_max, "drift": list(map(float, drift))},
    )


def single_integrator_1d(v_max: float = 1.0, d_max: float = 0.0) -> LinearBoxModel:
    """Scalar ``xdot = u + d``, ``|u| <= v_max``."""
    return LinearBoxModel(
        name="single_integrator_1d",
        M=np.zeros((1, 1)), N=np.ones((1, 1)), u_lo=[-v_max], u_hi=[v_max],
        D=np.ones((1, 1)) if d_max else None,
        d_lo=[-d_max] if d_max else None, d_hi=[d_max] if d_max else None,
        position_dims=(0,),
        params={"v_max": v_max, "d_max": d_max},
    )


def double_integrator_1d(a_max: float = 1.0, v_max: float = 1.0, d_max: float = 0.0) -> LinearBoxModel:
    """State ``(x, v)``: ``xdot = v``, ``vdot = u + d``, ``|u| <= a_max``."""
    return LinearBoxModel(
        name="double_integrator_1d",
        M=np.array([[0.0, 1.0], [0.0, 0.0]]), N=np.array([[0.0], [1.0]]),
        u_lo=[-a_max], u_hi=[a_max],
        D=np.array([[0.0], [1.0]]) if d_max else None,
        d_lo=[-d_max] if d_max else None, d_hi=[d_max] if d_max else None,
        position_dims=(0,), velocity_bounds={1: v_max},
        params={"a_max": a_max, "v_max": v_max, "d_max": d_max},
    )


def double_integrator_2d(a_max: float = 1.0, v_max: float = 1.0, d_max: float = 0.0) -> LinearBoxModel:
    """State ``(x, y, vx, vy)`` with per-axis acceleration and speed limits."""
    M = np.zeros((4, 4))
    M[0, 2] = M[1, 3] = 1.0
    N = np.zeros((4, 2))
    N[2, 0] = N[3, 1] = 1.0
    return LinearBoxModel(
        name="double_integrator_2d",
        M=M, N=N, u_lo=[-a_max] * 2, u_hi=[a_max] * 2,
        D=N.copy() if d_max else None,
        d_lo=[-d_max] * 2 if d_max else None, d_hi=[d_max] * 2 if d_max else None,
        position_dims=(0, 1), velocity_bounds={2: v_max, 3: v_max},
        params={"a_max": a_max, "v_max": v_max, "d_max": d_max},
    )


MODELS = {
    "single_integrator_1d": single_integrator_1d,
    "single_integrator_2d": single_integrator_2d,
    "single_integrator_2d_ball": single_integrator_2d_ball,
    "double_integrator_1d": double_integrator_1d,
    "double_integrator_2d": double_integrator_2d,
}


def make_model(name: str, params: dict | None = None) -> LinearBoxModel:
    try:
        factory = MODELS[name]
    except KeyError:
        raise ValueError(f"unknown dynamics model {name!r}; known: {sorted(MODELS)}") from None
    return factory(**(params or {}))


def hamiltonian_eval(model: LinearBoxModel, x: Sequence[float], p: Sequence[float],
                     mode: Mode = "control_minimizes") -> float:
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    if x.shape != (model.state_dim,) or p.shape != (model.state_dim,):
        raise DimensionMismatch(
            f"{model.name} expects state and costate of length {model.state_dim}, "
            f"got {x.shape} and {p.shape}"
        )
    return float(model.hamiltonian(x, p, mode))


def discrete_step(model: LinearBoxModel, x: Sequence[float], u: Sequence[float], dt: float,
                  tol: float = 1e-9) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    x = np.asarray(x, dtype=float)
    if u.shape != (model.control_dim,) or x.shape != (model.state_dim,):
        raise DimensionMismatch(f"{model.name}: bad state/control shapes {x.shape}, {u.shape}")
    if np.any(u < model.u_lo - tol) or np.any(u > model.u_hi + tol):
        raise ControlOutOfBounds(f"control {u.tolist()} outside [{model.u_lo.tolist()}, {model.u_hi.tolist()}]")
    A, B, c = model.discrete(dt)
    return A @ x + B @ u + c


__all__ = [
    "LinearBoxModel", "BallControlModel", "Mode", "single_integrator_2d",
    "single_integrator_1d", "single_integrator_2d_ball", "double_integrator_1d",
    "double_integrator_2d", "make_model", "hamiltonian_eval", "discrete_step",
    "MODELS",
]
