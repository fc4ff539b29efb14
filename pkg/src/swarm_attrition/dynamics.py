"""Attacker equations of motion, Bernstein defender trajectories and velocity-Verlet."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Callable, Union

import numpy as np

from .attrition import IndexSet
from .scenario import ScenarioConfig, SwarmState


class SingularPairError(ValueError):
    """Two interacting agents are (numerically) coincident."""


class IntegrationError(FloatingPointError):
    """The integrator produced non-finite values."""


SINGULAR_TOL = 1e-9  # relative to d0


# --- pair forces -----------------------------------------------------------

def pair_force_intra(r, config: ScenarioConfig):
    """Signed attacker-attacker force magnitude; positive is repulsive.

    Linear repulsion below ``d0``, a quadratic attractive well on
    ``(d0, d1]`` that vanishes at both ends, and zero beyond ``d1``.
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < SINGULAR_TOL * config.d0):
        raise SingularPairError("coincident attackers")
    g, d0, d1 = config.repulsion_gain_intra, config.d0, config.d1
    out = np.where(
        r_arr <= d0,
        g * (d0 - r_arr),
        np.where(r_arr <= d1, g * (d0 - r_arr) * (d1 - r_arr) / (d1 - d0), 0.0),
    )
    return float(out) if out.ndim == 0 else out


def pair_force_defender(r, config: ScenarioConfig):
    """Repulsive force magnitude an attacker feels from a defender at distance ``r``."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < SINGULAR_TOL * config.d0):
        raise SingularPairError("attacker coincident with defender")
    out = np.where(r_arr <= config.s0, config.repulsion_gain_def * (config.s0 - r_arr), 0.0)
    return float(out) if out.ndim == 0 else out


# --- interaction modes -----------------------------------------------------

@dataclass(frozen=True)
class Unweighted:
    pass


@dataclass(frozen=True)
class ProbabilityWeighted:
    """Source weights laid out as ``[attackers..., defenders...]`` (length N + M)."""

    weights: np.ndarray


@dataclass(frozen=True)
class IndexMasked:
    alive: IndexSet


InteractionMode = Union[Unweighted, ProbabilityWeighted, IndexMasked]


def _mode_weights(mode: InteractionMode, n: int, m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (attacker source weights, defender source weights, attacker target mask)."""
    if isinstance(mode, Unweighted):
        return np.ones(n), np.ones(m), np.ones(n, dtype=bool)
    if isinstance(mode, ProbabilityWeighted):
        w = np.asarray(mode.weights, dtype=float)
        if w.shape != (n + m,):
            raise ValueError(f"expected {n + m} weights, got shape {w.shape}")
        if w.size and (w.min() < 0.0 or w.max() > 1.0):
            raise ValueError("probability weights must lie in [0, 1]")
        return w[:n], w[n:], np.ones(n, dtype=bool)
    if isinstance(mode, IndexMasked):
        a = mode.alive
        if a.attackers.shape != (n,) or a.defenders.shape != (m,):
            raise ValueError("index set does not match agent counts")
        return a.attackers.astype(float), a.defenders.astype(float), a.attackers.copy()
    raise TypeError(f"unknown interaction mode {mode!r}")


def interaction_accelerations(
    attacker_pos: np.ndarray,
    defender_pos: np.ndarray,
    hvu_pos: np.ndarray,
    w_att: np.ndarray,
    w_def: np.ndarray,
    active: np.ndarray,
    config: ScenarioConfig,
) -> np.ndarray:
    """Position-dependent part of the attacker acceleration (everything but damping).

    Inactive targets get zero. A pair only counts, and is only checked for
    coincidence, when its source weight is non-zero.
    """
    n = attacker_pos.shape[0]
    acc = np.zeros((n, 3))
    tol = SINGULAR_TOL * config.d0
    act = active.astype(float)

    if n > 1:
        diff = attacker_pos[:, None, :] - attacker_pos[None, :, :]
        r2 = (diff * diff).sum(axis=2)
        # any self-distance beyond d1 contributes exactly zero force
        np.fill_diagonal(r2, 4.0 * config.d1 * config.d1)
        r = np.sqrt(r2)
        w = act[:, None] * w_att[None, :]
        if r.min() < tol and np.any((r < tol) & (w > 0)):
            raise SingularPairError("coincident attackers")
        d0, d1 = config.d0, config.d1
        # same piecewise form as pair_force_intra: the clip is 1 below d0 and 0 beyond d1
        f = config.repulsion_gain_intra * (d0 - r) * np.clip((d1 - r) / (d1 - d0), 0.0, 1.0)
        acc += np.einsum("ij,ijk->ik", w * f / r, diff)

    if defender_pos.shape[0] and n:
        diff = attacker_pos[:, None, :] - defender_pos[None, :, :]
        r = np.sqrt((diff * diff).sum(axis=2))
        w = act[:, None] * w_def[None, :]
        if r.min() < tol:
            near = r < tol
            if np.any(near & (w > 0)):
                raise SingularPairError("attacker coincident with defender")
            r = np.where(near, np.inf, r)
        f = config.repulsion_gain_def * np.maximum(config.s0 - r, 0.0)
        acc += np.einsum("ij,ijk->ik", w * f / r, diff)

    h = hvu_pos - attacker_pos
    hn = np.sqrt((h * h).sum(axis=1))
    # leader term is zero for an attacker sitting on the HVU
    scale = np.divide(config.leader_gain * act, hn, out=np.zeros(n), where=hn > 0)
    acc += scale[:, None] * h
    return acc


def attacker_accelerations(state: SwarmState, mode: InteractionMode, config: ScenarioConfig) -> np.ndarray:
    """Full attacker acceleration: pair forces, leader pull toward the HVU and damping."""
    w_att, w_def, active = _mode_weights(mode, state.n_attackers, state.n_defenders)
    acc = interaction_accelerations(
        state.attacker_pos, state.defender_pos, state.hvu_pos, w_att, w_def, active, config
    )
    acc -= config.damping * state.attacker_vel * active[:, None]
    return acc


# --- Bernstein trajectories ------------------------------------------------

@dataclass(frozen=True)
class TrajectoryParams:
    """Bernstein control points, shape ``(M, 3, degree + 1)``, over ``[0, horizon]``."""

    control_points: np.ndarray
    horizon: float

    def __post_init__(self) -> None:
        cp = np.asarray(self.control_points, dtype=float)
        if cp.ndim != 3 or cp.shape[1] != 3 or cp.shape[2] < 2:
            raise ValueError(f"control points must have shape (M, 3, n+1) with n >= 1, got {cp.shape}")
        if not np.all(np.isfinite(cp)):
            raise ValueError("control points must be finite")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        object.__setattr__(self, "control_points", cp)

    @property
    def degree(self) -> int:
        return self.control_points.shape[2] - 1

    @property
    def n_defenders(self) -> int:
        return self.control_points.shape[0]

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "degree": self.degree,
            "defenders": {
                str(k): {axis: self.control_points[k, j].tolist() for j, axis in enumerate("xyz")}
                for k in range(self.n_defenders)
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrajectoryParams":
        defenders = data["defenders"]
        m = len(defenders)
        degree = int(data["degree"])
        cp = np.empty((m, 3, degree + 1))
        for k in range(m):
            entry = defenders[str(k)]
            for j, axis in enumerate("xyz"):
                pts = entry[axis]
                if len(pts) != degree + 1:
                    raise ValueError(f"defender {k} axis {axis}: expected {degree + 1} control points")
                cp[k, j] = pts
        return cls(cp, float(data["horizon"]))


def bernstein_basis(degree: int, u) -> np.ndarray:
    """Basis values ``B_{m,n}(u)`` with shape ``u.shape + (degree + 1,)``."""
    u = np.asarray(u, dtype=float)[..., None]
    m = np.arange(degree + 1)
    coeff = np.array([comb(degree, i) for i in m], dtype=float)
    return coeff * u**m * (1.0 - u) ** (degree - m)


def _derivative_points(cp: np.ndarray, order: int, horizon: float) -> np.ndarray:
    """Control points of the ``order``-th time derivative (hodograph recurrence)."""
    n = cp.shape[-1] - 1
    for _ in range(order):
        if n == 0:
            return np.zeros(cp.shape[:-1] + (1,))
        cp = n * np.diff(cp, axis=-1) / horizon
        n -= 1
    return cp


def _check_time(t, horizon: float) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    # tolerate round-off from accumulating dt
    eps = 1e-9 * horizon
    if np.any(t < -eps) or np.any(t > horizon + eps):
        raise ValueError(f"time outside trajectory horizon [0, {horizon}]")
    return np.clip(t, 0.0, horizon)


def defender_path(params: TrajectoryParams, times, order: int = 0) -> np.ndarray:
    """Evaluate every defender (or a derivative) at ``times``: shape ``times.shape + (M, 3)``."""
    t = _check_time(times, params.horizon)
    cp = _derivative_points(params.control_points, order, params.horizon)
    basis = bernstein_basis(cp.shape[-1] - 1, t / params.horizon)
    return np.einsum("...m,kjm->...kj", basis, cp)


def bernstein_position(params: TrajectoryParams, k: int, t: float) -> np.ndarray:
    return defender_path(params, t)[k]


def bernstein_velocity(params: TrajectoryParams, k: int, t: float) -> np.ndarray:
    return defender_path(params, t, order=1)[k]


def bernstein_acceleration(params: TrajectoryParams, k: int, t: float) -> np.ndarray:
    return defender_path(params, t, order=2)[k]


# --- time integration ------------------------------------------------------

AccelProvider = Callable[[SwarmState], np.ndarray]
DefenderMotion = Callable[[float], "tuple[np.ndarray, np.ndarray]"]


def verlet_step(
    state: SwarmState,
    accel_provider: AccelProvider,
    dt: float,
    *,
    damping: float = 0.0,
    defenders: TrajectoryParams | DefenderMotion | None = None,
) -> SwarmState:
    """Advance attackers one velocity-Verlet step.

    ``accel_provider`` returns the position-dependent acceleration. Linear
    damping ``-damping * v`` is folded in implicitly in the velocity half
    step, which keeps the scheme second order and makes a damping-only step
    contract the speed. Defenders are kinematic: their position and velocity
    at ``t + dt`` come from ``defenders`` (Bernstein params or a callable);
    with ``None`` they coast at constant velocity.
    """
    x, v = state.attacker_pos, state.attacker_vel
    t1 = state.time + dt
    a0 = accel_provider(state) - damping * v
    x1 = x + v * dt + 0.5 * dt * dt * a0

    if defenders is None:
        dpos, dvel = state.defender_pos + dt * state.defender_vel, state.defender_vel
    elif isinstance(defenders, TrajectoryParams):
        dpos = defender_path(defenders, t1)
        dvel = defender_path(defenders, t1, order=1)
    else:
        dpos, dvel = defenders(t1)

    moved = SwarmState(x1, v, dpos, dvel, state.hvu_pos, t1)
    a1 = accel_provider(moved)
    half = 0.5 * damping * dt
    v1 = (v * (1.0 - half) + 0.5 * dt * (a0 + damping * v + a1)) / (1.0 + half)
    if not (np.all(np.isfinite(x1)) and np.all(np.isfinite(v1))):
        raise IntegrationError(f"non-finite attacker state at t={t1:g}")
    return SwarmState(x1, v1, dpos, dvel, state.hvu_pos, t1)
