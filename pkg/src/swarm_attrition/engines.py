"""One engagement simulation under each modeling framework.

Within a step the order is fixed and shared by every engine:

1. attrition rates from the current positions,
2. survival-probability update,
3. index-set update (P0 random removal, P3 threshold),
4. accelerations with the updated weights or mask,
5. one velocity-Verlet step.

So Q at step k+1 depends only on positions at step k, and an agent removed
at step k exerts no force during that step's motion update.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .attrition import (
    IndexSet,
    SurvivalVector,
    _apply_factors,
    attrition_rates,
    removal_by_ratio,
    survival_factors,
    threshold_index_update,
)
from .dynamics import TrajectoryParams, defender_path, interaction_accelerations, verlet_step
from .scenario import ScenarioConfig, SwarmState, initial_state, validate

STEP_ORDER = (
    "attrition_rates",
    "survival_step",
    "index_update",
    "accelerations",
    "verlet_step",
)


def step_order() -> tuple[str, ...]:
    return STEP_ORDER


class EngineKind(Enum):
    P0 = "p0"  # stochastic index-set dynamics, one realization
    P1 = "p1"  # decoupled: Q never feeds back into motion
    P2 = "p2"  # forces weighted by survival probability
    P3 = "p3"  # agents below the threshold stop interacting

    @classmethod
    def parse(cls, name: "str | EngineKind") -> "EngineKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ValueError(f"unknown engine {name!r}; expected one of p0, p1, p2, p3") from None


class EngineError(RuntimeError):
    def __init__(self, step: int, cause: Exception):
        super().__init__(f"step {step}: {type(cause).__name__}: {cause}")
        self.step = step


@dataclass
class SimResult:
    engine: EngineKind
    seed: object
    steps: np.ndarray  # recorded step indices
    times: np.ndarray
    q_hvu: np.ndarray
    q_attackers: np.ndarray
    q_defenders: np.ndarray
    attacker_pos: np.ndarray | None
    attacker_vel: np.ndarray | None
    defender_pos: np.ndarray | None
    defender_vel: np.ndarray | None
    hvu_pos: np.ndarray
    alive_hvu: np.ndarray | None = None
    alive_attackers: np.ndarray | None = None
    alive_defenders: np.ndarray | None = None
    terminal_cost: float = 0.0
    hvu_destroyed: bool | None = None
    step_of_destruction: int | None = None
    omega_draws: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.steps)

    def survival(self, i: int) -> SurvivalVector:
        return SurvivalVector(float(self.q_hvu[i]), self.q_attackers[i], self.q_defenders[i])

    def index_set(self, i: int) -> IndexSet | None:
        if self.alive_attackers is None:
            return None
        return IndexSet(bool(self.alive_hvu[i]), self.alive_attackers[i], self.alive_defenders[i])

    def state(self, i: int) -> SwarmState:
        if self.attacker_pos is None:
            raise ValueError("positions were not recorded for this run")
        return SwarmState(
            self.attacker_pos[i], self.attacker_vel[i], self.defender_pos[i],
            self.defender_vel[i], self.hvu_pos, float(self.times[i]),
        )


def _check_trajectories(config: ScenarioConfig, traj: TrajectoryParams) -> None:
    if traj.n_defenders != config.n_defenders:
        raise ValueError(
            f"trajectories describe {traj.n_defenders} defenders, config has {config.n_defenders}"
        )
    if not np.isclose(traj.horizon, config.t_final, rtol=1e-12, atol=0.0):
        raise ValueError(f"trajectory horizon {traj.horizon} does not match t_f = {config.t_final}")


def run(
    config: ScenarioConfig,
    trajectories: TrajectoryParams,
    engine: EngineKind | str,
    seed: int | Sequence[int] | None = None,
    *,
    initial: SwarmState | None = None,
    record_every: int = 1,
    record_positions: bool = True,
) -> SimResult:
    """Simulate one engagement.

    Attackers start from ``initial`` (default: the configured layout);
    defenders follow ``trajectories`` exactly, so their layout positions are
    ignored. ``seed`` is required for P0 and ignored otherwise.
    """
    engine = EngineKind.parse(engine)
    validate(config)
    _check_trajectories(config, trajectories)
    if engine is EngineKind.P0 and seed is None:
        raise ValueError("the P0 engine needs a seed")
    if record_every < 1:
        raise ValueError("record_every must be >= 1")

    n, m, dt = config.n_attackers, config.n_defenders, config.dt
    steps_total = config.n_steps
    grid = np.arange(steps_total + 1) * dt
    d_pos = defender_path(trajectories, grid)
    d_vel = defender_path(trajectories, grid, order=1)

    s0 = initial if initial is not None else initial_state(config)
    s0.check(config)
    state = SwarmState(s0.attacker_pos.copy(), s0.attacker_vel.copy(), d_pos[0], d_vel[0], s0.hvu_pos, 0.0)

    q = SurvivalVector.ones(n, m)
    alive = IndexSet.full(n, m)
    masked = engine in (EngineKind.P0, EngineKind.P3)
    rng = np.random.default_rng(seed) if engine is EngineKind.P0 else None
    frozen_def = d_pos[0].copy()  # last position of each defender while alive

    rec: dict[str, list] = {k: [] for k in (
        "steps", "q_hvu", "q_att", "q_def", "xa", "va", "xd", "vd", "ah", "aa", "ad")}

    def record(k: int) -> None:
        rec["steps"].append(k)
        rec["q_hvu"].append(q.hvu)
        rec["q_att"].append(q.attackers)
        rec["q_def"].append(q.defenders)
        if record_positions:
            rec["xa"].append(state.attacker_pos)
            rec["va"].append(state.attacker_vel)
            rec["xd"].append(state.defender_pos)
            rec["vd"].append(state.defender_vel)
        if masked:
            rec["ah"].append(alive.hvu)
            rec["aa"].append(alive.attackers)
            rec["ad"].append(alive.defenders)

    record(0)
    destroyed_at: int | None = None
    draws = 0

    for k in range(steps_total):
        try:
            rates = attrition_rates(state, config)
            if masked:
                w_att = alive.attackers.astype(float)
                w_def = alive.defenders.astype(float)
            else:
                w_att, w_def = q.attackers, q.defenders
            factors = survival_factors(rates, w_att, w_def, dt)

            if engine is EngineKind.P0:
                q_new = _apply_factors(q, factors, alive)
                omega = rng.random(1 + n + m)
                draws += omega.size
                # the one-step factor is exactly Q(t+1)/Q(t) for an alive agent
                alive_new = removal_by_ratio(alive, factors, omega)
            elif engine is EngineKind.P3:
                # the HVU's own Q keeps integrating: it is the cost, and it deals no damage
                q_new = _apply_factors(q, factors, IndexSet(True, alive.attackers, alive.defenders))
                alive_new = threshold_index_update(alive, q_new, config.threshold)
            else:
                q_new = _apply_factors(q, factors, None)
                alive_new = alive

            if engine is EngineKind.P1:
                src_att, src_def, active = np.ones(n), np.ones(m), np.ones(n, dtype=bool)
            elif engine is EngineKind.P2:
                src_att, src_def, active = q_new.attackers, q_new.defenders, np.ones(n, dtype=bool)
            else:
                src_att = alive_new.attackers.astype(float)
                src_def = alive_new.defenders.astype(float)
                active = alive_new.attackers

            if masked:
                # removed attackers freeze in place; removed defenders stop where they were
                att_vel = np.where(active[:, None], state.attacker_vel, 0.0)
                state = SwarmState(state.attacker_pos, att_vel, state.defender_pos,
                                   state.defender_vel, state.hvu_pos, state.time)

            def provider(s: SwarmState, _wa=src_att, _wd=src_def, _act=active) -> np.ndarray:
                return interaction_accelerations(
                    s.attacker_pos, s.defender_pos, s.hvu_pos, _wa, _wd, _act, config)

            if masked:
                frozen_def = np.where(alive.defenders[:, None], state.defender_pos, frozen_def)
                dead = ~alive_new.defenders[:, None]
                nxt_pos = np.where(dead, frozen_def, d_pos[k + 1])
                nxt_vel = np.where(dead, 0.0, d_vel[k + 1])
            else:
                nxt_pos, nxt_vel = d_pos[k + 1], d_vel[k + 1]

            state = verlet_step(state, provider, dt, damping=config.damping,
                                defenders=lambda _t, p=nxt_pos, v=nxt_vel: (p, v))
        except (ValueError, ArithmeticError) as exc:
            raise EngineError(k, exc) from exc

        q, alive = q_new, alive_new
        if engine is EngineKind.P0 and not alive.hvu:
            destroyed_at = k + 1
            record(k + 1)
            break
        if (k + 1) % record_every == 0 or k + 1 == steps_total:
            record(k + 1)

    steps = np.asarray(rec["steps"], dtype=int)

    def stack(key: str):
        return np.asarray(rec[key]) if rec[key] else None

    if engine is EngineKind.P0:
        cost = 1.0 if destroyed_at is not None else 0.0
    else:
        cost = float(min(1.0, max(0.0, 1.0 - q.hvu)))

    return SimResult(
        engine=engine,
        seed=seed if engine is EngineKind.P0 else None,
        steps=steps,
        times=steps * dt,
        q_hvu=np.asarray(rec["q_hvu"], dtype=float),
        q_attackers=np.asarray(rec["q_att"], dtype=float).reshape(len(steps), n),
        q_defenders=np.asarray(rec["q_def"], dtype=float).reshape(len(steps), m),
        attacker_pos=stack("xa"),
        attacker_vel=stack("va"),
        defender_pos=stack("xd"),
        defender_vel=stack("vd"),
        hvu_pos=np.asarray(config.hvu_position, dtype=float),
        alive_hvu=np.asarray(rec["ah"], dtype=bool) if masked else None,
        alive_attackers=np.asarray(rec["aa"], dtype=bool).reshape(len(steps), n) if masked else None,
        alive_defenders=np.asarray(rec["ad"], dtype=bool).reshape(len(steps), m) if masked else None,
        terminal_cost=cost,
        hvu_destroyed=(destroyed_at is not None) if engine is EngineKind.P0 else None,
        step_of_destruction=destroyed_at,
        omega_draws=draws,
    )
