"""Direct-method defender trajectory optimization over Bernstein control points."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import TrajectoryParams, defender_path
from .engines import EngineError, EngineKind, run
from .scenario import ScenarioConfig, SwarmState, initial_state

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EndpointConstraint:
    """Fixed defender start: ``c0 = positions``, ``c1 = positions + velocities * t_f / n``."""

    positions: np.ndarray
    velocities: np.ndarray


@dataclass(frozen=True)
class ObjectiveSpec:
    engine: EngineKind = EngineKind.P1
    penalty_weight: float = 1.0
    endpoint_constraint: EndpointConstraint | None = None

    def __post_init__(self) -> None:
        eng = EngineKind.parse(self.engine)
        if eng is EngineKind.P0:
            raise ValueError("the stochastic P0 engine cannot be optimized directly")
        if self.penalty_weight < 0:
            raise ValueError("penalty_weight must be >= 0")
        object.__setattr__(self, "engine", eng)


@dataclass
class OptimizationResult:
    best_params: TrajectoryParams
    best_cost: float
    history: list  # (evaluation index, cost) for every evaluation
    evaluations: int
    feasible: bool = True
    start_costs: dict = field(default_factory=dict)

    def running_best(self) -> np.ndarray:
        return np.minimum.accumulate([c for _, c in self.history])


def pin_endpoints(params: TrajectoryParams, constraint: EndpointConstraint | None) -> TrajectoryParams:
    if constraint is None:
        return params
    cp = params.control_points.copy()
    n = params.degree
    cp[:, :, 0] = constraint.positions
    if n >= 2:
        # c1 only carries the start velocity when it is not also the end point
        cp[:, :, 1] = constraint.positions + constraint.velocities * params.horizon / n
    return TrajectoryParams(cp, params.horizon)


def control_penalty(params: TrajectoryParams, config: ScenarioConfig) -> float:
    """``sum over grid times and axes of max(0, |accel| - u_max)^2 * dt`` (unweighted)."""
    grid = np.arange(config.n_steps + 1) * config.dt
    acc = defender_path(params, grid, order=2)
    excess = np.maximum(np.abs(acc) - config.u_max, 0.0)
    return float(np.sum(excess * excess) * config.dt)


def _evaluate(params, spec, config, initial) -> tuple[float, float]:
    params = pin_endpoints(params, spec.endpoint_constraint)
    penalty = spec.penalty_weight * control_penalty(params, config)
    try:
        res = run(config, params, spec.engine, initial=initial, record_positions=False)
    except EngineError as exc:
        log.warning("objective evaluation failed: %s", exc)
        return math.inf, penalty
    return res.terminal_cost + penalty, penalty


def objective(
    params: TrajectoryParams,
    spec: ObjectiveSpec,
    config: ScenarioConfig,
    initial: SwarmState | None = None,
) -> float:
    """Terminal HVU destruction probability plus the control-bound penalty.

    A failed simulation returns ``inf`` and logs the reason.
    """
    return _evaluate(params, spec, config, initial)[0]


def baseline_stationary(config: ScenarioConfig, initial: SwarmState | None = None) -> TrajectoryParams:
    """Defenders hold their initial positions for the whole engagement."""
    if initial is None:
        initial = initial_state(config)
    cp = np.repeat(initial.defender_pos[:, :, None], config.bernstein_degree + 1, axis=2)
    return TrajectoryParams(cp, config.t_final)


def radial_intercept(
    config: ScenarioConfig,
    initial: SwarmState | None = None,
    fraction: float = 0.5,
) -> TrajectoryParams:
    """Defenders drift from rest toward the attacker centroid.

    Each defender covers ``fraction`` of the distance to the centroid along a
    smooth ramp; the fraction is halved until the path respects ``u_max``.
    """
    if initial is None:
        initial = initial_state(config)
    n = config.bernstein_degree
    p0 = initial.defender_pos
    target = initial.attacker_pos.mean(axis=0)
    ramp = np.zeros(n + 1)
    if n >= 2:
        ramp[1:] = np.arange(n) / (n - 1)
    else:
        ramp[1] = 1.0
    for _ in range(20):
        offset = fraction * (target - p0)
        cp = p0[:, :, None] + offset[:, :, None] * ramp[None, None, :]
        params = TrajectoryParams(cp, config.t_final)
        if control_penalty(params, config) == 0.0:
            return params
        fraction *= 0.5
    return baseline_stationary(config, initial)


class _Budget(Exception):
    pass


def optimize(
    spec: ObjectiveSpec,
    config: ScenarioConfig,
    budget: int,
    seed: int,
    *,
    initial: SwarmState | None = None,
    n_perturbed: int = 2,
    initial_step: float | None = None,
    min_step: float = 1e-3,
) -> OptimizationResult:
    """Multi-start compass search over the free control points.

    Starts, in order: stationary baseline, radial intercept, then
    ``n_perturbed`` seeded perturbations of the baseline. The best start is
    refined by polling, at the current step size, first whole-defender ramp
    moves along each axis and then single control points; an unsuccessful
    poll halves the step. Deterministic in ``(spec, config, budget, seed)``.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if initial is None:
        initial = initial_state(config)
    rng = np.random.default_rng(seed)
    m, n = config.n_defenders, config.bernstein_degree
    if spec.endpoint_constraint is None:
        spec = ObjectiveSpec(
            spec.engine, spec.penalty_weight,
            EndpointConstraint(initial.defender_pos.copy(), np.zeros((m, 3))),
        )
    step = initial_step if initial_step is not None else 0.25 * config.layout.defender_radius

    first_free = 2 if n >= 2 else 1
    history: list[tuple[int, float]] = []
    best = {"cost": math.inf, "params": None, "penalty": math.inf}

    def evaluate(params: TrajectoryParams) -> float:
        if len(history) >= budget:
            raise _Budget
        params = pin_endpoints(params, spec.endpoint_constraint)
        cost, penalty = _evaluate(params, spec, config, initial)
        history.append((len(history), cost))
        if cost < best["cost"]:
            best.update(cost=cost, params=params, penalty=penalty)
        return cost

    base = baseline_stationary(config, initial)
    starts = {"baseline_stationary": base, "radial_intercept": radial_intercept(config, initial)}
    for i in range(n_perturbed):
        cp = base.control_points.copy()
        cp[:, :, first_free:] += rng.normal(0.0, 0.5 * step, size=cp[:, :, first_free:].shape)
        starts[f"perturbed_{i}"] = TrajectoryParams(cp, config.t_final)

    start_costs: dict[str, float] = {}
    try:
        for name, params in starts.items():
            start_costs[name] = evaluate(params)

        x = best["params"].control_points.copy()
        fx = best["cost"]
        ramp = np.zeros(n + 1)
        ramp[first_free:] = np.arange(1, n + 2 - first_free) / (n + 1 - first_free)
        blocks = [(k, j) for k in range(m) for j in range(3)]
        coords = [(k, j, c) for k in range(m) for j in range(3) for c in range(first_free, n + 1)]

        def poll(directions, make) -> bool:
            nonlocal x, fx
            improved = False
            for idx in rng.permutation(len(directions)):
                for sign in (1.0, -1.0):
                    cand = x.copy()
                    make(cand, directions[idx], sign * step)
                    c = evaluate(TrajectoryParams(cand, config.t_final))
                    if c < fx:
                        x, fx = best["params"].control_points.copy(), c
                        improved = True
                        break
            return improved

        def move_block(cp, d, h):
            k, j = d
            cp[k, j] += h * ramp

        def move_coord(cp, d, h):
            k, j, c = d
            cp[k, j, c] += h

        while step >= min_step and m > 0:
            if poll(blocks, move_block):
                continue
            if poll(coords, move_coord):
                continue
            step *= 0.5
    except _Budget:
        pass

    return OptimizationResult(
        best_params=best["params"],
        best_cost=best["cost"],
        history=history,
        evaluations=len(history),
        feasible=bool(math.isfinite(best["cost"]) and best["penalty"] == 0.0),
        start_costs=start_costs,
    )
