"""P0 ensembles and engine-versus-Monte-Carlo comparison."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import TrajectoryParams
from .engines import EngineError, EngineKind, run
from .scenario import ScenarioConfig, SwarmState, initial_state


class EnsembleError(RuntimeError):
    def __init__(self, run_index: int, cause: Exception):
        super().__init__(f"run {run_index}: {cause}")
        self.run_index = run_index


def run_seed(master_seed: int, index: int) -> list[int]:
    """Entropy for run ``index``; distinct indices give distinct seed sequences."""
    return [int(master_seed), int(index)]


@dataclass
class EnsembleSummary:
    runs: int
    master_seed: int
    times: np.ndarray
    hvu_destruction_frequency: float
    hvu_destruction_stderr: float
    mean_attacker_survival_curve: np.ndarray
    mean_defender_survival_curve: np.ndarray
    mean_hvu_survival_curve: np.ndarray
    destroyed: np.ndarray  # per-run flag, in run-index order
    destruction_steps: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "runs": self.runs,
            "master_seed": self.master_seed,
            "run_seeds": "[master_seed, run_index]",
            "hvu_destruction_frequency": self.hvu_destruction_frequency,
            "hvu_destruction_stderr": self.hvu_destruction_stderr,
            "hvu_survival_final": float(self.mean_hvu_survival_curve[-1]),
            "destroyed_runs": int(self.destroyed.sum()),
        }


def _alive_fraction(mask: np.ndarray) -> np.ndarray:
    # no agents of a kind means nothing was lost
    if mask.shape[1] == 0:
        return np.ones(mask.shape[0])
    return mask.sum(axis=1) / mask.shape[1]


def _hold_last(series: np.ndarray, length: int) -> np.ndarray:
    if len(series) == length:
        return series
    out = np.empty(length, dtype=series.dtype)
    out[: len(series)] = series
    out[len(series):] = series[-1]
    return out


def _one_run(args) -> tuple[np.ndarray, np.ndarray, np.ndarray, bool, int | None]:
    config, trajectories, initial, master_seed, index = args
    try:
        res = run(config, trajectories, EngineKind.P0, run_seed(master_seed, index),
                  initial=initial, record_positions=False)
    except EngineError as exc:
        raise EnsembleError(index, exc) from exc
    length = config.n_steps + 1
    return (
        _hold_last(_alive_fraction(res.alive_attackers), length),
        _hold_last(_alive_fraction(res.alive_defenders), length),
        _hold_last(res.alive_hvu.astype(np.int64), length),
        bool(res.hvu_destroyed),
        res.step_of_destruction,
    )


def run_ensemble(
    config: ScenarioConfig,
    trajectories: TrajectoryParams,
    runs: int,
    master_seed: int,
    *,
    initial: SwarmState | None = None,
    workers: int = 1,
) -> EnsembleSummary:
    """Run ``runs`` independent P0 realizations and average them.

    A run that ends early (HVU destroyed) holds its last alive fractions to
    the end of the horizon. Aggregation is an ordered sum over run index, so
    the summary does not depend on ``workers``.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    if initial is None:
        initial = initial_state(config)
    jobs = [(config, trajectories, initial, master_seed, i) for i in range(runs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_one_run, jobs, chunksize=max(1, runs // (4 * workers))))
    else:
        outcomes = [_one_run(j) for j in jobs]

    length = config.n_steps + 1
    att = np.zeros(length)
    dfd = np.zeros(length)
    hvu = np.zeros(length, dtype=np.int64)
    destroyed = np.zeros(runs, dtype=bool)
    steps = []
    for i, (a, d, h, dead, step) in enumerate(outcomes):
        att += a
        dfd += d
        hvu += h
        destroyed[i] = dead
        steps.append(step)

    count = int(destroyed.sum())
    p = count / runs
    return EnsembleSummary(
        runs=runs,
        master_seed=master_seed,
        times=np.arange(length) * config.dt,
        hvu_destruction_frequency=p,
        hvu_destruction_stderr=math.sqrt(p * (1.0 - p) / runs),
        mean_attacker_survival_curve=att / runs,
        mean_defender_survival_curve=dfd / runs,
        mean_hvu_survival_curve=hvu / runs,
        destroyed=destroyed,
        destruction_steps=steps,
    )


CURVE_KINDS = ("attackers", "defenders", "hvu")


@dataclass
class ComparisonReport:
    times: np.ndarray
    curves: dict  # framework name -> {"attackers"|"defenders"|"hvu": curve}
    ensemble: EnsembleSummary
    deltas: dict  # |terminal HVU survival - P0 empirical|
    linf: dict  # framework -> kind -> sup-norm distance to the P0 curve

    @property
    def runs(self) -> int:
        return self.ensemble.runs

    def to_dict(self) -> dict:
        p0_final = float(self.ensemble.mean_hvu_survival_curve[-1])
        se = self.ensemble.hvu_destruction_stderr
        return {
            "runs": self.runs,
            "master_seed": self.ensemble.master_seed,
            "p0_hvu_survival": p0_final,
            "p0_hvu_survival_stderr": se,
            "p0_hvu_survival_ci95": [max(0.0, p0_final - 1.96 * se), min(1.0, p0_final + 1.96 * se)],
            "terminal_hvu_survival": {k: float(v["hvu"][-1]) for k, v in self.curves.items()},
            "delta": dict(self.deltas),
            "linf": {k: dict(v) for k, v in self.linf.items()},
        }


def _smooth_curves(config, trajectories, engine, initial) -> dict:
    res = run(config, trajectories, engine, initial=initial, record_positions=False)
    q_att = res.q_attackers.mean(axis=1) if config.n_attackers else np.ones(len(res))
    q_def = res.q_defenders.mean(axis=1) if config.n_defenders else np.ones(len(res))
    return {"attackers": q_att, "defenders": q_def, "hvu": res.q_hvu}


def compare_engines(
    config: ScenarioConfig,
    trajectories: TrajectoryParams,
    runs: int,
    master_seed: int,
    *,
    initial: SwarmState | None = None,
    workers: int = 1,
) -> ComparisonReport:
    """Run P1, P2, P3 once and a P0 ensemble on the same defender trajectories."""
    if initial is None:
        initial = initial_state(config)
    ens = run_ensemble(config, trajectories, runs, master_seed, initial=initial, workers=workers)
    curves = {
        "p0": {
            "attackers": ens.mean_attacker_survival_curve,
            "defenders": ens.mean_defender_survival_curve,
            "hvu": ens.mean_hvu_survival_curve,
        }
    }
    for eng in (EngineKind.P1, EngineKind.P2, EngineKind.P3):
        curves[eng.value] = _smooth_curves(config, trajectories, eng, initial)

    ref = curves["p0"]
    deltas = {}
    linf = {}
    for name in ("p1", "p2", "p3"):
        deltas[name] = abs(float(curves[name]["hvu"][-1]) - float(ref["hvu"][-1]))
        linf[name] = {k: float(np.max(np.abs(curves[name][k] - ref[k]))) for k in CURVE_KINDS}
    return ComparisonReport(ens.times, curves, ens, deltas, linf)
