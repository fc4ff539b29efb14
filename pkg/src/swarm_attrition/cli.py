"""Command-line driver: simulate, optimize, montecarlo, compare.

Every command writes CSV time series and a JSON summary into ``--out``.
Summaries embed the fully resolved config and every seed, and contain no
timestamps, so identical invocations produce byte-identical files.
``--figures`` additionally renders PNG plots next to the data.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import TrajectoryParams
from .engines import EngineError, EngineKind, run
from .montecarlo import EnsembleError, compare_engines, run_ensemble
from .optimizer import ObjectiveSpec, baseline_stationary, optimize
from .scenario import ScenarioConfig, initial_state, load_config

log = logging.getLogger("swarm_attrition")


# --- I/O helpers -----------------------------------------------------------

def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_csv(path: Path, header: list[str], rows) -> None:
    # floats go through repr, so values round-trip exactly
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def load_trajectories(path: str | Path) -> TrajectoryParams:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise FileNotFoundError(f"trajectory file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc})") from None
    try:
        return TrajectoryParams.from_dict(data)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{path}: malformed trajectory file ({exc!r})") from None


def _provenance(config: ScenarioConfig, **seeds) -> dict:
    return {"version": __version__, "config": config.to_dict(), "seeds": {"layout": config.layout.seed, **seeds}}


def _time_rows(times: np.ndarray, columns: list[np.ndarray]):
    for i, t in enumerate(times):
        yield [float(t)] + [float(c[i]) for c in columns]


# --- commands --------------------------------------------------------------

def simulation_table(res) -> tuple[list[str], list[list]]:
    """Per-step rows: step, time, HVU Q (and alive flag), then each agent's
    position, Q and (for P0/P3) alive flag."""
    masked = res.alive_attackers is not None
    header = ["step", "time", "hvu_q"] + (["hvu_alive"] if masked else [])
    n = res.q_attackers.shape[1]
    m = res.q_defenders.shape[1]
    for prefix, count in (("a", n), ("d", m)):
        for i in range(count):
            header += [f"{prefix}{i}_x", f"{prefix}{i}_y", f"{prefix}{i}_z", f"{prefix}{i}_q"]
            if masked:
                header.append(f"{prefix}{i}_alive")
    rows = []
    for r, step in enumerate(res.steps):
        row = [int(step), float(res.times[r]), float(res.q_hvu[r])]
        if masked:
            row.append(int(res.alive_hvu[r]))
        for pos, q, alive in ((res.attacker_pos, res.q_attackers, res.alive_attackers),
                              (res.defender_pos, res.q_defenders, res.alive_defenders)):
            for i in range(q.shape[1]):
                row += [float(pos[r, i, 0]), float(pos[r, i, 1]), float(pos[r, i, 2]), float(q[r, i])]
                if masked:
                    row.append(int(alive[r, i]))
        rows.append(row)
    return header, rows


def cmd_simulate(args) -> int:
    config = load_config(args.config)
    engine = EngineKind.parse(args.engine)
    init = initial_state(config)
    if args.trajectories:
        traj = load_trajectories(args.trajectories)
        source = str(args.trajectories)
    else:
        traj = baseline_stationary(config, init)
        source = "baseline"
    res = run(config, traj, engine, seed=args.seed, initial=init, record_every=args.record_every)
    out = _out_dir(args.out)
    header, rows = simulation_table(res)
    write_csv(out / "simulation.csv", header, rows)
    summary = {
        "command": "simulate",
        "engine": engine.value,
        "trajectories": source,
        "terminal_cost": res.terminal_cost,
        "terminal_hvu_survival": float(res.q_hvu[-1]),
        "steps_recorded": len(res),
        **_provenance(config, engine=args.seed),
    }
    if engine is EngineKind.P0:
        summary["hvu_destroyed"] = res.hvu_destroyed
        summary["step_of_destruction"] = res.step_of_destruction
    write_json(out / "summary.json", summary)
    if args.figures:
        from .plotting import plot_engagement

        plot_engagement(res, out / "engagement.png")
    return 0


def cmd_optimize(args) -> int:
    config = load_config(args.config)
    spec = ObjectiveSpec(EngineKind.parse(args.engine), args.penalty_weight)
    init = initial_state(config)
    result = optimize(spec, config, args.budget, args.seed, initial=init)
    out = _out_dir(args.out)
    write_json(out / "trajectories.json", result.best_params.to_dict())
    best = result.running_best()
    write_csv(out / "history.csv", ["evaluation", "cost", "best_cost"],
              ([i, float(c), float(b)] for (i, c), b in zip(result.history, best)))
    write_json(out / "summary.json", {
        "command": "optimize",
        "engine": spec.engine.value,
        "penalty_weight": spec.penalty_weight,
        "budget": args.budget,
        "evaluations": result.evaluations,
        "best_cost": result.best_cost,
        "baseline_cost": result.start_costs.get("baseline_stationary"),
        "start_costs": result.start_costs,
        "feasible": result.feasible,
        **_provenance(config, optimizer=args.seed),
    })
    if args.figures:
        from .plotting import plot_cost_history

        plot_cost_history(result.history, out / "history.png")
    return 0


def cmd_montecarlo(args) -> int:
    config = load_config(args.config)
    traj = load_trajectories(args.trajectories)
    ens = run_ensemble(config, traj, args.runs, args.seed, initial=initial_state(config), workers=args.workers)
    out = _out_dir(args.out)
    cols = [ens.mean_attacker_survival_curve, ens.mean_defender_survival_curve, ens.mean_hvu_survival_curve]
    write_csv(out / "ensemble.csv", ["time", "attackers", "defenders", "hvu"], _time_rows(ens.times, cols))
    write_json(out / "summary.json", {
        "command": "montecarlo",
        "trajectories": str(args.trajectories),
        **ens.to_dict(),
        **_provenance(config, master=args.seed),
    })
    if args.figures:
        from .plotting import plot_survival

        series = {"p0": {"attackers": cols[0], "defenders": cols[1], "hvu": cols[2]}}
        plot_survival(ens.times, series, out / "survival.png", title=f"P0 mean over {ens.runs} runs")
    return 0


def cmd_compare(args) -> int:
    config = load_config(args.config)
    traj = load_trajectories(args.trajectories)
    rep = compare_engines(config, traj, args.runs, args.seed, initial=initial_state(config), workers=args.workers)
    out = _out_dir(args.out)
    names = ["p0", "p1", "p2", "p3"]
    header = ["time"] + [f"{e}_{k}" for e in names for k in ("attackers", "defenders", "hvu")]
    cols = [rep.curves[e][k] for e in names for k in ("attackers", "defenders", "hvu")]
    write_csv(out / "curves.csv", header, _time_rows(rep.times, cols))
    write_json(out / "report.json", {
        "command": "compare",
        "trajectories": str(args.trajectories),
        **rep.to_dict(),
        **_provenance(config, master=args.seed),
    })
    if args.figures:
        from .plotting import plot_survival

        plot_survival(rep.times, rep.curves, out / "survival.png", title=f"P0 over {rep.runs} runs vs P1-P3")
    return 0


# --- entry point -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="swarm-attrition", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, figures_help="render PNG figures next to the data"):
        sp.add_argument("--config", required=True, help="scenario JSON file")
        sp.add_argument("--out", required=True, help="output directory (created if missing)")
        sp.add_argument("--figures", action="store_true", help=figures_help)

    sp = sub.add_parser("simulate", help="run one engagement")
    common(sp)
    sp.add_argument("--engine", required=True, choices=[e.value for e in EngineKind])
    sp.add_argument("--seed", type=int, default=0, help="random seed (used by p0)")
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--trajectories", help="defender trajectory JSON")
    src.add_argument("--baseline", action="store_true", help="stationary defenders (default)")
    sp.add_argument("--record-every", type=int, default=1, help="keep every k-th step")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("optimize", help="optimize defender trajectories")
    common(sp)
    sp.add_argument("--engine", required=True, choices=["p1", "p2", "p3"])
    sp.add_argument("--budget", type=int, required=True, help="maximum objective evaluations")
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--penalty-weight", type=float, default=1.0)
    sp.set_defaults(func=cmd_optimize)

    for name, func, helptext in (
        ("montecarlo", cmd_montecarlo, "P0 ensemble on fixed trajectories"),
        ("compare", cmd_compare, "P0 ensemble against P1, P2 and P3"),
    ):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.add_argument("--trajectories", required=True, help="defender trajectory JSON")
        sp.add_argument("--runs", type=int, required=True)
        sp.add_argument("--seed", type=int, required=True, help="master seed")
        sp.add_argument("--workers", type=int, default=1, help="worker processes")
        sp.set_defaults(func=func)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, EngineError, EnsembleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
