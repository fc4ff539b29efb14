"""Static figures written next to the CSV/JSON exports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.collections import LineCollection  # noqa: E402
from matplotlib.colors import LinearSegmentedColormap  # noqa: E402

FRAMEWORK_STYLE = {
    "p0": dict(color="k", ls="-", lw=2.0, label="P0 (Monte Carlo)"),
    "p1": dict(color="tab:orange", ls="--", lw=1.5, label="P1 decoupled"),
    "p2": dict(color="tab:blue", ls="-.", lw=1.5, label="P2 weighted"),
    "p3": dict(color="tab:green", ls=":", lw=1.8, label="P3 threshold"),
}

# cyan fades to black as a defender's survival probability goes to zero
DEFENDER_CMAP = LinearSegmentedColormap.from_list("defender", ["black", "cyan"])
ATTACKER_CMAP = LinearSegmentedColormap.from_list("attacker", ["black", "red"])

_SAVE_KW = dict(dpi=120, metadata={"Software": None})


def _faded_paths(ax, xy: np.ndarray, q: np.ndarray, cmap) -> None:
    """Draw each agent's xy path colored by its survival value along the way."""
    for a in range(xy.shape[1]):
        pts = xy[:, a, :2]
        segs = np.stack([pts[:-1], pts[1:]], axis=1)
        lc = LineCollection(segs, cmap=cmap, norm=plt.Normalize(0.0, 1.0), linewidths=1.0)
        lc.set_array(q[:-1, a])
        ax.add_collection(lc)
    ax.scatter(xy[-1, :, 0], xy[-1, :, 1], c=q[-1], cmap=cmap, vmin=0, vmax=1, s=12, zorder=3)


def plot_engagement(result, path: str | Path, title: str | None = None) -> Path:
    """Top-down view of one simulated engagement (x-y projection)."""
    if result.attacker_pos is None:
        raise ValueError("engagement plot needs recorded positions")
    q_att = result.q_attackers
    q_def = result.q_defenders
    if result.alive_attackers is not None:
        # masked engines: show aliveness rather than the frozen Q
        q_att = np.where(result.alive_attackers, q_att, 0.0)
        q_def = np.where(result.alive_defenders, q_def, 0.0)
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    _faded_paths(ax, result.attacker_pos, q_att, ATTACKER_CMAP)
    if result.defender_pos.shape[1]:
        _faded_paths(ax, result.defender_pos, q_def, DEFENDER_CMAP)
    ax.plot(*result.hvu_pos[:2], marker="*", ms=14, color="gold", mec="k", zorder=4)
    ax.set_aspect("equal")
    ax.autoscale_view()
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(title or f"{result.engine.value.upper()} engagement, HVU survival {result.q_hvu[-1]:.3f}")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def plot_survival(times, series: dict, path: str | Path, title: str = "") -> Path:
    """Mean survival of attackers, defenders and the HVU; one panel each.

    ``series`` maps a label (``p0``..``p3`` or free text) to a dict with keys
    ``attackers``, ``defenders``, ``hvu``.
    """
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.4), sharey=True)
    for ax, kind in zip(axes, ("attackers", "defenders", "hvu")):
        for label, curves in series.items():
            style = dict(FRAMEWORK_STYLE.get(label, {"label": label}))
            ax.plot(times, curves[kind], **style)
        ax.set_title("HVU" if kind == "hvu" else kind)
        ax.set_xlabel("time")
        ax.set_ylim(-0.02, 1.02)
        ax.grid(alpha=0.3)
    axes[0].set_ylabel("survival probability")
    axes[-1].legend(loc="best", fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def plot_cost_history(history, path: str | Path) -> Path:
    costs = np.array([c for _, c in history], dtype=float)
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(np.arange(len(costs)), costs, ".", ms=3, alpha=0.4, label="evaluation")
    ax.plot(np.arange(len(costs)), np.minimum.accumulate(costs), "-", label="best so far")
    ax.set_xlabel("evaluation")
    ax.set_ylabel("objective")
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path
