"""Engagement configuration, agent identities and initial-state generation."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Mapping

import numpy as np


class ConfigError(ValueError):
    """Raised when a scenario configuration violates one of its constraints."""


class LayoutError(ValueError):
    """Raised when the initial layout cannot satisfy the minimum separation."""


class AgentKind(Enum):
    HVU = "hvu"
    ATTACKER = "attacker"
    DEFENDER = "defender"


_KIND_RANK = {AgentKind.HVU: 0, AgentKind.ATTACKER: 1, AgentKind.DEFENDER: 2}


@dataclass(frozen=True)
class AgentId:
    kind: AgentKind
    ordinal: int

    def __post_init__(self) -> None:
        if self.ordinal < 0:
            raise ValueError("agent ordinal must be non-negative")
        if self.kind is AgentKind.HVU and self.ordinal != 0:
            raise ValueError("the HVU has ordinal 0")

    def __lt__(self, other: "AgentId") -> bool:
        return (_KIND_RANK[self.kind], self.ordinal) < (_KIND_RANK[other.kind], other.ordinal)


HVU = AgentId(AgentKind.HVU, 0)


def attacker(i: int) -> AgentId:
    return AgentId(AgentKind.ATTACKER, i)


def defender(k: int) -> AgentId:
    return AgentId(AgentKind.DEFENDER, k)


@dataclass(frozen=True)
class Layout:
    """Parametric initial placement.

    Attackers are drawn uniformly (by volume) from a spherical shell
    ``[attacker_radius, attacker_radius + attacker_shell_width]`` around the
    HVU, restricted to a cone of half-angle ``attacker_cone_deg`` about
    ``direction``. Defenders sit on the sphere of radius ``defender_radius``
    inside a cone of half-angle ``defender_cone_deg`` about the same axis.
    A cone of 180 degrees is the full sphere. ``planar`` keeps everything in
    the z = hvu_z plane. ``min_separation`` of ``None`` means ``0.1 * d0``.
    """

    attacker_radius: float = 20.0
    attacker_shell_width: float = 4.0
    attacker_cone_deg: float = 180.0
    defender_radius: float = 8.0
    defender_cone_deg: float = 180.0
    direction: tuple[float, float, float] = (1.0, 0.0, 0.0)
    planar: bool = False
    min_separation: float | None = None
    seed: int = 0
    max_tries: int = 10_000


@dataclass(frozen=True)
class ScenarioConfig:
    n_attackers: int = 20
    n_defenders: int = 20
    leader_gain: float = 1.0
    damping: float = 0.5
    d0: float = 1.0
    d1: float = 3.0
    s0: float = 3.0
    repulsion_gain_intra: float = 1.0
    repulsion_gain_def: float = 5.0
    lambda_a: float = 1.0
    lambda_d: float = 1.0
    sigma_a: float = 4.0
    sigma_d: float = 4.0
    u_max: float = 1.0
    dt: float = 0.1
    n_steps: int = 300
    threshold: float = 0.5
    bernstein_degree: int = 5
    layout: Layout = field(default_factory=Layout)
    hvu_position: tuple[float, float, float] = (0.0, 0.0, 0.0)

    @property
    def t_final(self) -> float:
        return self.dt * self.n_steps

    @property
    def separation(self) -> float:
        sep = self.layout.min_separation
        return 0.1 * self.d0 if sep is None else sep

    def replace(self, **changes: Any) -> "ScenarioConfig":
        layout_changes = changes.pop("layout", None)
        cfg = dataclasses.replace(self, **changes)
        if isinstance(layout_changes, Mapping):
            cfg = dataclasses.replace(cfg, layout=dataclasses.replace(cfg.layout, **layout_changes))
        elif layout_changes is not None:
            cfg = dataclasses.replace(cfg, layout=layout_changes)
        return cfg

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        out["hvu_position"] = list(self.hvu_position)
        out["layout"]["direction"] = list(self.layout.direction)
        return out


@dataclass(frozen=True)
class SwarmState:
    attacker_pos: np.ndarray
    attacker_vel: np.ndarray
    defender_pos: np.ndarray
    defender_vel: np.ndarray
    hvu_pos: np.ndarray
    time: float = 0.0

    @property
    def n_attackers(self) -> int:
        return self.attacker_pos.shape[0]

    @property
    def n_defenders(self) -> int:
        return self.defender_pos.shape[0]

    def check(self, config: ScenarioConfig | None = None) -> None:
        shapes = {
            "attacker_pos": (self.attacker_pos, self.n_attackers),
            "attacker_vel": (self.attacker_vel, self.n_attackers),
            "defender_pos": (self.defender_pos, self.n_defenders),
            "defender_vel": (self.defender_vel, self.n_defenders),
        }
        for name, (arr, n) in shapes.items():
            if arr.shape != (n, 3):
                raise ValueError(f"{name} has shape {arr.shape}, expected ({n}, 3)")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        if self.hvu_pos.shape != (3,) or not np.all(np.isfinite(self.hvu_pos)):
            raise ValueError("hvu_pos must be a finite 3-vector")
        if config is not None and (
            self.n_attackers != config.n_attackers or self.n_defenders != config.n_defenders
        ):
            raise ValueError("state agent counts do not match the configuration")


def _positive(name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ConfigError(f"{name} must be a finite number > 0 (got {value!r})")


def validate(config: ScenarioConfig) -> ScenarioConfig:
    """Return ``config`` unchanged if every constraint holds, else raise ConfigError.

    The error message names the first constraint that fails.
    """
    c = config
    if not isinstance(c.n_attackers, int) or c.n_attackers < 1:
        raise ConfigError(f"n_attackers must be a positive integer (got {c.n_attackers!r})")
    # M = 0 is allowed so that attacker-only oracle scenarios can be expressed
    if not isinstance(c.n_defenders, int) or c.n_defenders < 0:
        raise ConfigError(f"n_defenders must be a non-negative integer (got {c.n_defenders!r})")
    for name in (
        "damping", "d0", "d1", "s0", "repulsion_gain_intra",
        "repulsion_gain_def", "sigma_a", "sigma_d", "u_max", "dt",
    ):
        _positive(name, getattr(c, name))
    # K = 0 is allowed: the static-attacker oracle scenario needs it
    if not (isinstance(c.leader_gain, (int, float)) and math.isfinite(c.leader_gain) and c.leader_gain >= 0):
        raise ConfigError(f"leader_gain must be a finite number >= 0 (got {c.leader_gain!r})")
    if c.d1 <= c.d0:
        raise ConfigError("d1 must exceed d0")
    for name in ("lambda_a", "lambda_d"):
        v = getattr(c, name)
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v >= 0):
            raise ConfigError(f"{name} must be a finite number >= 0 (got {v!r})")
    if not isinstance(c.n_steps, int) or c.n_steps < 1:
        raise ConfigError(f"n_steps must be a positive integer (got {c.n_steps!r})")
    if not 0.0 < c.threshold < 1.0:
        raise ConfigError(f"threshold must lie in (0, 1) (got {c.threshold!r})")
    if not isinstance(c.bernstein_degree, int) or c.bernstein_degree < 1:
        raise ConfigError(f"bernstein_degree must be a positive integer (got {c.bernstein_degree!r})")
    for name in ("lambda_a", "lambda_d"):
        if getattr(c, name) * c.dt >= 1.0:
            raise ConfigError(
                f"{name}*dt must be < 1 so every survival factor stays in (0, 1] "
                f"(got {getattr(c, name) * c.dt:g})"
            )
    if len(c.hvu_position) != 3 or not all(math.isfinite(v) for v in c.hvu_position):
        raise ConfigError("hvu_position must be a finite 3-vector")

    lay = c.layout
    _positive("layout.attacker_radius", lay.attacker_radius)
    _positive("layout.defender_radius", lay.defender_radius)
    if lay.attacker_shell_width < 0:
        raise ConfigError("layout.attacker_shell_width must be >= 0")
    if lay.defender_radius >= lay.attacker_radius and c.n_defenders > 0:
        raise ConfigError("layout.defender_radius must be smaller than layout.attacker_radius")
    for name in ("attacker_cone_deg", "defender_cone_deg"):
        v = getattr(lay, name)
        if not 0.0 <= v <= 180.0:
            raise ConfigError(f"layout.{name} must lie in [0, 180]")
    if len(lay.direction) != 3 or np.linalg.norm(lay.direction) == 0:
        raise ConfigError("layout.direction must be a non-zero 3-vector")
    if lay.min_separation is not None:
        _positive("layout.min_separation", lay.min_separation)
    return config


# --- JSON ingestion -------------------------------------------------------

_CONFIG_FIELDS = {f.name for f in dataclasses.fields(ScenarioConfig)}
_LAYOUT_FIELDS = {f.name for f in dataclasses.fields(Layout)}


def config_from_dict(data: Mapping[str, Any]) -> ScenarioConfig:
    """Build a config from a mapping with exactly the ScenarioConfig keys (missing keys default)."""
    unknown = set(data) - _CONFIG_FIELDS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    kwargs = dict(data)
    if "layout" in kwargs:
        lay = kwargs["layout"]
        if not isinstance(lay, Mapping):
            raise ConfigError("layout must be an object")
        bad = set(lay) - _LAYOUT_FIELDS
        if bad:
            raise ConfigError(f"unknown layout keys: {', '.join(sorted(bad))}")
        lay = dict(lay)
        if "direction" in lay:
            lay["direction"] = tuple(float(v) for v in lay["direction"])
        kwargs["layout"] = Layout(**lay)
    if "hvu_position" in kwargs:
        kwargs["hvu_position"] = tuple(float(v) for v in kwargs["hvu_position"])
    return validate(ScenarioConfig(**kwargs))


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise FileNotFoundError(f"config file not found: {path}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top-level JSON value must be an object")
    return config_from_dict(data)


# --- initial layout -------------------------------------------------------

def _orthonormal_frame(direction: np.ndarray) -> np.ndarray:
    axis = direction / np.linalg.norm(direction)
    helper = np.array([0.0, 0.0, 1.0]) if abs(axis[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(helper, axis)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    return np.stack([axis, e1, e2])


def _cone_direction(rng: np.random.Generator, frame: np.ndarray, cone_deg: float, planar: bool) -> np.ndarray:
    half = math.radians(cone_deg)
    if planar:
        # in-plane angle measured from the axis projected onto the xy plane
        ang = rng.uniform(-half, half)
        axis = frame[0].copy()
        axis[2] = 0.0
        n = np.linalg.norm(axis)
        axis = np.array([1.0, 0.0, 0.0]) if n == 0 else axis / n
        perp = np.array([-axis[1], axis[0], 0.0])
        return math.cos(ang) * axis + math.sin(ang) * perp
    # uniform on the spherical cap
    cos_t = rng.uniform(math.cos(half), 1.0)
    sin_t = math.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    phi = rng.uniform(0.0, 2.0 * math.pi)
    return cos_t * frame[0] + sin_t * (math.cos(phi) * frame[1] + math.sin(phi) * frame[2])


def initial_state(config: ScenarioConfig, layout_seed: int | None = None) -> SwarmState:
    """Place agents by rejection sampling; a pure function of ``(config, layout_seed)``.

    ``layout_seed`` defaults to ``config.layout.seed``. Velocities start at zero.
    """
    validate(config)
    lay = config.layout
    seed = lay.seed if layout_seed is None else layout_seed
    rng = np.random.default_rng(seed)
    hvu = np.asarray(config.hvu_position, dtype=float)
    frame = _orthonormal_frame(np.asarray(lay.direction, dtype=float))
    sep = config.separation

    placed: list[np.ndarray] = [hvu]

    def draw(radius_lo: float, width: float, cone: float) -> np.ndarray:
        for _ in range(lay.max_tries):
            u = rng.random()
            if width > 0:
                # uniform by volume within the shell (by area when planar)
                p = 2 if lay.planar else 3
                lo, hi = radius_lo**p, (radius_lo + width) ** p
                r = (lo + u * (hi - lo)) ** (1.0 / p)
            else:
                r = radius_lo
            cand = hvu + r * _cone_direction(rng, frame, cone, lay.planar)
            if all(np.linalg.norm(cand - q) >= sep for q in placed):
                placed.append(cand)
                return cand
        raise LayoutError(
            f"cannot place agent {len(placed)} with separation {sep:g} "
            f"after {lay.max_tries} tries"
        )

    att = np.array(
        [draw(lay.attacker_radius, lay.attacker_shell_width, lay.attacker_cone_deg)
         for _ in range(config.n_attackers)]
    ).reshape(config.n_attackers, 3)
    dfd = np.array(
        [draw(lay.defender_radius, 0.0, lay.defender_cone_deg) for _ in range(config.n_defenders)]
    ).reshape(config.n_defenders, 3)
    state = SwarmState(
        attacker_pos=att,
        attacker_vel=np.zeros_like(att),
        defender_pos=dfd,
        defender_vel=np.zeros_like(dfd),
        hvu_pos=hvu,
        time=0.0,
    )
    state.check(config)
    return state
