"""Damage kernels, survival-probability recursions and index-set updates."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.special import erfc

from .scenario import HVU, AgentId, AgentKind, ScenarioConfig, SwarmState, attacker, defender


class RateOverflowError(ValueError):
    """A survival factor ``1 - rate * weight * dt`` left the interval (0, 1]."""


class InconsistentStateError(ValueError):
    """An agent marked alive has zero survival probability."""


@dataclass(frozen=True)
class SurvivalVector:
    hvu: float
    attackers: np.ndarray
    defenders: np.ndarray

    @classmethod
    def ones(cls, n_attackers: int, n_defenders: int) -> "SurvivalVector":
        return cls(1.0, np.ones(n_attackers), np.ones(n_defenders))

    def as_array(self) -> np.ndarray:
        """Flat ``[Q_0, Q^I..., Q^D...]``."""
        return np.concatenate(([self.hvu], self.attackers, self.defenders))


@dataclass(frozen=True)
class IndexSet:
    """Alive flags for the HVU, each attacker and each defender.

    Stored as boolean masks so array shapes never change; ``agents()`` gives
    the set-of-identifiers view.
    """

    hvu: bool
    attackers: np.ndarray
    defenders: np.ndarray

    @classmethod
    def full(cls, n_attackers: int, n_defenders: int) -> "IndexSet":
        return cls(True, np.ones(n_attackers, dtype=bool), np.ones(n_defenders, dtype=bool))

    @classmethod
    def from_agents(cls, agents: Iterable[AgentId], n_attackers: int, n_defenders: int) -> "IndexSet":
        att = np.zeros(n_attackers, dtype=bool)
        dfd = np.zeros(n_defenders, dtype=bool)
        hvu = False
        for a in agents:
            if a.kind is AgentKind.HVU:
                hvu = True
            elif a.kind is AgentKind.ATTACKER:
                att[a.ordinal] = True
            else:
                dfd[a.ordinal] = True
        return cls(hvu, att, dfd)

    def agents(self) -> frozenset[AgentId]:
        out = {attacker(int(i)) for i in np.flatnonzero(self.attackers)}
        out |= {defender(int(k)) for k in np.flatnonzero(self.defenders)}
        if self.hvu:
            out.add(HVU)
        return frozenset(out)

    def as_array(self) -> np.ndarray:
        return np.concatenate(([self.hvu], self.attackers, self.defenders))

    def issubset(self, other: "IndexSet") -> bool:
        return bool(
            (not self.hvu or other.hvu)
            and np.all(~self.attackers | other.attackers)
            and np.all(~self.defenders | other.defenders)
        )

    def __len__(self) -> int:
        return int(self.hvu) + int(self.attackers.sum()) + int(self.defenders.sum())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, IndexSet):
            return NotImplemented
        return (
            self.hvu == other.hvu
            and np.array_equal(self.attackers, other.attackers)
            and np.array_equal(self.defenders, other.defenders)
        )


@dataclass(frozen=True)
class AttritionRates:
    att: np.ndarray  # (N, M): attacker i destroyed by defender k
    def_: np.ndarray  # (M, N): defender k destroyed by attacker i
    hvu: np.ndarray  # (N,): HVU destroyed by attacker i


def damage_kernel(sq_dist, sigma: float):
    """Inverted cumulative normal of ``sq_dist / sigma``: ``2 * (1 - N(u))``.

    Equals 1 at zero distance and decays monotonically to 0.
    """
    u = np.asarray(sq_dist, dtype=float) / sigma
    # erfc(u / sqrt 2) == 2 * (1 - Ncdf(u)), without cancellation in the tail
    out = erfc(u / np.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def attrition_rates(state: SwarmState, config: ScenarioConfig) -> AttritionRates:
    diff = state.attacker_pos[:, None, :] - state.defender_pos[None, :, :]
    sq = np.einsum("ikj,ikj->ik", diff, diff)
    h = state.hvu_pos[None, :] - state.attacker_pos
    sq_h = np.einsum("ij,ij->i", h, h)
    return AttritionRates(
        att=config.lambda_d * damage_kernel(sq, config.sigma_d),
        def_=(config.lambda_a * damage_kernel(sq, config.sigma_a)).T,
        hvu=config.lambda_a * damage_kernel(sq_h, config.sigma_a),
    )


def _product_of_factors(rates: np.ndarray, shooter_weights: np.ndarray, dt: float) -> np.ndarray:
    """Row-wise product of ``1 - rate * weight * dt`` over shooters (columns)."""
    factors = 1.0 - rates * shooter_weights[None, :] * dt
    if factors.size and (factors.min() <= 0.0 or factors.max() > 1.0):
        raise RateOverflowError(
            f"survival factor outside (0, 1]: min {factors.min():g}, max {factors.max():g}"
        )
    return np.prod(factors, axis=1)


def survival_factors(
    rates: AttritionRates,
    attacker_weights: np.ndarray,
    defender_weights: np.ndarray,
    dt: float,
) -> SurvivalVector:
    """Per-agent one-step survival factors ``Q(t_{k+1}) / Q(t_k)``.

    ``attacker_weights``/``defender_weights`` stand in for the shooters' Q in
    the product recursion.
    """
    w_att = np.asarray(attacker_weights, dtype=float)
    w_def = np.asarray(defender_weights, dtype=float)
    for w in (w_att, w_def):
        if w.size and (w.min() < 0.0 or w.max() > 1.0):
            raise ValueError("shooter weights must lie in [0, 1]")
    f_att = _product_of_factors(rates.att, w_def, dt)
    f_def = _product_of_factors(rates.def_, w_att, dt)
    f_hvu = _product_of_factors(rates.hvu[None, :], w_att, dt)[0]
    return SurvivalVector(float(f_hvu), f_att, f_def)


def survival_step(
    q: SurvivalVector,
    rates: AttritionRates,
    attacker_weights: np.ndarray,
    defender_weights: np.ndarray,
    dt: float,
    alive: IndexSet | None = None,
) -> SurvivalVector:
    """Advance Q one step by the product recursion.

    Agents absent from ``alive`` keep their current Q (they take no damage).
    """
    f = survival_factors(rates, attacker_weights, defender_weights, dt)
    return _apply_factors(q, f, alive)


def _apply_factors(q: SurvivalVector, f: SurvivalVector, alive: IndexSet | None) -> SurvivalVector:
    if alive is None:
        return SurvivalVector(q.hvu * f.hvu, q.attackers * f.attackers, q.defenders * f.defenders)
    return SurvivalVector(
        q.hvu * f.hvu if alive.hvu else q.hvu,
        np.where(alive.attackers, q.attackers * f.attackers, q.attackers),
        np.where(alive.defenders, q.defenders * f.defenders, q.defenders),
    )


def removal_by_ratio(alive: IndexSet, ratio: SurvivalVector, omega: np.ndarray) -> IndexSet:
    """Remove each alive agent j with ``omega_j >= ratio_j``.

    ``omega`` is laid out as ``[hvu, attackers..., defenders...]``.
    """
    n, m = alive.attackers.size, alive.defenders.size
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (1 + n + m,):
        raise ValueError(f"omega must have {1 + n + m} entries, got {omega.shape}")
    r = ratio.as_array()
    survive = omega < r
    return IndexSet(
        bool(alive.hvu and survive[0]),
        alive.attackers & survive[1 : 1 + n],
        alive.defenders & survive[1 + n :],
    )


def stochastic_index_update(
    alive: IndexSet, q_before: SurvivalVector, q_after: SurvivalVector, omega: np.ndarray
) -> IndexSet:
    """Random removal: alive agent j dies iff ``omega_j >= Q_j(t+1) / Q_j(t)``."""
    before = q_before.as_array()
    after = q_after.as_array()
    mask = alive.as_array()
    if np.any(mask & (before <= 0.0)):
        raise InconsistentStateError("alive agent with zero survival probability")
    ratio = np.divide(after, before, out=np.zeros_like(after), where=before > 0)
    n = alive.attackers.size
    return removal_by_ratio(
        alive, SurvivalVector(float(ratio[0]), ratio[1 : 1 + n], ratio[1 + n :]), omega
    )


def threshold_index_update(alive: IndexSet, q: SurvivalVector, tau: float) -> IndexSet:
    """Drop every alive agent whose Q is strictly below ``tau``."""
    if not 0.0 < tau < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    return IndexSet(
        bool(alive.hvu and q.hvu >= tau),
        alive.attackers & (q.attackers >= tau),
        alive.defenders & (q.defenders >= tau),
    )
