import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from swarm_attrition.attrition import IndexSet
from swarm_attrition.dynamics import (
    IndexMasked,
    IntegrationError,
    ProbabilityWeighted,
    SingularPairError,
    TrajectoryParams,
    Unweighted,
    attacker_accelerations,
    bernstein_acceleration,
    bernstein_position,
    bernstein_velocity,
    defender_path,
    interaction_accelerations,
    pair_force_defender,
    pair_force_intra,
    verlet_step,
)
from swarm_attrition.scenario import ScenarioConfig, SwarmState

CFG = ScenarioConfig(d0=1.0, d1=3.0, s0=2.5, repulsion_gain_intra=1.5, repulsion_gain_def=4.0,
                     leader_gain=0.7, damping=0.3)


def make_state(att, dfd=None, vel=None, hvu=(0.0, 0.0, 0.0)):
    att = np.asarray(att, dtype=float).reshape(-1, 3)
    dfd = np.zeros((0, 3)) if dfd is None else np.asarray(dfd, dtype=float).reshape(-1, 3)
    vel = np.zeros_like(att) if vel is None else np.asarray(vel, dtype=float).reshape(-1, 3)
    return SwarmState(att, vel, dfd, np.zeros_like(dfd), np.asarray(hvu, dtype=float), 0.0)


# --- pair forces -----------------------------------------------------------

def test_intra_force_zero_at_crossover_and_beyond_cutoff():
    assert pair_force_intra(CFG.d0, CFG) == 0.0
    assert pair_force_intra(CFG.d1, CFG) == 0.0
    assert pair_force_intra(CFG.d1 + 1e-6, CFG) == 0.0
    assert pair_force_intra(CFG.d1 + 50.0, CFG) == 0.0


def test_intra_force_attractive_between_d0_and_d1():
    mid = 0.5 * (CFG.d0 + CFG.d1)
    # hand evaluation: g * (d0 - mid) * (d1 - mid) / (d1 - d0) = -g (d1 - d0) / 4
    assert pair_force_intra(mid, CFG) == pytest.approx(-1.5 * 2.0 / 4.0)
    assert pair_force_intra(0.5, CFG) == pytest.approx(1.5 * 0.5)


def test_defender_force():
    assert pair_force_defender(CFG.s0, CFG) == 0.0
    assert pair_force_defender(2 * CFG.s0, CFG) == 0.0
    assert pair_force_defender(CFG.s0 / 2, CFG) == pytest.approx(4.0 * CFG.s0 / 2)


def test_coincident_pairs_raise():
    with pytest.raises(SingularPairError):
        pair_force_intra(0.0, CFG)
    with pytest.raises(SingularPairError):
        pair_force_defender(0.0, CFG)
    with pytest.raises(SingularPairError):
        attacker_accelerations(make_state([[1, 0, 0], [1, 0, 0]]), Unweighted(), CFG)


@given(st.floats(1e-6, 10.0))
def test_pair_forces_continuous(r):
    h = 1e-9
    for f in (pair_force_intra, pair_force_defender):
        assert abs(f(r + h, CFG) - f(r, CFG)) < 1e-6


def test_vectorized_forces_agree_with_scalar_forms(rng):
    att = rng.uniform(-3, 3, size=(7, 3))
    dfd = rng.uniform(-3, 3, size=(3, 3))
    got = interaction_accelerations(att, dfd, np.zeros(3), np.ones(7), np.ones(3), np.ones(7, bool), CFG)
    want = np.zeros((7, 3))
    for i in range(7):
        for j in range(7):
            if i != j:
                x = att[i] - att[j]
                r = np.linalg.norm(x)
                want[i] += pair_force_intra(r, CFG) / r * x
        for k in range(3):
            s = att[i] - dfd[k]
            r = np.linalg.norm(s)
            want[i] += pair_force_defender(r, CFG) / r * s
        h = -att[i]
        want[i] += CFG.leader_gain * h / np.linalg.norm(h)
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)


# --- accelerations ---------------------------------------------------------

def test_single_attacker_at_rest_feels_only_leader():
    s = make_state([[3.0, 4.0, 0.0]])
    a = attacker_accelerations(s, Unweighted(), CFG)
    np.testing.assert_allclose(a[0], 0.7 * np.array([-0.6, -0.8, 0.0]))


def test_attacker_on_hvu_has_no_leader_term():
    a = attacker_accelerations(make_state([[0.0, 0.0, 0.0]]), Unweighted(), CFG)
    np.testing.assert_array_equal(a, 0.0)


def test_weights_of_one_reproduce_unweighted(rng):
    s = make_state(rng.uniform(-4, 4, (5, 3)), rng.uniform(-4, 4, (3, 3)), rng.normal(size=(5, 3)))
    a = attacker_accelerations(s, Unweighted(), CFG)
    b = attacker_accelerations(s, ProbabilityWeighted(np.ones(8)), CFG)
    c = attacker_accelerations(s, IndexMasked(IndexSet.full(5, 3)), CFG)
    assert a.tobytes() == b.tobytes() == c.tobytes()


def test_symmetric_pair_interaction_is_equal_and_opposite():
    mid = 0.5 * (CFG.d0 + CFG.d1)
    cfg = CFG.replace(leader_gain=0.0)
    s = make_state([[-mid / 2, 5.0, 0.0], [mid / 2, 5.0, 0.0]])
    a = attacker_accelerations(s, Unweighted(), cfg)
    np.testing.assert_allclose(a[0], -a[1])
    # attraction pulls attacker 0 toward +x with magnitude g (d1 - d0) / 4
    np.testing.assert_allclose(a[0], [1.5 * 2.0 / 4.0, 0.0, 0.0])


def test_masked_out_attackers_are_inert():
    s = make_state([[2.0, 0, 0], [2.5, 0, 0], [9.0, 0, 0]], vel=[[1, 0, 0]] * 3)
    alive = IndexSet(True, np.array([True, False, True]), np.zeros(0, bool))
    a = attacker_accelerations(s, IndexMasked(alive), CFG)
    np.testing.assert_array_equal(a[1], 0.0)
    solo = attacker_accelerations(make_state([[2.0, 0, 0], [9.0, 0, 0]], vel=[[1, 0, 0]] * 2), Unweighted(), CFG)
    np.testing.assert_allclose(a[[0, 2]], solo)


@settings(max_examples=50)
@given(arrays(float, 8, elements=st.floats(0.0, 1.0)), st.integers(0, 2**31))
def test_weighted_interaction_bounded_by_full_weights(w, seed):
    rng = np.random.default_rng(seed)
    att = rng.uniform(-3, 3, (5, 3))
    dfd = rng.uniform(-3, 3, (3, 3))
    cfg = CFG.replace(leader_gain=0.0)
    act = np.ones(5, bool)
    full = np.abs(interaction_accelerations(att, dfd, np.zeros(3), np.ones(5), np.ones(3), act, cfg))
    # per-summand bound: sum of |terms| at w = 1 bounds any weighted sum
    bound = np.zeros(5)
    for i in range(5):
        for j in range(5):
            if i != j:
                r = np.linalg.norm(att[i] - att[j])
                bound[i] += abs(pair_force_intra(r, cfg))
        for k in range(3):
            bound[i] += abs(pair_force_defender(np.linalg.norm(att[i] - dfd[k]), cfg))
    got = interaction_accelerations(att, dfd, np.zeros(3), w[:5], w[5:], act, cfg)
    assert np.all(np.linalg.norm(got, axis=1) <= bound + 1e-12)
    assert np.all(np.linalg.norm(full, axis=1) <= bound + 1e-12)


# --- Bernstein -------------------------------------------------------------

def test_bernstein_endpoints(rng):
    cp = rng.normal(size=(4, 3, 6))
    p = TrajectoryParams(cp, 7.5)
    for k in range(4):
        np.testing.assert_array_equal(bernstein_position(p, k, 0.0), cp[k, :, 0])
        np.testing.assert_allclose(bernstein_position(p, k, 7.5), cp[k, :, -1], rtol=0, atol=1e-14)


def test_linear_midpoint():
    cp = np.zeros((1, 3, 2))
    cp[0, 0, 1] = 2.0
    p = TrajectoryParams(cp, 4.0)
    np.testing.assert_allclose(bernstein_position(p, 0, 2.0), [1.0, 0.0, 0.0])
    np.testing.assert_array_equal(bernstein_acceleration(p, 0, 1.3), 0.0)


def test_quadratic_second_derivative():
    cp = np.zeros((1, 3, 3))
    cp[0, 1] = [0.0, 0.0, 1.0]
    p = TrajectoryParams(cp, 2.0)
    for t in (0.0, 0.7, 2.0):
        np.testing.assert_allclose(bernstein_acceleration(p, 0, t), [0.0, 2.0 / 4.0, 0.0])


@settings(max_examples=30)
@given(st.integers(0, 2**31), st.integers(2, 7), st.floats(0.05, 0.95))
def test_derivatives_match_finite_differences(seed, degree, frac):
    rng = np.random.default_rng(seed)
    tf = 10.0
    p = TrajectoryParams(rng.uniform(-5, 5, (2, 3, degree + 1)), tf)
    t, d = frac * tf, 1e-4 * tf
    for k in range(2):
        x = [bernstein_position(p, k, t + s * d) for s in (-1, 0, 1)]
        fd1 = (x[2] - x[0]) / (2 * d)
        fd2 = (x[2] - 2 * x[1] + x[0]) / d**2
        np.testing.assert_allclose(bernstein_velocity(p, k, t), fd1, rtol=1e-6, atol=1e-6)
        np.testing.assert_allclose(bernstein_acceleration(p, k, t), fd2, rtol=1e-4, atol=1e-4)


def test_time_outside_horizon():
    p = TrajectoryParams(np.zeros((1, 3, 3)), 1.0)
    with pytest.raises(ValueError):
        bernstein_position(p, 0, 1.5)
    with pytest.raises(ValueError):
        defender_path(p, [-0.1])


def test_trajectory_dict_round_trip(rng):
    p = TrajectoryParams(rng.normal(size=(3, 3, 4)), 12.0)
    q = TrajectoryParams.from_dict(p.to_dict())
    assert q.horizon == p.horizon
    np.testing.assert_array_equal(q.control_points, p.control_points)


# --- velocity Verlet -------------------------------------------------------

def test_free_particle():
    s = make_state([[1.0, 2.0, 3.0]], vel=[[0.5, -1.0, 2.0]])
    s1 = verlet_step(s, lambda st: np.zeros((1, 3)), 0.2)
    np.testing.assert_allclose(s1.attacker_pos, [[1.1, 1.8, 3.4]])
    np.testing.assert_array_equal(s1.attacker_vel, s.attacker_vel)
    assert s1.time == pytest.approx(0.2)


def test_constant_acceleration_is_exact():
    a = np.array([[0.3, -2.0, 1.0]])
    s = make_state([[1.0, 0.0, 0.0]], vel=[[0.0, 1.0, 0.0]])
    dt = 0.37
    s1 = verlet_step(s, lambda st: a, dt)
    np.testing.assert_allclose(s1.attacker_pos, s.attacker_pos + s.attacker_vel * dt + a * dt**2 / 2, rtol=1e-15)
    np.testing.assert_allclose(s1.attacker_vel, s.attacker_vel + a * dt, rtol=1e-15)


def _harmonic_error(dt, t_end=10.0):
    s = make_state([[1.0, 0.0, 0.0]])
    for _ in range(int(round(t_end / dt))):
        s = verlet_step(s, lambda st: -st.attacker_pos, dt)
    return abs(s.attacker_pos[0, 0] - np.cos(t_end))


def test_harmonic_convergence_is_second_order():
    ratio = _harmonic_error(0.1) / _harmonic_error(0.05)
    assert 3.4 <= ratio <= 4.6


@given(st.floats(0.01, 5.0), st.floats(0.001, 0.5))
def test_damping_only_speed_never_increases(b, dt):
    s = make_state([[0.0, 0.0, 0.0]], vel=[[1.0, -2.0, 0.5]])
    for _ in range(5):
        s1 = verlet_step(s, lambda st: np.zeros((1, 3)), dt, damping=b)
        assert np.linalg.norm(s1.attacker_vel) <= np.linalg.norm(s.attacker_vel)
        s = s1


def test_defenders_follow_bernstein(rng):
    p = TrajectoryParams(rng.normal(size=(2, 3, 5)), 3.0)
    s = make_state([[10.0, 0, 0]], dfd=defender_path(p, 0.0))
    s1 = verlet_step(s, lambda st: np.zeros((1, 3)), 0.5, defenders=p)
    np.testing.assert_allclose(s1.defender_pos, defender_path(p, 0.5))
    np.testing.assert_allclose(s1.defender_vel, defender_path(p, 0.5, order=1))


def test_non_finite_acceleration_is_an_integration_error():
    s = make_state([[1.0, 0, 0]])
    with pytest.raises(IntegrationError):
        verlet_step(s, lambda st: np.full((1, 3), np.nan), 0.1)
