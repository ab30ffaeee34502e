import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from colavoid.mdp import (
    Action,
    MdpState,
    RewardParams,
    Thrust,
    TransitionParams,
    apply_thrust,
    cost_to_maneuver,
    legal_actions,
    maneuver_plan,
    reward,
    transition,
)
from colavoid.orbital import EciState, along_track_unit, propagate
from colavoid.scenario import EncounterClass, GeneratorConfig, generate
from conftest import ZERO6, circular_chief, crossing_deputy, iso_cov, state_with_pc
from oracles import integrate_two_body

RP = RewardParams()


def test_degenerate_transition_keeps_covariances(rng):
    s = state_with_pc(1e-3, t=40)
    nxt = transition(s, Action.WAIT, TransitionParams(p_obs=0.0, k_c=0.0), rng)
    assert nxt.t == 32
    np.testing.assert_array_equal(nxt.sigma_c, s.sigma_c)
    np.testing.assert_array_equal(nxt.sigma_d, s.sigma_d)
    assert (nxt.r_c, nxt.r_d) == (s.r_c, s.r_d)


def test_zero_covariance_transition_is_exact(rng):
    ch = circular_chief()
    s = MdpState(16, ch, crossing_deputy(ch, (0.1, 0, 0)), ZERO6, ZERO6, 5, 5)
    nxt = transition(s, Action.MANEUVER, TransitionParams(), rng)
    assert nxt.x_c == s.x_c and nxt.x_d == s.x_d


def test_transition_statistics():
    rng = np.random.default_rng(2024)
    tp = TransitionParams(p_obs=0.5, k_c=0.05, k_d_lower=0.05, k_d_upper=0.3)
    s = state_with_pc(1e-3, t=72)
    np.testing.assert_allclose(transition(s, Action.WAIT, tp, rng).sigma_c, 0.95 * s.sigma_c)
    n, rescaled, kds = 100_000, 0, []
    d0 = s.sigma_d[0, 0]
    for _ in range(n):
        ratio = transition(s, Action.WAIT, tp, rng).sigma_d[0, 0] / d0
        if ratio != 1.0:
            rescaled += 1
            kds.append(1.0 - ratio)
    assert abs(rescaled / n - 0.5) <= 0.01
    assert abs(np.mean(kds) - 0.175) <= 0.005


def test_transition_rejects_terminal(rng):
    with pytest.raises(ValueError):
        transition(state_with_pc(1e-3, t=0), Action.WAIT, TransitionParams(), rng)


@given(st.integers(0, 1000), st.sampled_from(range(8, 80, 8)))
def test_transition_invariants(seed, t):
    rng = np.random.default_rng(seed)
    s = state_with_pc(1e-2, t=t)
    nxt = transition(s, Action.WAIT, TransitionParams(), rng)
    assert nxt.t == t - 8
    assert (nxt.r_c, nxt.r_d) == (s.r_c, s.r_d)
    for a, b in ((s.sigma_c, nxt.sigma_c), (s.sigma_d, nxt.sigma_d)):
        assert np.linalg.det(b[:3, :3]) <= np.linalg.det(a[:3, :3])


def test_reward_table():
    assert reward(state_with_pc(1e-3, t=16), Action.WAIT, RP) == 0.0
    assert reward(state_with_pc(1e-7, t=0), Action.WAIT, RP) == 0.0
    assert reward(state_with_pc(1e-3, t=0), Action.WAIT, RP) == -0.5
    with pytest.raises(ValueError):
        reward(state_with_pc(1e-3, t=0), Action.MANEUVER, RP)
    assert legal_actions(state_with_pc(1e-3, t=0)) == (Action.WAIT,)


@given(st.sampled_from(range(8, 80, 8)), st.floats(1e-9, 0.9))
def test_wait_reward_zero_before_tca(t, pc):
    assert reward(state_with_pc(pc, t=t), Action.WAIT, RP) == 0.0


def test_maneuver_reward_is_negative_cost():
    s = state_with_pc(1e-3, t=24)
    assert reward(s, Action.MANEUVER, RP) == -cost_to_maneuver(s, RP) < 0


def test_zero_thrust_is_identity():
    x = circular_chief()
    y = apply_thrust(x, 72, Thrust.ALONG, 0.0)
    np.testing.assert_allclose(y.position, x.position, atol=1e-6)
    with pytest.raises(ValueError):
        apply_thrust(x, 0, Thrust.ALONG, 1.0)


def test_along_and_anti_bracket_the_nominal_state():
    ch = circular_chief()
    dep = crossing_deputy(ch, (0.0, 0.0, 0.0))
    u = along_track_unit(ch)
    sep = lambda x: (x.position - dep.position) @ u  # noqa: E731
    plus = sep(apply_thrust(ch, 24, Thrust.ALONG, 0.01))
    minus = sep(apply_thrust(ch, 24, Thrust.ANTI_ALONG, 0.01))
    assert min(plus, minus) < sep(ch) < max(plus, minus)


def test_secular_drift_matches_integrator():
    ch = circular_chief(alt_km=500.0)
    dv, t = 0.01, 72
    y = apply_thrust(ch, t, Thrust.ALONG, dv)
    # independent construction: integrate back, burn, integrate forward
    back = integrate_two_body(ch.as_array(), -t * 3600.0)
    back[3:] += dv / 1000.0 * back[3:] / np.linalg.norm(back[3:])
    ref = integrate_two_body(back, t * 3600.0)
    np.testing.assert_allclose(y.position, ref[:3], atol=1e-4)
    drift = abs((y.position - ch.position) @ along_track_unit(ch))
    expected = 3.0 * (dv / 1000.0) * t * 3600.0
    assert abs(drift - expected) <= 0.2 * expected


def test_one_step_suffices():
    # disk just grazes the mean: the smallest burn clears it
    ch = circular_chief()
    s = MdpState(72, ch, crossing_deputy(ch), iso_cov(1e-4), iso_cov(1e-4), 0.5, 0.5)
    assert s.pc > RP.pc_threshold
    assert cost_to_maneuver(s, RP) == RP.delta_v_step


def test_cost_precondition():
    with pytest.raises(ValueError):
        cost_to_maneuver(state_with_pc(1e-7, t=24), RP)
    with pytest.raises(ValueError):
        cost_to_maneuver(state_with_pc(1e-3, t=0), RP)


def thrust_pc(s, direction, dv):
    return s.replace(x_c=apply_thrust(s.x_c, s.t, direction, dv)).pc


def unsafe_states(n, t_values=(8, 24, 72), seed=3):
    cfg = GeneratorConfig()
    out, i = [], 0
    while len(out) < n:
        e = generate(cfg, seed, i)
        i += 1
        if e.encounter_class is EncounterClass.UNSAFE:
            out.append(e.at(0).replace(t=t_values[len(out) % len(t_values)]))
    return out


def test_cost_minimal_within_grid():
    for s in unsafe_states(12):
        direction, steps = maneuver_plan(s, RP)
        c = cost_to_maneuver(s, RP)
        assert c == pytest.approx(steps * RP.delta_v_step, rel=1e-15)
        assert thrust_pc(s, direction, c) < RP.pc_threshold
        if steps > 1:
            assert thrust_pc(s, direction, c - RP.delta_v_step) >= RP.pc_threshold


def test_cost_direction_is_better_first_step():
    for s in unsafe_states(6):
        direction, _ = maneuver_plan(s, RP)
        other = Thrust.ANTI_ALONG if direction is Thrust.ALONG else Thrust.ALONG
        assert thrust_pc(s, direction, RP.delta_v_step) <= thrust_pc(s, other, RP.delta_v_step)


def test_earlier_maneuvers_are_cheaper():
    states = unsafe_states(40, t_values=(0,))
    cheaper = sum(
        cost_to_maneuver(s.replace(t=72), RP) <= cost_to_maneuver(s.replace(t=8), RP)
        for s in states
    )
    assert cheaper >= 0.95 * len(states)


def test_state_validation():
    ch = circular_chief()
    dep = crossing_deputy(ch)
    with pytest.raises(ValueError):
        MdpState(5, ch, dep, ZERO6, ZERO6, 5, 5)
    with pytest.raises(ValueError):
        MdpState(8, ch, dep, ZERO6, ZERO6, 0, 5)
    with pytest.raises(ValueError):
        MdpState(8, ch, dep, np.eye(5), ZERO6, 5, 5)
    neg = iso_cov(0.1)
    neg[0, 0] = -1.0
    with pytest.raises(ValueError):
        MdpState(8, ch, dep, neg, ZERO6, 5, 5)


def test_propagation_helper_consistency():
    # apply_thrust with dv = 0 equals a back/forward propagate pair
    x = circular_chief(alt_km=450, i=78, raan=70, m=200)
    y = propagate(propagate(x, -8 * 3600.0), 8 * 3600.0)
    z = apply_thrust(x, 8, Thrust.ANTI_ALONG, 0.0)
    np.testing.assert_allclose(y.position, z.position, atol=1e-9)
    assert isinstance(z, EciState)
