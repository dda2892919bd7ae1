import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iono_lab import sim
from iono_lab.lie import LIE_ACTIONS
from iono_lab.sim import (
    MN, PHI, PSI, THETA, VZ, WX, WY, WZ, InertialConfig, SimConfig, SingularityError,
    ThrustParams, body_to_inertial, current_for_thrust, derivative, euler_rates,
    mix_forces, rollout, step_control_period, thrust_from_current,
)

NOMINAL = InertialConfig()
HOVER_U = np.full(4, NOMINAL.mass * NOMINAL.gravity / 4)


def test_thrust_zero_current():
    assert thrust_from_current(0.0) == 0.0


def test_thrust_hand_value():
    # 0.6 * 0.5e-3 A * 500e-6 m / 2e-4 m^2/(V s)
    f = thrust_from_current(0.5e-3, ThrustParams(beta=(0.6,) * 4, d=500e-6, mu=2e-4))
    assert f == pytest.approx(0.75 * MN, rel=1e-12)


def test_thrust_inversion():
    i = current_for_thrust(0.1 * MN)
    assert i == pytest.approx(66.67e-6, rel=1e-3)
    assert thrust_from_current(i) == pytest.approx(0.1 * MN, rel=1e-12)


def test_thrust_monotone_and_errors():
    forces = [thrust_from_current(i * 1e-5) for i in range(50)]
    assert all(b > a for a, b in zip(forces, forces[1:]))
    with pytest.raises(ValueError):
        thrust_from_current(-1e-6)
    with pytest.raises(ValueError):
        thrust_from_current(1e-4, thruster_index=5)


def test_thrust_params_validation():
    with pytest.raises(ValueError):
        ThrustParams(beta=(0.2, 0.6, 0.6, 0.6))
    with pytest.raises(ValueError):
        ThrustParams(d=0.0)


def test_mix_equilibrium():
    fz, tx, ty, tz = mix_forces(LIE_ACTIONS["equil"])
    assert fz == pytest.approx(0.4 * MN)
    assert (tx, ty, tz) == (0.0, 0.0, 0.0)


def test_mix_roll_action():
    fz, tx, ty, tz = mix_forces(LIE_ACTIONS["roll+"], InertialConfig(arm=0.01))
    assert ty == pytest.approx(-2.0e-6, rel=1e-12)
    assert tx == pytest.approx(0.0, abs=1e-20)
    assert tz == 0.0


@given(st.lists(st.floats(0, 0.3e-3), min_size=4, max_size=4))
def test_mixer_never_produces_yaw_torque(u):
    assert mix_forces(u)[3] == 0.0
    x = np.zeros(12)
    assert derivative(x, np.array(u))[WZ] == 0.0


def test_rotation_identity():
    np.testing.assert_array_equal(body_to_inertial((0, 0, 0)), np.eye(3))


def test_rotation_group_property():
    rng = np.random.default_rng(7)
    for angles in rng.uniform(-np.pi, np.pi, (1000, 3)):
        q = body_to_inertial(angles)
        assert np.abs(q.T @ q - np.eye(3)).max() < 1e-12
        assert abs(np.linalg.det(q) - 1.0) < 1e-12


def test_rotation_yaw_quarter_turn():
    q = body_to_inertial((math.pi / 2, 0, 0))
    np.testing.assert_allclose(q @ [1, 0, 0], [0, 1, 0], atol=1e-15)


def test_euler_rates_at_zero():
    assert euler_rates((0, 0, 0), (0.1, 0.2, 0.3)) == pytest.approx((0.3, 0.2, 0.1))
    assert euler_rates((0.3, 0.2, -0.4), (0, 0, 0)) == (0.0, 0.0, 0.0)


def test_euler_rates_rolled():
    assert euler_rates((0, 0, math.pi / 2), (0, 1, 0)) == pytest.approx((1.0, 0.0, 0.0), abs=1e-15)


def test_euler_rates_matrix_form():
    rng = np.random.default_rng(3)
    for _ in range(50):
        psi, theta, phi = rng.uniform(-1.2, 1.2, 3)
        w = rng.normal(size=3)
        c, s, t = math.cos, math.sin, math.tan
        winv = np.array([
            [0, s(phi), c(phi)],
            [0, c(phi) * c(theta), -s(phi) * c(theta)],
            [c(theta), s(phi) * s(theta), c(phi) * s(theta)],
        ]) / c(theta)
        np.testing.assert_allclose(euler_rates((psi, theta, phi), w), winv @ w, rtol=1e-12, atol=1e-14)


def test_euler_rates_singular():
    with pytest.raises(SingularityError):
        euler_rates((0, math.pi / 2, 0), (0, 0, 0))
    x = np.zeros(12)
    x[THETA] = -math.pi / 2
    with pytest.raises(SingularityError):
        derivative(x, HOVER_U)


def test_hover_is_equilibrium():
    np.testing.assert_allclose(derivative(np.zeros(12), HOVER_U), 0.0, atol=1e-12)


def test_free_fall():
    d = derivative(np.zeros(12), np.zeros(4))
    assert d[VZ] == pytest.approx(-NOMINAL.gravity)
    assert np.count_nonzero(d) == 1


def test_roll_action_acceleration():
    d = derivative(np.zeros(12), LIE_ACTIONS["roll+"])
    _, tx, ty, _ = mix_forces(LIE_ACTIONS["roll+"])
    assert d[WY] == pytest.approx(ty / NOMINAL.iyy, rel=1e-12)
    assert d[WX] == pytest.approx(tx / NOMINAL.ixx, abs=1e-9)
    assert d[WZ] == 0.0


def test_gravity_rotated_into_body_frame():
    x = np.zeros(12)
    x[THETA] = 0.3
    x[PHI] = -0.2
    d = derivative(x, np.zeros(4))
    q = body_to_inertial((x[PSI], x[THETA], x[PHI]))
    np.testing.assert_allclose(d[6:9], q.T @ [0, 0, -NOMINAL.gravity], rtol=1e-12)


def test_from_table_units():
    cfg = InertialConfig.from_table("imu_center")
    assert cfg.ixx == pytest.approx(1.984e-9)
    assert cfg.mass == pytest.approx(46e-6)


def test_config_validation():
    with pytest.raises(ValueError):
        InertialConfig(mass=0)
    with pytest.raises(ValueError):
        SimConfig(control_period=0.0105)
    with pytest.raises(ValueError):
        SimConfig(stop_angle=2.0)
    with pytest.raises(ValueError):
        SimConfig(integrator="midpoint")


def test_step_hover_noise_free():
    cfg = SimConfig(noise_sigma=0.0)
    out = step_control_period(np.zeros(12), HOVER_U, cfg, NOMINAL)
    np.testing.assert_allclose(out.next_state, 0.0, atol=1e-9)
    assert not out.crashed
    assert out.elapsed == pytest.approx(0.01)


def test_step_crashes_past_stop_angle():
    x = np.zeros(12)
    x[PHI] = math.radians(46)
    out = step_control_period(x, HOVER_U, SimConfig(noise_sigma=0.0), NOMINAL)
    assert out.crashed
    assert out.elapsed == 0.0


def test_step_deterministic():
    cfg = SimConfig()
    a = step_control_period(np.zeros(12), HOVER_U, cfg, NOMINAL, np.random.default_rng(11))
    b = step_control_period(np.zeros(12), HOVER_U, cfg, NOMINAL, np.random.default_rng(11))
    assert a.next_state.tobytes() == b.next_state.tobytes()


def test_noise_statistics():
    cfg = SimConfig(noise_sigma=0.01)
    rng = np.random.default_rng(5)
    draws = np.array([step_control_period(np.zeros(12), HOVER_U, cfg, NOMINAL, rng).next_state
                      for _ in range(2000)])
    assert np.std(draws) == pytest.approx(0.01, rel=0.05)


def test_rollout_equilibrium_no_crash():
    rec = rollout(np.zeros(12), lambda t, x: LIE_ACTIONS["equil"], 1000, SimConfig(noise_sigma=0.0))
    assert not rec.crashed
    assert rec.steps == 1000
    assert rec.elapsed == pytest.approx(10.0)


def test_rollout_guard_and_clamp(caplog):
    with pytest.raises(ValueError):
        rollout(np.zeros(12), lambda t, x: HOVER_U, 0)
    rec = rollout(np.zeros(12), lambda t, x: np.array([-1.0, 1.0, 0.1e-3, 0.1e-3]), 1,
                  SimConfig(noise_sigma=0.0))
    np.testing.assert_array_equal(rec.actions[0], [0.0, 0.3e-3, 0.1e-3, 0.1e-3])
    assert "clamped" in caplog.text


def test_rollout_reward_and_summary():
    rec = rollout(np.zeros(12), lambda t, x: HOVER_U, 5, SimConfig(noise_sigma=0.0),
                  reward_fn=lambda x: 1.0)
    assert rec.rewards == [1.0] * 5
    s = rec.summary()
    assert s["steps"] == 5 and s["episode_reward"] == 5.0 and not s["crashed"]


def test_rollouts_reproducible():
    def run():
        return rollout(np.zeros(12), lambda t, x: HOVER_U, 200, SimConfig(), NOMINAL,
                       np.random.default_rng(42))
    a, b = run(), run()
    assert np.array(a.next_states).tobytes() == np.array(b.next_states).tobytes()


def test_zero_thrust_energy_sanity():
    cfg = SimConfig(noise_sigma=0.0)
    rec = rollout(np.zeros(12), lambda t, x: np.zeros(4), 100, cfg)
    states = np.array(rec.next_states)
    assert np.all(states[:, WX:WZ + 1] == 0.0)
    np.testing.assert_allclose(states[-1, VZ], -NOMINAL.gravity * 1.0, rtol=1e-12)


def _endpoint(dt, integrator, period):
    x0 = np.zeros(12)
    x0[WX:WZ + 1] = (0.3, -0.2, 0.5)
    cfg = SimConfig(dt_dynamics=dt, control_period=period, noise_sigma=0.0, integrator=integrator)
    steps = int(round(1.0 / period))
    rec = rollout(x0, lambda t, x: HOVER_U, steps, cfg)
    assert not rec.crashed
    return rec.next_states[-1]


@pytest.mark.parametrize("integrator, dts, period, expected", [
    ("euler", (1e-3, 5e-4, 2.5e-4), 1e-2, 2.0),
    ("rk4", (1e-2, 5e-3, 2.5e-3), 1e-2, 16.0),
])
def test_integrator_order(integrator, dts, period, expected):
    x1, x2, x3 = (_endpoint(dt, integrator, period) for dt in dts)
    ratio = np.linalg.norm(x1 - x2) / np.linalg.norm(x2 - x3)
    assert ratio == pytest.approx(expected, rel=0.2)


def test_env_wrapper():
    env = sim.IonocraftEnv(SimConfig(noise_sigma=0.0))
    env.step(HOVER_U)
    assert env.t == pytest.approx(0.01)
    np.testing.assert_array_equal(env.reset(), np.zeros(12))
