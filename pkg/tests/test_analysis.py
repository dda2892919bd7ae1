import json

import numpy as np
import pytest

from iono_lab.analysis import (
    ATTITUDE_STATES, LinearSystem, analyze_yaw, attitude_subsystem, controllability_matrix,
    hover_linearization, linearize,
)
from iono_lab.sim import STATE_LABELS, InertialConfig

WZ = STATE_LABELS.index("wz")
PSI = STATE_LABELS.index("psi")


@pytest.fixture(scope="module")
def hover():
    return linearize()


def test_psi_row(hover):
    row = hover.a[PSI]
    assert np.count_nonzero(np.abs(row) > 1e-9) == 1
    assert row[WZ] == pytest.approx(1.0, abs=1e-9)


def test_no_yaw_input(hover):
    np.testing.assert_array_equal(hover.b[WZ], np.zeros(4))


def test_attitude_rows_match_hover_structure(hover):
    th, ph = STATE_LABELS.index("theta"), STATE_LABELS.index("phi")
    wx, wy = STATE_LABELS.index("wx"), STATE_LABELS.index("wy")
    assert hover.a[th, wy] == pytest.approx(1.0)
    assert hover.a[ph, wx] == pytest.approx(1.0)
    cfg = InertialConfig()
    np.testing.assert_allclose(hover.b[wx], cfg.arm * np.array([-1, 1, 1, -1]) / cfg.ixx, rtol=1e-6)
    np.testing.assert_allclose(hover.b[wy], cfg.arm * np.array([-1, -1, 1, 1]) / cfg.iyy, rtol=1e-6)


def test_fd_step_refinement():
    a1 = linearize(state_step=1e-5, input_step=1e-9)
    a2 = linearize(state_step=5e-6, input_step=5e-10)
    assert np.abs(a1.a - a2.a).max() < 1e-6
    assert np.abs(a1.b - a2.b).max() / np.abs(a1.b).max() < 1e-6


def test_analytic_vs_fd(hover):
    ref = hover_linearization()
    assert np.abs(ref.a - hover.a).max() < 1e-6
    assert np.abs(ref.b - hover.b).max() / np.abs(ref.b).max() < 1e-6
    assert analyze_yaw(ref).rank == analyze_yaw(hover).rank


def test_non_equilibrium_flagged():
    x = np.zeros(12)
    x[STATE_LABELS.index("wx")] = 0.5
    assert not linearize(x).is_equilibrium
    assert linearize().is_equilibrium


def test_controllability_matrix_trivial():
    b = np.array([[1.0], [2.0]])
    wc = controllability_matrix(LinearSystem(np.zeros((2, 2)), b, ("a", "b"), ("u",)))
    np.testing.assert_array_equal(wc, [[1.0, 0.0], [2.0, 0.0]])
    one = LinearSystem([[1.0]], [[1.0]], ("x",), ("u",))
    np.testing.assert_array_equal(controllability_matrix(one), [[1.0]])


def test_attitude_subsystem_rank_and_basis():
    rep = analyze_yaw(attitude_subsystem())
    assert rep.n == 6 and rep.rank == 4
    basis = np.array(rep.uncontrollable_basis)
    np.testing.assert_allclose(basis @ basis.T, np.eye(2), atol=1e-9)
    # span{psi, wz}
    expected = np.zeros((2, 6))
    expected[0, ATTITUDE_STATES.index("psi")] = 1
    expected[1, ATTITUDE_STATES.index("wz")] = 1
    np.testing.assert_allclose(np.abs(basis @ expected.T), np.eye(2), atol=1e-9)


def test_full_state_wz_uncontrollable(hover):
    rep = analyze_yaw(hover)
    assert rep.rank == 10
    e = np.zeros(12)
    e[WZ] = 1.0
    assert rep.projection_residual(e) < 1e-6


def test_double_integrator_fully_controllable():
    sys = LinearSystem([[0, 1], [0, 0]], [[0], [1]], ("x", "v"), ("u",))
    rep = analyze_yaw(sys)
    assert rep.rank == 2 and rep.uncontrollable_basis == []


def test_zero_input_rank_zero():
    sys = LinearSystem(np.eye(3), np.zeros((3, 2)), ("a", "b", "c"), ("u1", "u2"))
    rep = analyze_yaw(sys)
    assert rep.rank == 0 and len(rep.uncontrollable_basis) == 3


@pytest.mark.parametrize("c", [1e-6, -3.0, 1e4])
def test_rank_invariant_to_input_scaling(hover, c):
    scaled = LinearSystem(hover.a, c * hover.b)
    assert analyze_yaw(scaled).rank == analyze_yaw(hover).rank


def test_bad_inputs():
    with pytest.raises(ValueError):
        LinearSystem(np.zeros((2, 3)), np.zeros((2, 1)), ("a", "b"), ("u",))
    with pytest.raises(ValueError):
        LinearSystem(np.zeros((2, 2)), np.zeros((2, 1)), ("a", "a"), ("u",))
    with pytest.raises(ValueError):
        analyze_yaw(LinearSystem([[0.0]], [[1.0]], ("x",), ("u",)), tolerance=0)


def test_report_json(hover):
    d = json.loads(json.dumps(analyze_yaw(hover).to_dict()))
    assert d["rank"] == 10 and d["n"] == 12
    assert any(v["wz"] == 1.0 for v in d["uncontrollable_directions"])
