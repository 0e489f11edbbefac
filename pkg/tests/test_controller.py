import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mpfsim.controller import (FrameRateInputs, Gains, RateHistory, RoaParams, attitude_error,
                               frame_rates_backward, frame_rates_numeric, lyapunov_bounds,
                               lyapunov_value, mpf_control, omega_ref, position_error,
                               position_error_rate, projected_cross_track, psi_rate, roa_membership,
                               sdot_law, steady_state_frame, transient_frame, validate_gains)
from mpfsim.errors import AssumptionViolated, SingularSecondColumn
from mpfsim.path import FrameCache, PathSpec, TransportFrame, build_arclength_table
from mpfsim.so3 import exp_so3, orthonormality_error, rot_zyx
from mpfsim.target import constant_profile, initial_target_state, benchmark_maneuver_profile

GAINS = Gains(4.0, 2.0, 1.0)
ROA = RoaParams()


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([[1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
                     [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
                     [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)]])


def frame_from(R, p=np.zeros(3), k1=0.0, k2=0.0):
    return TransportFrame(0.0, p, R[:, 0], R[:, 1], R[:, 2], k1, k2)


# -- errors -------------------------------------------------------------------

def test_position_error_examples():
    fr = frame_from(np.eye(3))
    p_err, p_x = position_error([1, 2, 3], [1, 2, 3], [0, 0, 0], fr, np.eye(3))
    assert np.array_equal(p_err, np.zeros(3)) and np.array_equal(p_x, np.zeros(3))
    p_err, p_x = position_error([1, 0, 0], [0, 0, 0], [0, 0, 0], fr, np.eye(3))
    assert np.allclose(p_x, 0.0)


def test_cross_track_projection_identity():
    rng = np.random.default_rng(5)
    for _ in range(100):
        R_F, R_T = random_rotation(rng), random_rotation(rng)
        fr = frame_from(R_F)
        p, pt, pd = rng.normal(size=(3, 3)) * 20
        p_err, p_x = position_error(p, pt, pd, fr, R_T)
        f = R_T @ R_F
        manual = (p_err @ f[:, 1]) * f[:, 1] + (p_err @ f[:, 2]) * f[:, 2]
        assert np.allclose(p_x, manual, atol=1e-12)
        assert abs(p_x @ f[:, 0]) < 1e-12


# -- steady-state frame -------------------------------------------------------

def test_stationary_target_gives_identity():
    rng = np.random.default_rng(6)
    for _ in range(20):
        R = random_rotation(rng)
        assert np.array_equal(steady_state_frame(np.zeros(3), np.zeros(3), 15.0, R), np.eye(3))


def test_target_velocity_along_f1_gives_identity():
    R = rot_zyx(0.1, 0.2, 0.3)
    out = steady_state_frame(4.0 * R[:, 0], np.zeros(3), 15.0, R)
    assert np.allclose(out, np.eye(3), atol=1e-15)


def test_steady_state_direction_matches_velocity_balance():
    # with zero error the vehicle must fly v_w w1 = sdot f1 + v_path
    rng = np.random.default_rng(7)
    v_w = 15.0
    for _ in range(200):
        R = random_rotation(rng)
        v_path = rng.normal(size=3) * 4.0
        lat = v_path - (v_path @ R[:, 0]) * R[:, 0]
        if np.linalg.norm(lat) >= v_w:
            continue
        Wd = steady_state_frame(v_path, np.zeros(3), v_w, R)
        assert orthonormality_error(Wd) <= 1e-12 and np.linalg.det(Wd) == pytest.approx(1, abs=1e-12)
        assert Wd[2, 1] == 0.0
        a = v_path @ R[:, 0]
        sdot = math.sqrt(v_w**2 - lat @ lat) - a
        w_bar = (sdot * R[:, 0] + v_path) / v_w
        assert sdot == pytest.approx(v_w * Wd[0, 0] - a, abs=1e-12)
        assert (R @ Wd[:, 0]) @ w_bar == pytest.approx(1.0, abs=1e-9)


def test_steady_state_assumption_and_singular_column():
    R = np.eye(3)
    with pytest.raises(AssumptionViolated):
        steady_state_frame([0, 16.0, 0], np.zeros(3), 15.0, R)
    # lateral velocity only along f3 with magnitude v_w -> w_d1 = f3 (just inside the limit)
    v = [0, 0, 15.0 * math.sqrt(1 - 1e-13)]
    with pytest.raises(SingularSecondColumn):
        steady_state_frame(v, np.zeros(3), 15.0, R, fallback=False)
    out = steady_state_frame(v, np.zeros(3), 15.0, R)
    assert orthonormality_error(out) < 1e-9


# -- transient frame, cross-track ---------------------------------------------

def test_transient_frame_examples():
    assert np.allclose(transient_frame(0.0, 0.0, 1.0), np.eye(3), atol=0)
    far = transient_frame(1e9, 0.0, 1.0)
    assert np.allclose(far[:, 0], [0, -1, 0], atol=1e-8)
    with pytest.raises(ValueError):
        transient_frame(1.0, 1.0, 0.0)


@given(st.floats(-1e4, 1e4), st.floats(-1e4, 1e4), st.floats(1e-3, 100))
def test_transient_frame_is_rotation(y, z, alpha):
    R = transient_frame(y, z, alpha)
    assert np.abs(R.T @ R - np.eye(3)).max() <= 1e-12
    assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)
    assert R[2, 1] == 0.0


def test_projected_cross_track():
    R = rot_zyx(0.3, -0.2, 1.0)
    assert projected_cross_track(np.zeros(3), R) == (0.0, 0.0)
    y, z = projected_cross_track(2.0 * R[:, 1], R)
    assert y == pytest.approx(2.0) and z == pytest.approx(0.0, abs=1e-15)
    rng = np.random.default_rng(8)
    for _ in range(100):
        p = rng.normal(size=3)
        y, z = projected_cross_track(p, random_rotation(rng))
        assert math.hypot(y, z) <= np.linalg.norm(p) + 1e-12


# -- attitude error -----------------------------------------------------------

def test_attitude_error_examples():
    R = rot_zyx(0.1, 0.2, 0.3)
    _, psi, e = attitude_error(R, R)
    assert psi == pytest.approx(0.0, abs=1e-15) and np.allclose(e, 0, atol=1e-15)
    flipped = R @ rot_zyx(0, 0, math.pi)
    _, psi, _ = attitude_error(flipped, R)
    assert psi == pytest.approx(1.0, abs=1e-15)


def test_error_function_identity_random():
    rng = np.random.default_rng(9)
    for _ in range(2000):
        _, psi, e = attitude_error(random_rotation(rng), random_rotation(rng))
        assert abs(e @ e - psi * (1 - psi)) <= 1e-12
        assert 0.0 <= psi <= 1.0


# -- progression law ----------------------------------------------------------

def test_sdot_examples():
    f1 = np.array([1.0, 0, 0])
    assert sdot_law(np.zeros(3), f1, np.zeros(3), np.zeros(3), f1, 4.0, 15.0) == 15.0
    assert sdot_law(np.zeros(3), np.array([0, 1.0, 0]), np.zeros(3), np.zeros(3), f1, 4.0, 15.0) == 0.0
    assert sdot_law(np.zeros(3), f1, np.zeros(3), np.zeros(3), f1, 4.0, 15.0, eta_hat=[1.0, 0, 0]) == 16.0


def test_sdot_at_benchmark_initial_state():
    table = build_arclength_table(PathSpec.lemniscate())
    frame = FrameCache(table).frame_at(0.0)
    ts = initial_target_state(benchmark_maneuver_profile(), [0, 0, 5], rot_zyx(0, 0, math.pi / 4))
    out = mpf_control([-50.0, 0, 0], rot_zyx(0, 0, math.pi / 2), 15.0, ts, frame, GAINS, ROA)
    # hand evaluation: p_err . f1 = -50/sqrt2, w1 . f1 = 1/sqrt2, target speed 3 sqrt5 along f1,
    # and the rotation term vanishes because omega_TI is parallel to the path point
    assert out.sdot == pytest.approx(-185.0 / math.sqrt(2) - 3.0 * math.sqrt(5), abs=1e-10)
    assert np.linalg.norm(out.errors.p_err) == pytest.approx(math.sqrt(5025 - 2500 * math.sqrt(2)), rel=1e-12)
    assert roa_membership(out.errors.p_err, out.errors.psi, ROA.c1, ROA.cbar)


# -- numeric frame rates ------------------------------------------------------

def test_frame_rates_numeric():
    R = rot_zyx(0.2, 0.4, -0.3)
    assert np.array_equal(frame_rates_numeric(R, R, R, 0.01), np.zeros(3))
    w0 = 0.7
    errs = []
    for dt in (0.02, 0.01):
        Rs = [exp_so3([0, 0, w0 * t]) @ exp_so3([0.3 * t, 0, 0]) for t in (1 - dt, 1.0, 1 + dt)]
        exact = exp_so3([-0.3, 0, 0]) @ np.array([0, 0, w0]) + np.array([0.3, 0, 0])
        errs.append(np.linalg.norm(frame_rates_numeric(*Rs, dt) - exact))
    assert errs[0] / errs[1] > 3.8  # second order


def test_frame_rates_backward_orders():
    w = np.array([0.1, -0.4, 0.25])
    errs = []
    for dt in (0.02, 0.01, 0.005):
        hist = [exp_so3(w * k * dt) for k in range(3)]
        errs.append(np.linalg.norm(frame_rates_backward(hist, dt) - w))
        assert np.array_equal(frame_rates_backward(hist[:1], dt), np.zeros(3))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert ratios.min() > 3.8


def test_frame_rate_of_transport_frame_matches_closed_form():
    table = build_arclength_table(PathSpec.lemniscate())
    cache = FrameCache(table)
    sdot, dt = 15.0, 1e-3
    for s in (3.0, 50.0, 131.0, 200.0):
        Rs = [cache.frame_at(s + sdot * h).R for h in (-dt, 0.0, dt)]
        fr = cache.frame_at(s)
        assert np.allclose(frame_rates_numeric(*Rs, dt), [0, -sdot * fr.k2, sdot * fr.k1], atol=1e-6)


def test_rate_history_warms_up():
    h = RateHistory()
    R = exp_so3([0, 0, 0.01])
    a, b = h.rates(np.eye(3), np.eye(3), 0.01)
    assert np.array_equal(a, np.zeros(3)) and np.array_equal(b, np.zeros(3))
    h.push(np.eye(3), np.eye(3))
    a, _ = h.rates(R, R, 0.01)
    assert a[2] == pytest.approx(1.0, rel=1e-4)


# -- angular rate reference ---------------------------------------------------

def zero_rates():
    z = np.zeros(3)
    return FrameRateInputs(z, z, z, z, np.eye(3), np.eye(3), np.eye(3))


def test_omega_ref_examples():
    assert np.array_equal(omega_ref(np.zeros(2), np.eye(3), zero_rates(), 2.0), [0, 0])
    out = omega_ref(np.array([0.1, -0.2]), np.eye(3), zero_rates(), 2.0)
    assert np.allclose(out, [-0.2, 0.4]) and out.shape == (2,)


def test_omega_ref_cancels_frame_rate_when_aligned():
    # with R_err = I and zero error, the vehicle must rotate exactly like {D}
    rates = FrameRateInputs(np.array([0.0, 0.1, 0.2]), np.array([0, -0.05, 0.3]), np.zeros(3),
                            np.zeros(3), rot_zyx(0, 0, 0.3), np.eye(3), np.eye(3))
    w = omega_ref(np.zeros(2), np.eye(3), rates, 2.0)
    assert np.allclose(w, rates.omega_DI_D()[1:])


def test_psi_rate_with_reference_rate():
    # substituting the reference rate into the error kinematics gives -kr |e|^2
    rng = np.random.default_rng(10)
    for _ in range(50):
        R_err = random_rotation(rng)
        _, psi, e = attitude_error(R_err, np.eye(3))
        w_D = rng.normal(size=3)
        rates = FrameRateInputs(w_D, np.zeros(3), np.zeros(3), np.zeros(3),
                                np.eye(3), np.eye(3), np.eye(3))
        w = np.concatenate([[(R_err.T @ w_D)[0]], omega_ref(e, R_err, rates, 2.0)])
        assert psi_rate(e, w, R_err.T @ w_D) == pytest.approx(-2.0 * (e @ e), abs=1e-12)


# -- certificates -------------------------------------------------------------

def eq_condition(kp, kr, alpha, v_min, v_max, c1, c2):
    K = min(kp, v_min / math.sqrt(alpha**2 + c1**2))
    return K, K * kr > v_max**2 / (c1**2 * (1 - 2 * c2) ** 2)


def test_validate_gains_benchmark():
    cert = validate_gains(GAINS, 15.0, 15.0, 60.0, 0.05)
    K, lam, ok = cert
    assert K == pytest.approx(15 / math.sqrt(3601), rel=1e-15)
    assert K == pytest.approx(0.24997, abs=1e-5)
    assert 225 / (3600 * 0.81) == pytest.approx(0.0772, abs=1e-4)
    assert ok is True and lam > 0
    # decay rate: smallest eigenvalue of the 2x2 decay matrix over the largest bound weight
    k1 = 1 / (4 * 3600)
    a, d, b = 2 * k1 * K, 1.0, -2 * k1 * 15 / 0.9
    lam_min = (a + d) / 2 - math.sqrt(((a - d) / 2) ** 2 + b * b)
    assert lam == pytest.approx(lam_min / max(k1, 1 / 0.95), rel=1e-9)


def test_validate_gains_zero_attitude_gain_fails():
    gains = SimpleNamespace(kp=4.0, kr=0.0, alpha=1.0)
    assert validate_gains(gains, 15, 15, 60, 0.05).ok is False


def test_validate_gains_grid():
    for c1 in np.geomspace(1.0, 500.0, 60):
        for kr in (0.05, 0.5, 2.0):
            gains = Gains(4.0, kr, 1.0)
            _, expected = eq_condition(4.0, kr, 1.0, 15, 15, c1, 0.05)
            cert = validate_gains(gains, 15, 15, c1, 0.05)
            assert cert.ok == (expected and cert.lambda_mpf > 0)
            if expected:
                assert cert.lambda_mpf > 0


def test_validate_gains_domain():
    with pytest.raises(ValueError):
        validate_gains(GAINS, 15, 15, 60, 0.5)


def test_gains_and_roa_validation():
    with pytest.raises(ValueError):
        Gains(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        RoaParams(c2=0.6)
    with pytest.raises(ValueError):
        RoaParams(cbar=0.5)
    assert RoaParams(c1=60).k1 == pytest.approx(1 / 14400)


def test_roa_membership():
    assert roa_membership(np.zeros(3), 0.0, 60, 0.49)
    assert not roa_membership(np.zeros(3), 0.6, 60, 0.49)
    # exactly on the boundary (closed set)
    assert roa_membership(np.array([60.0, 0, 0]), 0.24, 60, 0.49)


def test_lyapunov_value_and_bounds():
    assert lyapunov_value(np.zeros(3), 0.0, 1e-4) == 0.0
    c1 = 60.0
    k1 = 1 / (4 * c1**2)
    assert lyapunov_value(np.array([c1, 0, 0]), 0.25, k1) == pytest.approx(0.5)
    rng = np.random.default_rng(11)
    for _ in range(500):
        p = rng.normal(size=3) * 30
        _, psi, e = attitude_error(random_rotation(rng), np.eye(3))
        if psi > ROA.c2:
            continue
        lo, hi = lyapunov_bounds(np.linalg.norm(p), np.linalg.norm(e), k1, ROA.c2)
        V = lyapunov_value(p, psi, k1)
        assert lo - 1e-15 <= V <= hi + 1e-15


# -- full law -----------------------------------------------------------------

def test_on_path_equilibrium():
    line = PathSpec.straight_line([0, 0, 0], [1, 0, 0], 100.0)
    frame = FrameCache(build_arclength_table(line)).frame_at(10.0)
    ts = initial_target_state(constant_profile(), [0, 0, 0], np.eye(3))
    out = mpf_control([10.0, 0, 0], np.eye(3), 15.0, ts, frame, GAINS, ROA)
    assert out.sdot == pytest.approx(15.0, abs=1e-12)
    assert np.allclose(out.omega_ref, 0.0, atol=1e-12) and out.errors.V < 1e-24
    assert out.omega_full[0] == 0.0


def test_assumption_violation_from_target_speed():
    line = PathSpec.straight_line([0, 0, 0], [1, 0, 0], 100.0)
    frame = FrameCache(build_arclength_table(line)).frame_at(10.0)
    ts = initial_target_state(constant_profile([0, 20.0, 0]), [0, 0, 0], np.eye(3))
    with pytest.raises(AssumptionViolated):
        mpf_control([10.0, 0, 0], np.eye(3), 15.0, ts, frame, GAINS, ROA)


def test_position_error_rate_terms():
    z = np.zeros(3)
    w1 = np.array([0, 1.0, 0])
    f1 = np.array([1.0, 0, 0])
    out = position_error_rate(w1, 15.0, 3.0, f1, z, z, z, z)
    assert np.allclose(out, [-3, 15, 0])
    out = position_error_rate(w1, 15.0, 0.0, f1, z, z, np.array([0, 0, 1.0]), np.array([1.0, 0, 0]))
    assert np.allclose(out, [0, 14, 0])


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, 3, elements=st.floats(-40, 40)), st.floats(-math.pi, math.pi))
def test_control_outputs_well_formed(offset, yaw):
    table = build_arclength_table(PathSpec.lemniscate())
    frame = FrameCache(table).frame_at(20.0)
    ts = initial_target_state(benchmark_maneuver_profile(), [0, 0, 5], rot_zyx(0, 0, 0.7))
    out = mpf_control(np.array([0, 0, 5.0]) + offset, rot_zyx(0, 0, yaw), 15.0, ts, frame, GAINS, ROA)
    R_D = out.frames.R_D_I
    assert orthonormality_error(R_D) < 1e-12
    assert out.frames.R_D_Wd[2, 1] == 0.0 and out.frames.R_Wd_F[2, 1] == 0.0
    e = out.errors
    assert abs(e.e_R @ e.e_R - e.psi * (1 - e.psi)) < 1e-12
    assert np.all(np.isfinite(out.omega_ref)) and out.omega_ref.shape == (2,)
