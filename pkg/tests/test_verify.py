import copy

import numpy as np
import pytest

from conftest import base_config
from mpfsim.scenario import scenario_from_dict
from mpfsim.simulation import TrajectoryLog, run_simulation
from mpfsim.verify import (Tolerances, check_position_kinematics, check_psi_kinematics, check_lyapunov, position_kinematics_residual, psi_kinematics_residual,
                           lyapunov_mode, verify_invariants)


@pytest.fixture(scope="module")
def short_log():
    return run_simulation(scenario_from_dict(base_config(simulation={"duration": 20.0})))


def clone(log):
    return TrajectoryLog({k: v.copy() for k, v in log.columns.items()}, dict(log.meta),
                         {k: v.copy() for k, v in log.extras.items()})


def test_clean_run_passes(short_log):
    report = verify_invariants(short_log)
    assert report.ok, "\n".join(report.lines())
    assert not any(c.skipped for c in report.checks)


def test_corrupted_rotation_fails_orthonormality(short_log):
    bad = clone(short_log)
    bad.extras["R_W"][100] *= 1.0 + 1e-6
    report = verify_invariants(bad)
    assert not report["orthonormality"].passed
    assert not report.ok


def test_corrupted_position_fails_kinematics(short_log):
    bad = clone(short_log)
    bad.columns["ep1"][500] += 0.1
    assert not check_position_kinematics(bad, Tolerances()).passed
    assert check_position_kinematics(short_log, Tolerances()).passed


def test_corrupted_psi_fails_identity_and_kinematics(short_log):
    bad = clone(short_log)
    bad.columns["psi"][700] += 0.05
    report = verify_invariants(bad)
    assert not report["er_psi_identity"].passed
    assert not check_psi_kinematics(bad, Tolerances()).passed


def test_shifted_time_grid_fails(short_log):
    bad = clone(short_log)
    bad.columns["t"][10] += 1e-9
    assert not verify_invariants(bad)["time_grid"].passed


def test_residuals_shrink_quadratically():
    # from the nominal step; coarser steps do not resolve the start-up transient
    res = {}
    for dt in (0.01, 0.005):
        cfg = base_config(simulation={"duration": 5.0, "dt": dt})
        log = run_simulation(scenario_from_dict(cfg))
        res[dt] = (np.max(position_kinematics_residual(log)), np.max(psi_kinematics_residual(log)))
    for j in range(2):
        assert np.log2(res[0.01][j] / res[0.005][j]) > 1.9


def test_lyapunov_mode_selection(short_log):
    assert lyapunov_mode(short_log) == "iss"
    m = copy.deepcopy(short_log.meta)
    m["perfect"] = 1
    assert lyapunov_mode(TrajectoryLog(short_log.columns, m)) == "decay"
    m["wind"] = 1
    assert lyapunov_mode(TrajectoryLog(short_log.columns, m)) == "bounded"


def test_decay_mode_detects_finite_bandwidth_lag(short_log):
    # the autopilot lag violates a pure exponential bound at the start
    assert not check_lyapunov(short_log, Tolerances(), "decay").passed
    assert check_lyapunov(short_log, Tolerances(), "iss").passed


def test_checks_without_extras_are_skipped(short_log):
    bare = TrajectoryLog(short_log.columns, short_log.meta)
    report = verify_invariants(bare)
    assert report.ok
    assert report["orthonormality"].skipped and report["zero_twist"].skipped
    assert report["orthonormality"].line().startswith("SKIP")


def test_tolerance_overrides():
    tol = Tolerances.from_overrides(["pos_kin=10", "warmup=5"])
    assert tol.pos_kin == 10.0 and tol.warmup == 5 and isinstance(tol.warmup, int)
    with pytest.raises(ValueError):
        Tolerances.from_overrides(["nope=1"])
    with pytest.raises(ValueError):
        Tolerances.from_overrides(["pos_kin"])
