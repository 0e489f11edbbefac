"""Closed-loop simulation driver and the trajectory log."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import target as _target
from . import vehicle as _vehicle
from .controller import (RateHistory, mpf_control, roa_membership, sdot_law,
                         validate_gains)
from .errors import AssumptionViolated, NonFiniteState
from .path import FrameCache, build_arclength_table, frame_angular_velocity
from .scenario import Scenario, scenario_from_dict
from .so3 import cross
from .vehicle import AutopilotState, autopilot_mean_rate, sample_wind, step_autopilot

log = logging.getLogger(__name__)

LOG_VERSION = 1
COLUMNS = ("t,px,py,pz,ptx,pty,ptz,ep1,ep2,ep3,ep_norm,yw,zw,s,sdot,psi,er_norm,"
           "wref2,wref3,w2,w3,wtil_norm,etax,etay,etaz,V,roa").split(",")

# arrays kept in memory only (not in the CSV), used by the invariant checks
EXTRA_SHAPES = {
    "R_W": (3, 3),      # vehicle wind frame, inertial
    "R_D": (3, 3),      # desired transient frame, inertial
    "R_F": (3, 3),      # transport frame relative to the target
    "R_T": (3, 3),      # target attitude
    "pdot_t": (3,),
    "v_rot": (3,),      # omega_TI x p_d
    "omega_FT": (3,),   # inertial axes
    "omega_DI": (3,),   # inertial axes
    "wref_full": (3,),  # reference rate of {W} in {W}, roll first
}


@dataclass
class TrajectoryLog:
    """Per-step records on a uniform time grid.

    ``columns`` holds the CSV columns; ``extras`` holds rotation histories
    and rates that only exist for in-memory logs; ``meta`` holds the run
    constants needed to re-check a log read back from disk.
    """

    columns: dict
    meta: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def __getitem__(self, name) -> np.ndarray:
        return self.columns[name]

    def __len__(self) -> int:
        return len(self.columns["t"])

    def vec(self, *names) -> np.ndarray:
        return np.column_stack([self.columns[n] for n in names])

    @property
    def p(self):
        return self.vec("px", "py", "pz")

    @property
    def p_t(self):
        return self.vec("ptx", "pty", "ptz")

    @property
    def p_err(self):
        return self.vec("ep1", "ep2", "ep3")

    @property
    def eta(self):
        return self.vec("etax", "etay", "etaz")

    @property
    def p_d(self):
        """Virtual point relative to the target, inertial axes."""
        return self.p - self.p_t - self.p_err


class _Recorder:
    def __init__(self, n: int):
        self.cols = {c: np.zeros(n) for c in COLUMNS}
        self.extras = {k: np.zeros((n,) + s) for k, s in EXTRA_SHAPES.items()}


def _check_finite(k, *arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteState(f"non-finite state at step {k}", step=k)


def run_simulation(sc: Scenario, eta_hat_fn=None) -> TrajectoryLog:
    """Integrate the closed loop on a fixed grid ``t_k = k dt``.

    Each step: evaluate the transport frame at ``s``, the control law and the
    wind; log; advance the autopilot, vehicle and target; advance ``s`` with
    the progression law evaluated at the step midpoint.

    ``eta_hat_fn(p, t)`` optionally supplies a disturbance estimate used for
    compensation; it is not used by default.

    Raises
    ------
    AssumptionViolated
        If the vehicle cannot keep up with the path at some step, or strict
        ROA mode is on and the initial state is outside the region.
    NonFiniteState
        If the state blows up.
    """
    dt, N = sc.dt, sc.steps
    vs = sc.vehicle
    v_w = vs.speed
    cert = validate_gains(sc.gains, vs.speed_min, vs.speed_max, sc.roa.c1, sc.roa.c2)
    if not cert.ok:
        log.warning("gain condition not met (K=%.4g, lambda=%.3g)", cert.K, cert.lambda_mpf)

    table = build_arclength_table(sc.path)
    cache = FrameCache(table)
    profile = sc.target_profile
    ts = _target.initial_target_state(profile, sc.target_p0, sc.target_R0, 0.0)
    ap = AutopilotState(np.array(sc.omega0, dtype=float), sc.bandwidth)
    history = RateHistory()
    rec = _Recorder(N + 1)
    cols, ex = rec.cols, rec.extras
    s = sc.s0
    wind_free = sc.wind.empty

    for k in range(N + 1):
        t = k * dt
        frame = cache.frame_at(s)
        eta_hat = None if eta_hat_fn is None else np.asarray(eta_hat_fn(vs.p, t), dtype=float)
        try:
            out = mpf_control(vs.p, vs.R, v_w, ts, frame, sc.gains, sc.roa, history, dt, eta_hat)
        except AssumptionViolated as exc:
            exc.step = k
            raise
        e = out.errors
        _check_finite(k, vs.p, vs.R, e.p_err, out.omega_ref)
        roa_in = roa_membership(e.p_err, e.psi, sc.roa.c1, sc.roa.cbar)
        if k == 0 and sc.strict_roa and not roa_in:
            raise AssumptionViolated("initial state outside the certified region of attraction", step=0)
        eta = np.zeros(3) if wind_free else sample_wind(sc.wind, vs.p, t)
        w_applied = autopilot_mean_rate(ap, out.omega_ref, dt)
        ap_next, w_til = step_autopilot(ap, out.omega_ref, dt)

        row = (t, *vs.p, *ts.p, *e.p_err, math.sqrt(e.p_err @ e.p_err), e.y_w, e.z_w, s, out.sdot,
               e.psi, math.sqrt(e.e_R @ e.e_R), *out.omega_ref, *w_applied,
               math.sqrt(w_til @ w_til), *eta, e.V, 1.0 if roa_in else 0.0)
        for c, x in zip(COLUMNS, row):
            cols[c][k] = x
        R_F_I = ts.R @ frame.R
        ex["R_W"][k] = vs.R
        ex["R_D"][k] = out.frames.R_D_I
        ex["R_F"][k] = frame.R
        ex["R_T"][k] = ts.R
        ex["pdot_t"][k] = ts.pdot
        ex["v_rot"][k] = cross(ts.R @ ts.omega, ts.R @ frame.p)
        ex["omega_FT"][k] = R_F_I @ frame_angular_velocity(frame.k1, frame.k2, out.sdot)
        ex["omega_DI"][k] = out.omega_DI
        ex["wref_full"][k] = out.omega_full
        if k == N:
            break

        vs_next, vs_mid = _vehicle._advance(vs, w_applied, eta, dt)
        ts_next, ts_mid = _target._advance(ts, profile, dt)
        # progression of the virtual point: midpoint rule
        s_mid = s + 0.5 * dt * out.sdot
        pt = cache.point(s_mid)
        p_d = ts_mid.R @ pt.p
        v_rot = cross(ts_mid.R @ ts_mid.omega, p_d)
        eh = None if eta_hat_fn is None else np.asarray(eta_hat_fn(vs_mid.p, t + 0.5 * dt), dtype=float)
        sdot_mid = sdot_law(vs_mid.p - ts_mid.p - p_d, vs_mid.R[:, 0], ts_mid.pdot, v_rot,
                            ts_mid.R @ pt.tangent, sc.gains.kp, v_w, eh)
        s = s + dt * sdot_mid
        vs, ts, ap = vs_next, ts_next, ap_next

    meta = {
        "version": LOG_VERSION,
        "name": sc.name,
        "dt": dt,
        "v_w": v_w,
        "kr": sc.gains.kr,
        "kp": sc.gains.kp,
        "k1": sc.roa.k1,
        "c2": sc.roa.c2,
        "cbar": sc.roa.cbar,
        "lambda_mpf": cert.lambda_mpf,
        "gains_ok": int(cert.ok),
        "perfect": int(sc.perfect_autopilot),
        "bandwidth": sc.bandwidth,
        "wind": int(not wind_free),
    }
    return TrajectoryLog(cols, meta, ex)


def steady_state_residual(log_: TrajectoryLog, fraction: float = 0.2) -> float:
    """Mean position error norm over the final ``fraction`` of the run."""
    t = log_["t"]
    mask = t >= t[-1] * (1.0 - fraction) - 1e-12
    return float(np.mean(log_["ep_norm"][mask]))


def _sweep_one(args):
    cfg, base_dir, name, lam = args
    sc = scenario_from_dict(cfg, base_dir, name).with_bandwidth(lam)
    return steady_state_residual(run_simulation(sc))


def sweep_bandwidth(sc: Scenario, lambdas, workers: int = 1) -> list[tuple[float, float]]:
    """Steady-state residual for each autopilot bandwidth, in input order.

    ``math.inf`` in ``lambdas`` stands for a perfect autopilot. With
    ``workers > 1`` runs go to a process pool (the scenario must come from a
    config so it can be rebuilt in the workers).
    """
    lambdas = [float(x) for x in lambdas]
    if any(not lam > 0 for lam in lambdas):
        raise ValueError("bandwidths must be positive")
    if workers > 1 and sc.config is not None:
        jobs = [(sc.config, sc.base_dir, sc.name, lam) for lam in lambdas]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            residuals = list(pool.map(_sweep_one, jobs))
    else:
        residuals = [steady_state_residual(run_simulation(sc.with_bandwidth(lam))) for lam in lambdas]
    return list(zip(lambdas, residuals))
