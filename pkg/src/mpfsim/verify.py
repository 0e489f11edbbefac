"""Invariant checks on a trajectory log.

Each check returns a :class:`CheckResult`; :func:`verify_invariants` runs the
whole suite and returns a :class:`Report`. Checks that need the rotation
histories (kept in ``log.extras``) are reported as skipped when those are
missing, e.g. for a CSV read without its sidecar file.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from .simulation import TrajectoryLog


@dataclass
class Tolerances:
    identity: float = 1e-12       # | |e_R|^2 - psi (1 - psi) |
    orthonormality: float = 1e-9  # |R'R - I|_F for every logged rotation
    twist: float = 1e-12          # |omega_FT . f1| in rad/s
    time_grid: float = 0.0        # |t_k - k dt|, exact by default
    pos_kin: float = 1e4          # position error kinematics: residual <= pos_kin dt^2 (m/s^3)
    psi_kin: float = 1e4          # error function kinematics: residual <= psi_kin dt^2 (1/s^3)
    decay_rel: float = 1e-2       # V(t) <= V(0) exp(-lambda t) (1 + decay_rel)
    v_ceiling: float = 1.0        # boundedness mode: sup V below this (|p_err| < 2 c1)
    warmup: int = 3               # samples skipped at the start of the residual checks

    @classmethod
    def from_overrides(cls, pairs) -> "Tolerances":
        """Build from ``["pos_kin=1e-3", ...]`` style overrides."""
        names = {f.name: f.type for f in fields(cls)}
        out = cls()
        for item in pairs:
            key, _, val = item.partition("=")
            key = key.strip()
            if key not in names or not val:
                raise ValueError(f"unknown tolerance {item!r}; known: {', '.join(names)}")
            setattr(out, key, int(val) if key == "warmup" else float(val))
        return out


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float = math.nan
    tol: float = math.nan
    detail: str = ""
    skipped: bool = False

    def line(self) -> str:
        status = "SKIP" if self.skipped else ("PASS" if self.passed else "FAIL")
        s = f"{status} {self.name}"
        if not math.isnan(self.value):
            s += f": {self.value:.3g} (tol {self.tol:.3g})"
        if self.detail:
            s += f" {self.detail}"
        return s


@dataclass
class Report:
    checks: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def lines(self) -> list[str]:
        return [c.line() for c in self.checks]


def _skip(name, why) -> CheckResult:
    return CheckResult(name, True, detail=f"({why})", skipped=True)


def _bound(name, value, tol, detail="") -> CheckResult:
    value = float(value)
    return CheckResult(name, bool(value <= tol), value, tol, detail)


def _has(log: TrajectoryLog, *names) -> bool:
    return all(n in log.extras for n in names)


def _interior(log: TrajectoryLog, warmup: int) -> np.ndarray:
    """Sample indices usable for central differences.

    Drops the first ``warmup`` samples, the last sample, and any sample next
    to a jump in the wind (held per step, so the state has a kink there).
    """
    n = len(log)
    k = np.arange(max(1, warmup), n - 1)
    eta = log.eta
    if len(k) and np.any(eta != 0.0):
        jump = np.any(eta[k] != eta[k - 1], axis=1) | np.any(eta[k + 1] != eta[k], axis=1)
        k = k[~jump]
    return k


def _central(x: np.ndarray, k: np.ndarray, dt: float) -> np.ndarray:
    return (x[k + 1] - x[k - 1]) / (2.0 * dt)


def check_time_grid(log, tol) -> CheckResult:
    t = log["t"]
    dt = log.meta.get("dt", t[1] - t[0] if len(t) > 1 else 0.0)
    err = np.max(np.abs(t - np.arange(len(t)) * dt)) if len(t) else 0.0
    return _bound("time_grid", err, tol.time_grid)


def check_finite(log, tol) -> CheckResult:
    bad = [c for c, v in log.columns.items() if not np.all(np.isfinite(v))]
    return CheckResult("finite", not bad, detail=f"non-finite: {', '.join(bad)}" if bad else "")


def check_er_psi_identity(log, tol) -> CheckResult:
    psi = log["psi"]
    err = np.max(np.abs(log["er_norm"] ** 2 - psi * (1.0 - psi)))
    return _bound("er_psi_identity", err, tol.identity)


def check_roll_rate(log, tol) -> CheckResult:
    if not _has(log, "wref_full"):
        return _skip("roll_rate_zero", "no reference rate history")
    return _bound("roll_rate_zero", np.max(np.abs(log.extras["wref_full"][:, 0])), 0.0)


def check_orthonormality(log, tol) -> CheckResult:
    names = [n for n in ("R_W", "R_D", "R_F", "R_T") if n in log.extras]
    if not names:
        return _skip("orthonormality", "no rotation history")
    worst, where = 0.0, ""
    eye = np.eye(3)
    for n in names:
        R = log.extras[n]
        err = np.linalg.norm(np.einsum("kji,kjl->kil", R, R) - eye, axis=(1, 2))
        dets = np.linalg.det(R)
        err = np.maximum(err, np.abs(dets - 1.0))
        if err.max() > worst:
            worst, where = float(err.max()), f"[{n} @ {int(np.argmax(err))}]"
    return _bound("orthonormality", worst, tol.orthonormality, where if worst > tol.orthonormality else "")


def check_zero_twist(log, tol) -> CheckResult:
    if not _has(log, "R_F", "R_T", "omega_FT"):
        return _skip("zero_twist", "no frame history")
    f1 = np.einsum("kij,kj->ki", log.extras["R_T"], log.extras["R_F"][:, :, 0])
    twist = np.abs(np.einsum("ki,ki->k", f1, log.extras["omega_FT"]))
    return _bound("zero_twist", twist.max(), tol.twist)


def position_kinematics_residual(log, warmup: int = 3) -> np.ndarray:
    """Residual of the position error kinematics at interior samples.

    The left side is the central difference of the logged error, seen from
    axes rotating with the transport frame; the right side is the five-term
    model evaluated from the logged state.
    """
    ex = log.extras
    k = _interior(log, warmup)
    dt = log.meta["dt"]
    p_err = log.p_err
    om = ex["omega_FT"][k]
    lhs = _central(p_err, k, dt) - np.cross(om, p_err[k])
    w1 = ex["R_W"][k, :, 0]
    f1 = np.einsum("kij,kj->ki", ex["R_T"][k], ex["R_F"][k, :, 0])
    rhs = (log.meta["v_w"] * w1 - log["sdot"][k, None] * f1 - ex["pdot_t"][k] - ex["v_rot"][k]
           - np.cross(om, p_err[k]) + log.eta[k])
    return np.linalg.norm(lhs - rhs, axis=1)


def psi_kinematics_residual(log, warmup: int = 3) -> np.ndarray:
    """Residual of the error function kinematics at interior samples.

    The vehicle rate at a sample is the mean of the two adjacent applied
    rates (it is held piecewise constant); the rate of the desired frame comes
    from a central difference of its logged attitude.
    """
    ex = log.extras
    k = _interior(log, warmup)
    dt = log.meta["dt"]
    RW, RD = ex["R_W"], ex["R_D"]
    A = np.einsum("kji,kjl->kil", RD[k], RD[k + 1] - RD[k - 1]) / (2.0 * dt)
    A = 0.5 * (A - np.transpose(A, (0, 2, 1)))
    w_D = np.stack([A[:, 2, 1], A[:, 0, 2], A[:, 1, 0]], axis=1)  # {D} wrt {I}, in {D}
    R_err = np.einsum("kji,kjl->kil", RD[k], RW[k])
    w_D_W = np.einsum("kji,kj->ki", R_err, w_D)
    e = 0.5 * np.stack([R_err[:, 0, 2], -R_err[:, 0, 1]], axis=1)
    w = np.column_stack([log["w2"], log["w3"]])
    w_W = 0.5 * (w[k - 1] + w[k])
    rhs = np.einsum("ki,ki->k", e, w_W - w_D_W[:, 1:])
    return np.abs(_central(log["psi"], k, dt) - rhs)


def check_position_kinematics(log, tol) -> CheckResult:
    if not _has(log, "R_W", "R_T", "R_F", "omega_FT", "pdot_t", "v_rot"):
        return _skip("position_kinematics_residual", "no frame history")
    r = position_kinematics_residual(log, tol.warmup)
    return _bound("position_kinematics_residual", r.max() if len(r) else 0.0, tol.pos_kin * log.meta["dt"] ** 2)


def check_psi_kinematics(log, tol) -> CheckResult:
    if not _has(log, "R_W", "R_D"):
        return _skip("psi_kinematics_residual", "no frame history")
    r = psi_kinematics_residual(log, tol.warmup)
    return _bound("psi_kinematics_residual", r.max() if len(r) else 0.0, tol.psi_kin * log.meta["dt"] ** 2)


def lyapunov_mode(log) -> str:
    """``decay`` without any disturbance, ``iss`` with autopilot lag only,
    ``bounded`` when wind acts."""
    if log.meta.get("wind", int(np.any(log.eta != 0.0))):
        return "bounded"
    if log.meta.get("perfect", 0):
        return "decay"
    return "iss"


def check_lyapunov(log, tol, mode: Optional[str] = None) -> CheckResult:
    mode = mode or lyapunov_mode(log)
    V, t = log["V"], log["t"]
    name = f"lyapunov_{mode}"
    if mode == "bounded":
        return _bound(name, np.max(V), tol.v_ceiling)
    lam = log.meta.get("lambda_mpf")
    if lam is None or not lam > 0:
        return _skip(name, "no certified decay rate")
    envelope = V[0] * np.exp(-lam * t)
    if mode == "decay":
        ratio = np.max(V / (envelope * (1.0 + tol.decay_rel)))
        return _bound(name, ratio, 1.0, "(V / certified envelope)")
    # ISS: envelope plus the gain on the autopilot tracking error
    eps = float(np.max(log["wtil_norm"] ** 2))
    ratio = np.max(V / (envelope * (1.0 + tol.decay_rel) + eps / (2.0 * log.meta["kr"] * lam)))
    return _bound(name, ratio, 1.0, "(V / ISS envelope)")


def check_roa(log, tol, mode: Optional[str] = None) -> CheckResult:
    """A run that starts in the certified region stays there.

    Without disturbances the level ``cbar`` itself must hold. With autopilot
    lag the level grows by the ISS gain ``eps / (2 kr lambda)``, where eps
    bounds the squared tracking error; with wind no level is certified and
    the check is skipped (the Lyapunov boundedness check covers it).
    """
    mode = mode or lyapunov_mode(log)
    roa = log["roa"]
    if roa[0] != 1.0:
        return _skip("roa_containment", "initial state outside the certified region")
    if mode == "bounded":
        return _skip("roa_containment", "no certified level under wind")
    if mode == "decay":
        first_out = np.flatnonzero(roa != 1.0)
        detail = f"(left at t={log['t'][first_out[0]]:.6g})" if len(first_out) else ""
        return CheckResult("roa_containment", not len(first_out), detail=detail)
    lam = log.meta.get("lambda_mpf")
    if lam is None or not lam > 0:
        return _skip("roa_containment", "no certified decay rate")
    eps = float(np.max(log["wtil_norm"] ** 2))
    level = log.meta["cbar"] + eps / (2.0 * log.meta["kr"] * lam)
    return _bound("roa_containment", np.max(log["V"]), level, "(ISS-enlarged level)")


def check_sdot_bound(log, tol) -> CheckResult:
    if not _has(log, "pdot_t", "v_rot"):
        return _skip("sdot_bound", "no target history")
    bound = (log.meta["kp"] * log["ep_norm"] + log.meta["v_w"]
             + np.linalg.norm(log.extras["pdot_t"], axis=1) + np.linalg.norm(log.extras["v_rot"], axis=1))
    excess = np.max(np.abs(log["sdot"]) - bound * (1.0 + 1e-12))
    return CheckResult("sdot_bound", bool(excess <= 0.0), detail=f"(max excess {excess:.3g})")


def verify_invariants(log: TrajectoryLog, tol: Optional[Tolerances] = None,
                      lyapunov: Optional[str] = None) -> Report:
    """Run the invariant suite; ``lyapunov`` forces a mode (decay/iss/bounded)."""
    tol = tol or Tolerances()
    checks = [
        check_time_grid(log, tol),
        check_finite(log, tol),
        check_er_psi_identity(log, tol),
        check_roll_rate(log, tol),
        check_orthonormality(log, tol),
        check_zero_twist(log, tol),
        check_position_kinematics(log, tol),
        check_psi_kinematics(log, tol),
        check_lyapunov(log, tol, lyapunov),
        check_roa(log, tol, lyapunov),
        check_sdot_bound(log, tol),
    ]
    return Report(checks)
