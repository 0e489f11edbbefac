"""Moving path following control law.

Errors, desired frames, the virtual-point progression law and the angular
rate reference for the autopilot, plus the gain and region-of-attraction
certificates and the Lyapunov function used to monitor convergence.

Frame naming follows ``R_A_B`` = rotation from {A} to {B}: ``R_F_T`` maps
transport-frame coordinates to target coordinates, and so on. Unless stated
otherwise vectors are inertial.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import AssumptionViolated, SingularSecondColumn
from .path import TransportFrame, frame_angular_velocity
from .so3 import cross, vee

E1 = np.array([1.0, 0.0, 0.0])


@dataclass(frozen=True)
class Gains:
    kp: float  # 1/s
    kr: float  # rad/s
    alpha: float  # m

    def __post_init__(self):
        if not (self.kp > 0 and self.kr > 0 and self.alpha > 0):
            raise ValueError("gains kp, kr and alpha must be strictly positive")


@dataclass(frozen=True)
class RoaParams:
    """Region-of-attraction constants; ``k1 = 1 / (4 c1^2)``."""

    c1: float = 60.0
    c2: float = 0.05
    cbar: float = 0.49

    def __post_init__(self):
        if not self.c1 > 0:
            raise ValueError("c1 must be positive")
        if not 0 < self.c2 < 0.5:
            raise ValueError("c2 must lie in (0, 1/2)")
        if not 0 < self.cbar < 0.5:
            raise ValueError("cbar must lie in (0, 1/2)")

    @property
    def k1(self) -> float:
        return 1.0 / (4.0 * self.c1**2)


@dataclass(frozen=True)
class MpfErrors:
    p_err: np.ndarray
    p_cross: np.ndarray
    y_w: float
    z_w: float
    R_err: np.ndarray
    psi: float
    e_R: np.ndarray
    V: float


@dataclass(frozen=True)
class DesiredFrames:
    R_Wd_F: np.ndarray
    R_D_Wd: np.ndarray
    R_D_I: np.ndarray


@dataclass(frozen=True)
class FrameRateInputs:
    """Relative angular velocities of the frame chain T -> F -> Wd -> D.

    Each rate is expressed in the first frame of its pair, and the three
    rotations are what is needed to bring them all into {D}.
    """

    omega_TI_T: np.ndarray
    omega_FT_F: np.ndarray
    omega_WdF_Wd: np.ndarray
    omega_DWd_D: np.ndarray
    R_F_T: np.ndarray
    R_Wd_F: np.ndarray
    R_D_Wd: np.ndarray

    def omega_DI_D(self) -> np.ndarray:
        """Angular velocity of {D} relative to {I}, in {D}."""
        R_D_Wd = self.R_D_Wd
        R_D_F = self.R_Wd_F @ R_D_Wd
        R_D_T = self.R_F_T @ R_D_F
        return (R_D_T.T @ self.omega_TI_T + R_D_F.T @ self.omega_FT_F
                + R_D_Wd.T @ self.omega_WdF_Wd + self.omega_DWd_D)


@dataclass(frozen=True)
class ControlOutput:
    sdot: float
    omega_ref: np.ndarray  # rates about w2, w3
    errors: Optional[MpfErrors] = None
    frames: Optional[DesiredFrames] = None
    omega_DI: Optional[np.ndarray] = None  # inertial

    @property
    def omega_full(self) -> np.ndarray:
        """Reference angular velocity of {W} in {W}; the roll rate is zero."""
        return np.array([0.0, self.omega_ref[0], self.omega_ref[1]])


@dataclass(frozen=True)
class GainCertificate:
    K: float
    lambda_mpf: float
    ok: bool
    k1: float
    W: np.ndarray
    M2: np.ndarray

    def __iter__(self):
        return iter((self.K, self.lambda_mpf, self.ok))


def position_error(p, p_t, p_d, frame: TransportFrame, R_T_I):
    """Position error to the virtual point and its cross-track part.

    ``p_d`` is the path point already rotated into inertial axes; ``frame``
    is in target coordinates and is rotated here with ``R_T_I``.
    """
    p_err = np.asarray(p, dtype=float) - np.asarray(p_t, dtype=float) - np.asarray(p_d, dtype=float)
    f1 = R_T_I @ frame.f1
    return p_err, p_err - (p_err @ f1) * f1


def steady_state_frame(pdot_t, v_rot, v_w: float, R_F_I, fallback: bool = True) -> np.ndarray:
    """Rotation from the steady-state desired frame {Wd} to {F}.

    ``pdot_t`` is the target velocity and ``v_rot`` the velocity of the path
    point induced by the target rotation (omega_TI x p_d), both in the same
    axes as the columns of ``R_F_I``.

    Raises
    ------
    AssumptionViolated
        If the cross-track part of the path velocity reaches ``v_w``.
    SingularSecondColumn
        If w_d1 lies along f3 and ``fallback`` is off.
    """
    v = np.asarray(pdot_t, dtype=float) + np.asarray(v_rot, dtype=float)
    w21 = (v @ R_F_I[:, 1]) / v_w
    w31 = (v @ R_F_I[:, 2]) / v_w
    lat = w21 * w21 + w31 * w31
    if lat >= 1.0:
        raise AssumptionViolated(
            f"vehicle speed {v_w} cannot cancel the lateral path velocity {math.sqrt(lat) * v_w:.6g}")
    w11 = math.sqrt(1.0 - lat)
    wd1 = np.array([w11, w21, w31])
    n2 = w11 * w11 + w21 * w21
    if n2 < 1e-12:
        if not fallback:
            raise SingularSecondColumn("steady-state direction is parallel to f3")
        wd2 = E1 - wd1[0] * wd1
        wd2 = wd2 / np.linalg.norm(wd2)
    else:
        n = math.sqrt(n2)
        wd2 = np.array([-w21 / n, w11 / n, 0.0])
    return np.array([wd1, wd2, cross(wd1, wd2)]).T


def transient_frame(y_w: float, z_w: float, alpha: float) -> np.ndarray:
    """Rotation from the approach frame {D} to {Wd}.

    Far from the path d1 points almost straight at it; on the path {D}
    coincides with {Wd}.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    r3 = math.sqrt(alpha * alpha + y_w * y_w + z_w * z_w)
    r2 = math.sqrt(alpha * alpha + y_w * y_w)
    d1 = np.array([alpha / r3, -y_w / r3, -z_w / r3])
    d2 = np.array([y_w / r2, alpha / r2, 0.0])
    return np.array([d1, d2, cross(d1, d2)]).T


def projected_cross_track(p_cross, R_Wd_I) -> tuple[float, float]:
    """Components of the cross-track error on w_d2 and w_d3 (inertial basis)."""
    return float(p_cross @ R_Wd_I[:, 1]), float(p_cross @ R_Wd_I[:, 2])


def attitude_error(R_W_I, R_D_I):
    """Attitude error ``R_err = R_D_I' R_W_I``, error function and error vector."""
    R_err = R_D_I.T @ R_W_I
    psi = 0.5 * (1.0 - R_err[0, 0])
    e_R = 0.5 * np.array([R_err[0, 2], -R_err[0, 1]])
    return R_err, psi, e_R


def sdot_law(p_err, w1, pdot_t, v_rot, f1, kp: float, v_w: float, eta_hat=None) -> float:
    """Progression speed of the virtual point along the path.

    ``eta_hat`` is an optional disturbance estimate added to the vehicle
    velocity; zero (no compensation) by default.
    """
    v = kp * p_err + v_w * w1 - pdot_t - v_rot
    if eta_hat is not None:
        v = v + eta_hat
    return float(v @ f1)


def frame_rates_numeric(R_prev, R, R_next, dt: float) -> np.ndarray:
    """Body angular velocity of a rotation trajectory by central difference."""
    A = R.T @ (R_next - R_prev) / (2.0 * dt)
    return vee(0.5 * (A - A.T))


def frame_rates_backward(history, dt: float) -> np.ndarray:
    """Body angular velocity at the newest sample of ``history`` (oldest first).

    Second-order one-sided difference with three samples, first order with
    two, zero with one.
    """
    n = len(history)
    if n < 2:
        return np.zeros(3)
    R = history[-1]
    if n == 2:
        A = R.T @ (R - history[-2]) / dt
    else:
        A = R.T @ (3.0 * R - 4.0 * history[-2] + history[-3]) / (2.0 * dt)
    return vee(0.5 * (A - A.T))


def omega_ref(e_R, R_err, rates: FrameRateInputs, kr: float) -> np.ndarray:
    """Angular rate reference about w2 and w3 for the autopilot."""
    ff = R_err.T @ rates.omega_DI_D()
    return -kr * np.asarray(e_R, dtype=float) + ff[1:]


def validate_gains(gains: Gains, v_min: float, v_max: float, c1: float, c2: float,
                   alpha: Optional[float] = None) -> GainCertificate:
    """Check the gain condition that certifies exponential convergence.

    ``ok`` is true when ``K kr > v_max^2 / (c1^2 (1 - 2 c2)^2)`` with
    ``K = min(kp, v_min / sqrt(alpha^2 + c1^2))`` and the decay matrix W is
    positive definite. ``lambda_mpf`` is the guaranteed decay rate of V.
    """
    if not (c1 > 0 and 0 < c2 < 0.5):
        raise ValueError("need c1 > 0 and 0 < c2 < 1/2")
    alpha = gains.alpha if alpha is None else alpha
    K = min(gains.kp, v_min / math.sqrt(alpha**2 + c1**2))
    k1 = 1.0 / (4.0 * c1**2)
    off = -2.0 * k1 * v_max / (1.0 - 2.0 * c2)
    W = np.array([[2.0 * k1 * K, off], [off, gains.kr / 2.0]])
    M2 = np.diag([k1, 1.0 / (1.0 - c2)])
    lam_min = float(np.linalg.eigvalsh(W)[0])
    lam = lam_min / float(np.max(np.diag(M2)))
    ok = K * gains.kr > v_max**2 / (c1**2 * (1.0 - 2.0 * c2) ** 2) and lam_min > 0
    return GainCertificate(K, lam, bool(ok), k1, W, M2)


def roa_membership(p_err, psi: float, c1: float, cbar: float) -> bool:
    p_err = np.asarray(p_err, dtype=float)
    return bool(psi + (p_err @ p_err) / (4.0 * c1 * c1) <= cbar)


def lyapunov_value(p_err, psi: float, k1: float) -> float:
    p_err = np.asarray(p_err, dtype=float)
    return float(k1 * (p_err @ p_err) + psi)


def lyapunov_bounds(p_norm: float, e_norm: float, k1: float, c2: float) -> tuple[float, float]:
    """Quadratic lower/upper bounds on V in terms of (|p_err|, |e_R|).

    The upper bound holds while the error function stays below ``c2``.
    """
    return k1 * p_norm**2 + e_norm**2, k1 * p_norm**2 + e_norm**2 / (1.0 - c2)


def position_error_rate(w1, v_w, sdot, f1, pdot_t, v_rot, omega_FT, p_err, eta=None) -> np.ndarray:
    """Right-hand side of the position error kinematics, five terms.

    ``omega_FT`` is the transport frame rate relative to the target (inertial
    axes). The last term is the apparent rate seen from axes rotating with
    it; for the inertial derivative pass ``omega_FT = 0``.
    """
    rhs = v_w * w1 - sdot * f1 - pdot_t - v_rot - cross(omega_FT, p_err)
    if eta is not None:
        rhs = rhs + eta
    return rhs


def psi_rate(e_R, omega_WI_W, omega_DI_W) -> float:
    """Time derivative of the error function from the relative rate {W} wrt {D}."""
    w = np.asarray(omega_WI_W, dtype=float) - np.asarray(omega_DI_W, dtype=float)
    return float(np.asarray(e_R) @ w[1:])


class RateHistory:
    """Short caller-owned buffers of the two numerically differentiated frames."""

    def __init__(self, depth: int = 3):
        self.Wd_F: deque = deque(maxlen=depth)
        self.D_Wd: deque = deque(maxlen=depth)

    def rates(self, R_Wd_F, R_D_Wd, dt: float):
        """Rates including the current sample, without storing it."""
        return (frame_rates_backward(list(self.Wd_F) + [R_Wd_F], dt),
                frame_rates_backward(list(self.D_Wd) + [R_D_Wd], dt))

    def push(self, R_Wd_F, R_D_Wd):
        self.Wd_F.append(R_Wd_F)
        self.D_Wd.append(R_D_Wd)


def mpf_control(p, R_W_I, v_w: float, target, frame: TransportFrame, gains: Gains,
                roa: RoaParams, history: Optional[RateHistory] = None, dt: Optional[float] = None,
                eta_hat=None, check_assumption: bool = True) -> ControlOutput:
    """Full control law at one instant.

    ``target`` is a :class:`~mpfsim.target.TargetState`. When ``history`` is
    given, the {Wd} and {D} frame rates are differentiated from it (the new
    sample is appended); without history those two feed-forward terms are
    zero.
    """
    R_T = target.R
    R_F_I = R_T @ frame.R
    f1 = R_F_I[:, 0]
    p_d = R_T @ frame.p
    omega_TI = R_T @ target.omega
    v_rot = cross(omega_TI, p_d)
    v_path = target.pdot + v_rot
    if eta_hat is not None:
        v_path = v_path - eta_hat
    if check_assumption and v_path @ v_path >= v_w * v_w:
        raise AssumptionViolated(
            f"target-induced path speed {math.sqrt(v_path @ v_path):.6g} m/s is not below v_w = {v_w}")

    p_err, p_cross = position_error(p, target.p, p_d, frame, R_T)
    R_Wd_F = steady_state_frame(v_path, np.zeros(3), v_w, R_F_I)
    R_Wd_I = R_F_I @ R_Wd_F
    y_w, z_w = projected_cross_track(p_cross, R_Wd_I)
    R_D_Wd = transient_frame(y_w, z_w, gains.alpha)
    R_D_I = R_Wd_I @ R_D_Wd
    R_err, psi, e_R = attitude_error(R_W_I, R_D_I)

    w1 = R_W_I[:, 0]
    sdot = sdot_law(p_err, w1, target.pdot, v_rot, f1, gains.kp, v_w, eta_hat)

    if history is not None:
        w_WdF, w_DWd = history.rates(R_Wd_F, R_D_Wd, dt)
        history.push(R_Wd_F, R_D_Wd)
    else:
        w_WdF = w_DWd = np.zeros(3)
    rates = FrameRateInputs(target.omega, frame_angular_velocity(frame.k1, frame.k2, sdot),
                            w_WdF, w_DWd, frame.R, R_Wd_F, R_D_Wd)
    w_ref = omega_ref(e_R, R_err, rates, gains.kr)

    V = lyapunov_value(p_err, psi, roa.k1)
    errs = MpfErrors(p_err, p_cross, y_w, z_w, R_err, psi, e_R, V)
    return ControlOutput(sdot, w_ref, errs, DesiredFrames(R_Wd_F, R_D_Wd, R_D_I), R_D_I @ rates.omega_DI_D())
