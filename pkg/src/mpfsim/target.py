"""Propagation of the moving target frame {T}."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .so3 import cross, exp_so3, reorthonormalize

_GAUSS_LO = 0.5 - math.sqrt(3.0) / 6.0
_GAUSS_HI = 0.5 + math.sqrt(3.0) / 6.0
_MAGNUS_C = math.sqrt(3.0) / 12.0


@dataclass(frozen=True)
class TargetProfile:
    """Body-frame linear and angular velocity of the target as functions of time.

    ``velocity(t)`` returns the linear velocity expressed in {T} (m/s) and
    ``omega(t)`` the angular velocity of {T} relative to {I} in {T} (rad/s).
    """

    kind: str
    velocity: Callable[[float], np.ndarray]
    omega: Callable[[float], np.ndarray]


def benchmark_maneuver_profile() -> TargetProfile:
    """Three-dimensional benchmark maneuver with speed in [3, 3*sqrt(5)] m/s."""

    def velocity(t):
        return np.array([3.0 * math.sqrt((math.cos(0.1 * t) + 1.0) ** 2 + 1.0), 0.0, 0.0])

    def omega(t):
        q = (math.cos(0.1 * t) + 1.0) ** 2 + 1.0
        return np.array([0.0, -0.001 * math.cos(0.03 * t), -math.sin(0.1 * t) / (10.0 * q**1.5)])

    return TargetProfile("benchmark-maneuver", velocity, omega)


def constant_profile(velocity=(0.0, 0.0, 0.0), omega=(0.0, 0.0, 0.0)) -> TargetProfile:
    v = np.array(velocity, dtype=float)
    w = np.array(omega, dtype=float)
    return TargetProfile("constant", lambda t: v.copy(), lambda t: w.copy())


def piecewise_profile(times, velocities, omegas) -> TargetProfile:
    """Zero-order hold between samples; before the first sample the first row holds."""
    times = np.asarray(times, dtype=float)
    vel = np.asarray(velocities, dtype=float).reshape(-1, 3)
    om = np.asarray(omegas, dtype=float).reshape(-1, 3)
    if len(times) == 0 or len(times) != len(vel) or len(times) != len(om):
        raise ValueError("piecewise profile needs matching, non-empty t/velocity/omega rows")
    if np.any(np.diff(times) <= 0):
        raise ValueError("piecewise profile times must be strictly increasing")
    if not (np.all(np.isfinite(vel)) and np.all(np.isfinite(om))):
        raise ValueError("piecewise profile velocities must be finite")

    def index(t):
        return max(int(np.searchsorted(times, t, side="right")) - 1, 0)

    return TargetProfile("piecewise", lambda t: vel[index(t)].copy(), lambda t: om[index(t)].copy())


def load_piecewise_profile(path) -> TargetProfile:
    """Read a ``t,vx,vy,vz,wx,wy,wz`` CSV of body-frame velocities."""
    cols = ["t", "vx", "vy", "vz", "wx", "wy", "wz"]
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != cols:
            raise ValueError(f"{path}: expected header {','.join(cols)}")
        rows = np.array([[float(r[c]) for c in cols] for r in reader], dtype=float).reshape(-1, 7)
    return piecewise_profile(rows[:, 0], rows[:, 1:4], rows[:, 4:7])


@dataclass(frozen=True)
class TargetState:
    """Target pose and rates at time ``t``.

    ``pdot`` is the inertial velocity; the product v_t * t1 is carried as this
    vector so that a stopped target never needs a direction.
    """

    t: float
    p: np.ndarray
    R: np.ndarray
    pdot: np.ndarray
    omega: np.ndarray  # {T} relative to {I}, in {T}

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.pdot))

    @property
    def direction(self) -> np.ndarray:
        """Unit velocity direction t1; zero vector when the target is at rest."""
        v = self.speed
        return self.pdot / v if v > 1e-9 else np.zeros(3)

    @property
    def omega_inertial(self) -> np.ndarray:
        return self.R @ self.omega


def initial_target_state(profile: TargetProfile, p, R, t: float = 0.0) -> TargetState:
    R = np.asarray(R, dtype=float)
    return TargetState(t, np.asarray(p, dtype=float), R, R @ profile.velocity(t), profile.omega(t))


def magnus_step(R: np.ndarray, omega: Callable[[float], np.ndarray], t: float, h: float) -> np.ndarray:
    """Fourth-order Magnus update of ``Rdot = R hat(omega(t))`` over ``[t, t+h]``."""
    w1 = omega(t + _GAUSS_LO * h)
    w2 = omega(t + _GAUSS_HI * h)
    return R @ exp_so3(0.5 * h * (w1 + w2) + _MAGNUS_C * h * h * cross(w1, w2))


def _advance(state: TargetState, profile: TargetProfile, dt: float):
    """Full step plus the Hermite/Magnus midpoint state, for the simulator."""
    t0 = state.t
    R_half = magnus_step(state.R, profile.omega, t0, 0.5 * dt)
    R1 = reorthonormalize(magnus_step(state.R, profile.omega, t0, dt))
    v0 = state.pdot
    vh = R_half @ profile.velocity(t0 + 0.5 * dt)
    v1 = R1 @ profile.velocity(t0 + dt)
    p1 = state.p + (dt / 6.0) * (v0 + 4.0 * vh + v1)
    new = TargetState(t0 + dt, p1, R1, v1, profile.omega(t0 + dt))
    p_half = 0.5 * (state.p + p1) + (dt / 8.0) * (v0 - v1)
    mid = TargetState(t0 + 0.5 * dt, p_half, R_half, vh, profile.omega(t0 + 0.5 * dt))
    return new, mid


def step_target(state: TargetState, profile: TargetProfile, dt: float) -> TargetState:
    """Advance the target by ``dt``.

    Position uses RK4 on ``pdot = R v_body(t)`` (Simpson's rule, since the
    right-hand side depends only on time); attitude stage values come from a
    fourth-order Magnus integrator. The attitude is reorthonormalized.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    return _advance(state, profile, dt)[0]


