"""Constant-speed kinematic vehicle, first-order autopilot and wind field."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .so3 import exp_so3, reorthonormalize


@dataclass(frozen=True)
class VehicleState:
    """Position, wind-frame attitude and airspeed of the vehicle.

    ``R[:, 0]`` is w1, the direction of the velocity relative to the air.
    """

    p: np.ndarray
    R: np.ndarray
    speed: float
    speed_min: Optional[float] = None
    speed_max: Optional[float] = None

    def __post_init__(self):
        lo = self.speed if self.speed_min is None else self.speed_min
        hi = self.speed if self.speed_max is None else self.speed_max
        if not (0.0 < lo <= self.speed <= hi):
            raise ValueError(f"need 0 < v_min <= v_w <= v_max, got {lo}, {self.speed}, {hi}")
        object.__setattr__(self, "speed_min", float(lo))
        object.__setattr__(self, "speed_max", float(hi))

    @property
    def w1(self) -> np.ndarray:
        return self.R[:, 0]


@dataclass(frozen=True)
class AutopilotState:
    """Achieved pitch/yaw rates about w2 and w3 and the autopilot bandwidth.

    ``bandwidth = math.inf`` models a perfect autopilot.
    """

    omega: np.ndarray
    bandwidth: float

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError("autopilot bandwidth must be positive")

    @property
    def perfect(self) -> bool:
        return math.isinf(self.bandwidth)


def step_autopilot(ap: AutopilotState, omega_ref, dt: float):
    """Exact discretization of ``w' = -lam w + lam w_ref`` for a held reference.

    Returns the new state and the tracking error ``w - w_ref`` at the start
    of the step (zero for a perfect autopilot).
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    omega_ref = np.asarray(omega_ref, dtype=float)
    if ap.perfect:
        return AutopilotState(omega_ref.copy(), ap.bandwidth), np.zeros(2)
    decay = math.exp(-ap.bandwidth * dt)
    new = omega_ref + (ap.omega - omega_ref) * decay
    return AutopilotState(new, ap.bandwidth), ap.omega - omega_ref


def autopilot_mean_rate(ap: AutopilotState, omega_ref, dt: float) -> np.ndarray:
    """Average achieved rate over a step with the reference held."""
    omega_ref = np.asarray(omega_ref, dtype=float)
    if ap.perfect:
        return omega_ref.copy()
    x = ap.bandwidth * dt
    return omega_ref + (ap.omega - omega_ref) * (-math.expm1(-x) / x)


def _advance(vs: VehicleState, omega, eta, dt: float):
    wx = np.array([0.0, omega[0], omega[1]])
    R_half = vs.R @ exp_so3(0.5 * dt * wx)
    R1 = vs.R @ exp_so3(dt * wx)
    v = vs.speed
    v0 = v * vs.R[:, 0] + eta
    vh = v * R_half[:, 0] + eta
    v1 = v * R1[:, 0] + eta
    p1 = vs.p + (dt / 6.0) * (v0 + 4.0 * vh + v1)
    new = VehicleState(p1, reorthonormalize(R1), v, vs.speed_min, vs.speed_max)
    p_half = 0.5 * (vs.p + p1) + (dt / 8.0) * (v0 - v1)
    mid = VehicleState(p_half, R_half, v, vs.speed_min, vs.speed_max)
    return new, mid


def step_vehicle(vs: VehicleState, omega, eta, dt: float) -> VehicleState:
    """Advance ``pdot = v_w w1 + eta``, ``Rdot = R hat([0, omega])`` by ``dt``.

    ``omega`` holds the rates about w2 and w3; the roll rate is zero. The
    attitude is exact for the held rate and the RK4 stages use it at the
    stage times.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    return _advance(vs, np.asarray(omega, dtype=float), np.asarray(eta, dtype=float), dt)[0]


@dataclass(frozen=True)
class WindBox:
    lo: np.ndarray
    hi: np.ndarray
    velocity: np.ndarray

    def contains(self, p) -> bool:
        return bool(np.all(p >= self.lo) and np.all(p <= self.hi))


@dataclass(frozen=True)
class Gust:
    """Uniform gust active for ``t_start <= t < t_end``."""

    t_start: float
    t_end: float
    velocity: np.ndarray


@dataclass(frozen=True)
class WindField:
    boxes: Sequence[WindBox] = field(default_factory=tuple)
    gust: Optional[Gust] = None

    @property
    def empty(self) -> bool:
        return not self.boxes and self.gust is None

    @classmethod
    def from_config(cls, cfg: dict) -> "WindField":
        boxes = []
        for b in cfg.get("boxes", []):
            lo = np.array(b["min"], dtype=float)
            hi = np.array(b["max"], dtype=float)
            if np.any(hi < lo):
                raise ValueError("wind box max must be >= min")
            boxes.append(WindBox(lo, hi, np.array(b["velocity"], dtype=float)))
        gust = None
        if "gust" in cfg:
            g = cfg["gust"]
            gust = Gust(float(g["t_start"]), float(g["t_end"]), np.array(g["velocity"], dtype=float))
        for v in [b.velocity for b in boxes] + ([gust.velocity] if gust else []):
            if v.shape != (3,) or not np.all(np.isfinite(v)):
                raise ValueError("wind velocities must be finite 3-vectors")
        return cls(tuple(boxes), gust)


def sample_wind(wind: WindField, p, t: float) -> np.ndarray:
    """Wind velocity at ``p`` and time ``t``.

    Boxes are closed; overlapping boxes add up, and the gust adds on top.
    """
    eta = np.zeros(3)
    p = np.asarray(p, dtype=float)
    for box in wind.boxes:
        if box.contains(p):
            eta = eta + box.velocity
    g = wind.gust
    if g is not None and g.t_start <= t < g.t_end:
        eta = eta + g.velocity
    return eta
