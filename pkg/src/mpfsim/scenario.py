"""Scenario configuration.

A scenario file is TOML with these sections (SI units, angles in degrees)::

    [simulation]  dt, duration, s0, strict_roa
    [path]        kind = "lemniscate" | "circle" | "sampled",
                  scale, frequency  (analytic kinds), file = "path.csv" (sampled)
    [target]      profile = "benchmark" | "constant" | "file", position, attitude_deg,
                  velocity, angular_velocity (constant), file (piecewise CSV)
    [vehicle]     position, attitude_deg, speed, speed_min, speed_max
    [gains]       kp, kr, alpha
    [roa]         c1, c2, cbar
    [autopilot]   bandwidth, perfect, omega0
    [wind]        [[wind.boxes]] min, max, velocity;  [wind.gust] t_start, t_end, velocity
    [sweep]       lambdas

``attitude_deg = [roll, pitch, yaw]`` uses the Z-Y-X convention of
:func:`mpfsim.so3.rot_zyx`. Relative file names resolve against the
directory of the scenario file.
"""

from __future__ import annotations

import copy
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .controller import Gains, RoaParams
from .path import PathSpec, load_sampled_path
from .so3 import rot_zyx
from .target import (TargetProfile, constant_profile, load_piecewise_profile,
                     benchmark_maneuver_profile)
from .vehicle import VehicleState, WindField


@dataclass(frozen=True)
class Scenario:
    path: PathSpec
    target_profile: TargetProfile
    target_p0: np.ndarray
    target_R0: np.ndarray
    vehicle: VehicleState
    gains: Gains
    roa: RoaParams = field(default_factory=RoaParams)
    bandwidth: float = 10.0
    wind: WindField = field(default_factory=WindField)
    dt: float = 0.01
    duration: float = 500.0
    s0: float = 0.0
    strict_roa: bool = False
    omega0: np.ndarray = field(default_factory=lambda: np.zeros(2))
    sweep_lambdas: tuple = ()
    name: str = "scenario"
    # raw config and base directory, kept so sweeps can rebuild in workers
    config: Optional[dict] = field(default=None, repr=False, compare=False)
    base_dir: Optional[str] = field(default=None, repr=False, compare=False)

    @property
    def steps(self) -> int:
        n = self.duration / self.dt
        N = int(round(n))
        if N < 1 or abs(n - N) > 1e-9 * max(1.0, n):
            raise ValueError(f"duration {self.duration} is not an integer multiple of dt {self.dt}")
        return N

    @property
    def perfect_autopilot(self) -> bool:
        return math.isinf(self.bandwidth)

    def with_bandwidth(self, bandwidth: float) -> "Scenario":
        cfg = None
        if self.config is not None:
            cfg = copy.deepcopy(self.config)
            ap = cfg.setdefault("autopilot", {})
            ap["perfect"] = math.isinf(bandwidth)
            if not math.isinf(bandwidth):
                ap["bandwidth"] = bandwidth
        return replace(self, bandwidth=bandwidth, config=cfg)


def _vec(x, n=3) -> np.ndarray:
    v = np.array(x, dtype=float)
    if v.shape != (n,):
        raise ValueError(f"expected {n} numbers, got {x!r}")
    return v


def _attitude(section: dict) -> np.ndarray:
    r, p, y = _vec(section.get("attitude_deg", [0.0, 0.0, 0.0]))
    return rot_zyx(math.radians(r), math.radians(p), math.radians(y))


def scenario_from_dict(cfg: dict, base_dir=".", name: str = "scenario") -> Scenario:
    base = Path(base_dir)
    sim = cfg.get("simulation", {})
    pc = cfg.get("path", {})
    kind = pc.get("kind", "lemniscate")
    if kind == "sampled":
        path = load_sampled_path(base / pc["file"])
    elif kind == "circle":
        scale = float(pc.get("scale", 50.0))
        path = PathSpec("circle", scale, float(pc.get("frequency", 1.0 / scale)))
    elif kind == "lemniscate":
        path = PathSpec("lemniscate", float(pc.get("scale", 50.0)), float(pc.get("frequency", 0.01)))
    else:
        raise ValueError(f"unknown path kind {kind!r}")

    tc = cfg.get("target", {})
    prof = tc.get("profile", "benchmark")
    if prof == "benchmark":
        profile = benchmark_maneuver_profile()
    elif prof == "constant":
        profile = constant_profile(_vec(tc.get("velocity", [0, 0, 0])), _vec(tc.get("angular_velocity", [0, 0, 0])))
    elif prof == "file":
        profile = load_piecewise_profile(base / tc["file"])
    else:
        raise ValueError(f"unknown target profile {prof!r}")

    vc = cfg.get("vehicle", {})
    speed = float(vc.get("speed", 15.0))
    vehicle = VehicleState(_vec(vc.get("position", [-50.0, 0.0, 0.0])), _attitude(vc), speed,
                           float(vc.get("speed_min", speed)), float(vc.get("speed_max", speed)))

    gc = cfg.get("gains", {})
    gains = Gains(float(gc.get("kp", 4.0)), float(gc.get("kr", 2.0)), float(gc.get("alpha", 1.0)))
    rc = cfg.get("roa", {})
    roa = RoaParams(float(rc.get("c1", 60.0)), float(rc.get("c2", 0.05)), float(rc.get("cbar", 0.49)))

    ac = cfg.get("autopilot", {})
    bandwidth = math.inf if ac.get("perfect", False) else float(ac.get("bandwidth", 10.0))

    return Scenario(
        path=path,
        target_profile=profile,
        target_p0=_vec(tc.get("position", [0.0, 0.0, 5.0])),
        target_R0=_attitude(tc),
        vehicle=vehicle,
        gains=gains,
        roa=roa,
        bandwidth=bandwidth,
        wind=WindField.from_config(cfg.get("wind", {})),
        dt=float(sim.get("dt", 0.01)),
        duration=float(sim.get("duration", 500.0)),
        s0=float(sim.get("s0", 0.0)),
        strict_roa=bool(sim.get("strict_roa", False)),
        omega0=_vec(ac.get("omega0", [0.0, 0.0]), 2),
        sweep_lambdas=tuple(float(x) for x in cfg.get("sweep", {}).get("lambdas", ())),
        name=name,
        config=cfg,
        base_dir=str(base),
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    with open(path, "rb") as fh:
        cfg = tomllib.load(fh)
    return scenario_from_dict(cfg, path.parent, path.stem)
