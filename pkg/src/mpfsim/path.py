"""Desired paths, arc-length reparameterization and parallel transport frames.

A path is given by a raw parameter ``u`` (``PathSpec``), reparameterized by
arc length through an :class:`ArcLengthTable`, and equipped with a
rotation-minimizing (Bishop) frame by :class:`FrameCache`.

All geometry here lives in the target frame {T}.
"""

from __future__ import annotations

import csv
import math
import threading
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import RegularityViolation
from .so3 import cross

# Gauss-Legendre rule used for every arc-length integral
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)

TRANSPORT_STEP = 0.1  # m
_CHUNK = 1024


@dataclass(frozen=True)
class PathSpec:
    """Raw parameterization of a path fixed in the target frame.

    ``kind`` is ``"lemniscate"``, ``"circle"`` or ``"sampled"``. For the two
    analytic kinds ``scale`` is in metres and ``frequency`` multiplies the raw
    parameter inside the trig terms; the raw range is one period.
    Sampled paths carry ``samples_u`` (monotone) and ``samples_xyz`` (n, 3).
    """

    kind: str
    scale: float = 50.0
    frequency: float = 0.01
    samples_u: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    samples_xyz: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    _spline: Optional[CubicSpline] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind in ("lemniscate", "circle"):
            if not (self.scale > 0 and self.frequency > 0):
                raise ValueError("scale and frequency must be positive")
        elif self.kind == "sampled":
            u = np.asarray(self.samples_u, dtype=float)
            xyz = np.asarray(self.samples_xyz, dtype=float)
            if u.ndim != 1 or len(u) < 4 or xyz.shape != (len(u), 3):
                raise ValueError("a sampled path needs at least 4 points of (u, x, y, z)")
            if np.any(np.diff(u) <= 0):
                raise ValueError("sampled path parameter u must be strictly increasing")
            object.__setattr__(self, "samples_u", u)
            object.__setattr__(self, "samples_xyz", xyz)
            object.__setattr__(self, "_spline", CubicSpline(u, xyz, bc_type="natural"))
        else:
            raise ValueError(f"unknown path kind {self.kind!r}")

    @classmethod
    def lemniscate(cls, scale: float = 50.0, frequency: float = 0.01) -> "PathSpec":
        return cls("lemniscate", scale, frequency)

    @classmethod
    def circle(cls, radius: float = 50.0, frequency: Optional[float] = None) -> "PathSpec":
        return cls("circle", radius, 1.0 / radius if frequency is None else frequency)

    @classmethod
    def sampled(cls, u, xyz) -> "PathSpec":
        return cls("sampled", samples_u=u, samples_xyz=xyz)

    @classmethod
    def straight_line(cls, start, direction, length: float, n: int = 5) -> "PathSpec":
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        u = np.linspace(0.0, length, n)
        return cls.sampled(u, np.asarray(start, dtype=float) + u[:, None] * d)

    @property
    def period(self) -> Optional[float]:
        """Raw-parameter period for closed analytic paths, else None."""
        if self.kind == "sampled":
            return None
        return 2.0 * math.pi / self.frequency

    @property
    def u_range(self) -> tuple[float, float]:
        if self.kind == "sampled":
            return float(self.samples_u[0]), float(self.samples_u[-1])
        return 0.0, self.period


def load_sampled_path(path) -> PathSpec:
    """Read a ``u,x,y,z`` CSV (metres, monotone u) into a sampled PathSpec."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != ["u", "x", "y", "z"]:
            raise ValueError(f"{path}: expected header u,x,y,z")
        rows = [[float(r[k]) for k in ("u", "x", "y", "z")] for r in reader]
    data = np.array(rows, dtype=float).reshape(-1, 4)
    return PathSpec.sampled(data[:, 0], data[:, 1:])


def eval_path(spec: PathSpec, u):
    """Position and first two raw-parameter derivatives.

    ``u`` may be a scalar (returns three (3,) arrays) or a 1-D array
    (returns three (n, 3) arrays).
    """
    scalar = np.ndim(u) == 0
    if scalar and spec.kind != "sampled":
        return _eval_scalar(spec, float(u))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if spec.kind == "sampled":
        sp = spec._spline
        p, dp, ddp = sp(u), sp(u, 1), sp(u, 2)
    else:
        a, f = spec.scale, spec.frequency
        th = f * u
        s, c = np.sin(th), np.cos(th)
        zero = np.zeros_like(u)
        if spec.kind == "circle":
            p = a * np.stack([s, c, zero], axis=-1)
            dp = a * f * np.stack([c, -s, zero], axis=-1)
            ddp = -a * f * f * np.stack([s, c, zero], axis=-1)
        else:
            s2, c2 = np.sin(2 * th), np.cos(2 * th)
            D, D1, D2 = 1.0 + s * s, s2, 2.0 * c2
            # x = (sin cos)/D, y = cos/D; quotient rule per component
            N = np.stack([0.5 * s2, c], axis=-1)
            N1 = np.stack([c2, -s], axis=-1)
            N2 = np.stack([-2.0 * s2, -c], axis=-1)
            D, D1, D2 = D[:, None], D1[:, None], D2[:, None]
            q = N / D
            q1 = (N1 * D - N * D1) / D**2
            q2 = (N2 * D - N * D2) / D**2 - 2.0 * D1 * (N1 * D - N * D1) / D**3
            z = zero[:, None]
            p = a * np.concatenate([q, z], axis=-1)
            dp = a * f * np.concatenate([q1, z], axis=-1)
            ddp = a * f * f * np.concatenate([q2, z], axis=-1)
    if scalar:
        return p[0], dp[0], ddp[0]
    return p, dp, ddp


def _eval_scalar(spec: PathSpec, u: float):
    a, f = spec.scale, spec.frequency
    th = f * u
    s, c = math.sin(th), math.cos(th)
    if spec.kind == "circle":
        af, aff = a * f, a * f * f
        return (np.array([a * s, a * c, 0.0]), np.array([af * c, -af * s, 0.0]),
                np.array([-aff * s, -aff * c, 0.0]))
    s2, c2 = 2.0 * s * c, c * c - s * s
    D, D1, D2 = 1.0 + s * s, s2, 2.0 * c2
    out = []
    for N, N1, N2 in ((0.5 * s2, c2, -2.0 * s2), (c, -s, -c)):
        g = N1 * D - N * D1
        out.append((N / D, g / (D * D), (N2 * D - N * D2) / (D * D) - 2.0 * D1 * g / D**3))
    (x, x1, x2), (y, y1, y2) = out
    af, aff = a * f, a * f * f
    return np.array([a * x, a * y, 0.0]), np.array([af * x1, af * y1, 0.0]), np.array([aff * x2, aff * y2, 0.0])


_GL3_X = (-math.sqrt(0.6), 0.0, math.sqrt(0.6))
_GL3_W = (5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0)


def _speed_scalar(spec: PathSpec, u: float) -> float:
    if spec.kind == "sampled":
        d = spec._spline(u, 1)
        return math.sqrt(d @ d)
    a, f = spec.scale, spec.frequency
    if spec.kind == "circle":
        return a * f
    th = f * u
    s, c = math.sin(th), math.cos(th)
    s2, c2 = 2.0 * s * c, c * c - s * s
    D = 1.0 + s * s
    x1 = (c2 * D - 0.5 * s2 * s2) / (D * D)
    y1 = (-s * D - c * s2) / (D * D)
    return a * f * math.sqrt(x1 * x1 + y1 * y1)


def _local_u(spec: PathSpec, u0: float, ds: float) -> float:
    """Raw parameter reached by travelling ``ds`` of arc length from ``u0``.

    Meant for short hops (one transport step): 3-point Gauss-Legendre plus
    Newton iterations.
    """
    sp0 = _speed_scalar(spec, u0)
    u = u0 + ds / sp0
    for _ in range(4):
        h = 0.5 * (u - u0)
        m = 0.5 * (u + u0)
        arc = h * sum(w * _speed_scalar(spec, m + h * x) for x, w in zip(_GL3_X, _GL3_W))
        du = (arc - ds) / _speed_scalar(spec, u)
        u -= du
        if abs(du) < 1e-15 * max(1.0, abs(u)):
            break
    return u


def _speed(spec: PathSpec, u) -> np.ndarray:
    return np.linalg.norm(eval_path(spec, np.atleast_1d(u))[1], axis=-1)


def _gl_segments(spec: PathSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gauss-Legendre integral of the raw speed over each [a_i, b_i]."""
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
    sp = _speed(spec, nodes.ravel()).reshape(nodes.shape)
    return half * (sp @ _GL_W)


@dataclass(frozen=True)
class ArcLengthTable:
    """Monotone (u_i, s_i) pairs over the raw range plus total length."""

    spec: PathSpec
    u: np.ndarray
    s: np.ndarray
    length: float

    @property
    def periodic(self) -> bool:
        return self.spec.period is not None

    def s_of_u(self, u):
        u = np.asarray(u, dtype=float)
        shift = np.zeros_like(u)
        if self.periodic:
            U = self.spec.period
            n = np.floor(u / U)
            shift = n * self.length
            u = u - n * U
        j = np.clip(np.searchsorted(self.u, u, side="right") - 1, 0, len(self.u) - 2)
        uu = np.atleast_1d(u)
        jj = np.atleast_1d(j)
        part = _gl_segments(self.spec, self.u[jj], uu)
        return (self.s[jj] + part).reshape(np.shape(u)) + shift

    def u_of_s(self, s, u0=None):
        """Inverse map by monotone interpolation refined with Newton steps.

        ``s`` is unwrapped: on closed paths it may exceed the length or be
        negative, and the returned raw parameter is unwrapped accordingly.
        """
        s = np.asarray(s, dtype=float)
        scalar = s.ndim == 0
        s = np.atleast_1d(s)
        if self.periodic:
            n = np.floor(s / self.length)
            r = s - n * self.length
            base = n * self.spec.period
        else:
            r = s
            base = np.zeros_like(s)
        if u0 is None:
            if self.periodic:
                u = np.interp(r, self.s, self.u)
            else:
                # linear extrapolation beyond the sampled range
                u = np.interp(r, self.s, self.u)
                sp0, sp1 = _speed(self.spec, self.u[[0, -1]])
                u = np.where(r < 0, self.u[0] + r / sp0, u)
                u = np.where(r > self.length, self.u[-1] + (r - self.length) / sp1, u)
        else:
            u = np.atleast_1d(np.asarray(u0, dtype=float)) - base
        for _ in range(6):
            j = np.clip(np.searchsorted(self.u, u, side="right") - 1, 0, len(self.u) - 2)
            err = self.s[j] + _gl_segments(self.spec, self.u[j], u) - r
            du = err / _speed(self.spec, u)
            u = u - du
            if np.max(np.abs(du)) < 1e-13 * max(1.0, float(np.max(np.abs(u)))):
                break
        u = u + base
        return float(u[0]) if scalar else u


def build_arclength_table(spec: PathSpec, tol: float = 1e-10, min_segments: int = 64) -> ArcLengthTable:
    """Cumulative arc length over the raw range.

    The number of Gauss-Legendre segments is doubled until the total length
    changes by less than ``tol`` relative.

    Raises
    ------
    RegularityViolation
        If the raw speed drops below 1e-9 anywhere on a dense sampling.
    """
    u0, u1 = spec.u_range
    dense = np.linspace(u0, u1, 20001)
    if np.min(_speed(spec, dense)) < 1e-9:
        raise RegularityViolation("path speed |dp/du| vanishes; path is not regular")
    n = min_segments
    prev = None
    while True:
        u = np.linspace(u0, u1, n + 1)
        seg = _gl_segments(spec, u[:-1], u[1:])
        total = float(seg.sum())
        if prev is not None and abs(total - prev) <= tol * total:
            break
        if n > 2**20:
            break
        prev = total
        n *= 2
    s = np.concatenate([[0.0], np.cumsum(seg)])
    return ArcLengthTable(spec, u, s, total)


@dataclass(frozen=True)
class PathPoint:
    """Arc-length geometry at one ``s``: position, unit tangent, d2p/ds2."""

    s: float
    u: float
    p: np.ndarray
    tangent: np.ndarray
    curvature: np.ndarray


def path_point(table: ArcLengthTable, s: float, u0=None) -> PathPoint:
    u = table.u_of_s(s, u0)
    p, dp, ddp = eval_path(table.spec, u)
    sp = math.sqrt(dp @ dp)
    t = dp / sp
    kappa = (ddp - (ddp @ t) * t) / (sp * sp)
    return PathPoint(float(s), u, p, t, kappa)


@dataclass(frozen=True)
class TransportFrame:
    """Bishop frame at arc length ``s`` (all vectors in target coordinates)."""

    s: float
    p: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray
    k1: float
    k2: float

    @property
    def R(self) -> np.ndarray:
        """Rotation from {F} to {T}, columns ``[f1 f2 f3]``."""
        return np.array([self.f1, self.f2, self.f3]).T

    @property
    def curvature_vector(self) -> np.ndarray:
        return self.k1 * self.f2 + self.k2 * self.f3


def seed_normal(f1, up=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Deterministic initial f2: the component of ``up`` normal to ``f1``."""
    f1 = np.asarray(f1, dtype=float)
    up = np.asarray(up, dtype=float)
    if min(np.linalg.norm(f1 - up), np.linalg.norm(f1 + up)) < 1e-6:
        up = np.array([0.0, 1.0, 0.0])
    r = up - (up @ f1) * f1
    return r / np.linalg.norm(r)


def _reflect(x0, t0, r0, x1, t1):
    """One double-reflection step (rotation-minimizing frame transport)."""
    v1 = x1 - x0
    c1 = v1 @ v1
    if c1 < 1e-300:
        return r0
    rL = r0 - (2.0 / c1) * (v1 @ r0) * v1
    tL = t0 - (2.0 / c1) * (v1 @ t0) * v1
    v2 = t1 - tL
    c2 = v2 @ v2
    if c2 < 1e-300:
        return rL
    return rL - (2.0 / c2) * (v2 @ rL) * v2


class FrameCache:
    """Extend-only cache of Bishop frames on a uniform arc-length grid.

    Nodes sit at ``k * step`` for integer ``k`` and are created on demand in
    either direction from the seed at ``s = 0``. A query between nodes is
    transported from the node below it with one more reflection, so ``f1``
    is always the exact unit tangent at the queried ``s``.

    Readers may share a cache; extension is guarded by a lock.
    """

    def __init__(self, table: ArcLengthTable, step: float = TRANSPORT_STEP, normal0=None):
        if not (0 < step <= TRANSPORT_STEP):
            raise ValueError(f"transport step must be in (0, {TRANSPORT_STEP}]")
        self.table = table
        self.step = step
        pt = path_point(table, 0.0)
        r0 = seed_normal(pt.tangent) if normal0 is None else np.asarray(normal0, dtype=float)
        r0 = r0 - (r0 @ pt.tangent) * pt.tangent
        r0 = r0 / np.linalg.norm(r0)
        self._lock = threading.Lock()
        # node storage, index 0 <-> k = self._kmin
        self._kmin = 0
        self._u = [pt.u]
        self._x = [pt.p]
        self._t = [pt.tangent]
        self._r = [r0]

    @property
    def k_range(self) -> tuple[int, int]:
        return self._kmin, self._kmin + len(self._u) - 1

    def _extend_up(self, k_target: int):
        kmax = self._kmin + len(self._u) - 1
        while kmax < k_target:
            n = _CHUNK
            ks = np.arange(kmax + 1, kmax + n + 1)
            us = self.table.u_of_s(ks * self.step)
            p, dp, _ = eval_path(self.table.spec, us)
            t = dp / np.linalg.norm(dp, axis=1)[:, None]
            x0, t0, r = self._x[-1], self._t[-1], self._r[-1]
            for i in range(n):
                r = _reflect(x0, t0, r, p[i], t[i])
                r = r - (r @ t[i]) * t[i]
                r = r / math.sqrt(r @ r)
                self._u.append(float(us[i]))
                self._x.append(p[i])
                self._t.append(t[i])
                self._r.append(r)
                x0, t0 = p[i], t[i]
            kmax += n

    def _extend_down(self, k_target: int):
        while self._kmin > k_target:
            n = _CHUNK
            ks = np.arange(self._kmin - 1, self._kmin - n - 1, -1)
            us = self.table.u_of_s(ks * self.step)
            p, dp, _ = eval_path(self.table.spec, us)
            t = dp / np.linalg.norm(dp, axis=1)[:, None]
            x0, t0, r = self._x[0], self._t[0], self._r[0]
            new_u, new_x, new_t, new_r = [], [], [], []
            for i in range(n):
                r = _reflect(x0, t0, r, p[i], t[i])
                r = r - (r @ t[i]) * t[i]
                r = r / math.sqrt(r @ r)
                new_u.append(float(us[i]))
                new_x.append(p[i])
                new_t.append(t[i])
                new_r.append(r)
                x0, t0 = p[i], t[i]
            self._u[:0] = new_u[::-1]
            self._x[:0] = new_x[::-1]
            self._t[:0] = new_t[::-1]
            self._r[:0] = new_r[::-1]
            self._kmin -= n

    def _ensure(self, k: int):
        kmin, kmax = self.k_range
        if kmin <= k <= kmax:
            return
        with self._lock:
            if k > self.k_range[1]:
                self._extend_up(k)
            elif k < self.k_range[0]:
                self._extend_down(k)

    def node(self, k: int) -> TransportFrame:
        """Cached frame at node ``k`` (arc length ``k * step``)."""
        self._ensure(k)
        i = k - self._kmin
        return self._frame(k * self.step, self._u[i], self._x[i], self._t[i], self._r[i])

    def _frame(self, s, u, x, t, r) -> TransportFrame:
        _, dp, ddp = eval_path(self.table.spec, u)
        sp2 = dp @ dp
        kappa = (ddp - (ddp @ t) * t) / sp2
        f2 = r
        f3 = cross(t, f2)
        return TransportFrame(float(s), x, t, f2, f3, float(f2 @ kappa), float(f3 @ kappa))

    def point(self, s: float) -> PathPoint:
        """Position and tangent at ``s`` without building the full frame."""
        k = math.floor(s / self.step)
        self._ensure(k)
        i = k - self._kmin
        u = _local_u(self.table.spec, self._u[i], s - k * self.step)
        p, dp, ddp = eval_path(self.table.spec, u)
        sp = math.sqrt(dp @ dp)
        t = dp / sp
        return PathPoint(float(s), u, p, t, (ddp - (ddp @ t) * t) / (sp * sp))

    def frame_at(self, s: float) -> TransportFrame:
        k = math.floor(s / self.step)
        self._ensure(k)
        i = k - self._kmin
        x0, t0, r0 = self._x[i], self._t[i], self._r[i]
        if s == k * self.step:
            return self._frame(s, self._u[i], x0, t0, r0)
        pt = self.point(s)
        t = pt.tangent
        r = _reflect(x0, t0, r0, pt.p, t)
        r = r - (r @ t) * t
        r = r / math.sqrt(r @ r)
        f3 = cross(t, r)
        return TransportFrame(float(s), pt.p, t, r, f3, float(r @ pt.curvature), float(f3 @ pt.curvature))


def transport_frame_at(table: ArcLengthTable, spec: PathSpec, s: float, cache: FrameCache) -> TransportFrame:
    if cache.table is not table or table.spec is not spec:
        raise ValueError("frame cache was built for a different path")
    return cache.frame_at(s)


def frame_curvatures(frame: TransportFrame) -> tuple[float, float]:
    """Components of df1/ds on f2 and f3."""
    return frame.k1, frame.k2


def frame_angular_velocity(k1: float, k2: float, sdot: float) -> np.ndarray:
    """Angular velocity of {F} relative to {T}, in {F} coordinates.

    The first component is zero: the transport frame does not twist about
    the tangent.
    """
    return np.array([0.0, -sdot * k2, sdot * k1])

