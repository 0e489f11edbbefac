"""Rotation algebra on SO(3).

Vectors are numpy arrays of shape (3,), rotations and skew matrices are
(3, 3) arrays. Everything here is a pure function.
"""

from __future__ import annotations

import math

import numpy as np

# below this angle exp_so3 switches to Taylor coefficients
SMALL_ANGLE = 1e-6


def hat(v) -> np.ndarray:
    """Cross-product matrix: ``hat(v) @ w == np.cross(v, w)``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(S) -> np.ndarray:
    """Inverse of :func:`hat`. Reads the lower-left/upper-right entries only."""
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def cross(a, b) -> np.ndarray:
    """3-vector cross product (much cheaper than ``np.cross`` on single vectors)."""
    a0, a1, a2 = a
    b0, b1, b2 = b
    return np.array([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0])


def skew_part(A) -> np.ndarray:
    return 0.5 * (A - A.T)


def exp_so3(v) -> np.ndarray:
    """Rodrigues formula for ``expm(hat(v))``."""
    x, y, z = v
    th2 = x * x + y * y + z * z
    th = math.sqrt(th2)
    if th < SMALL_ANGLE:
        a = 1.0 - th2 / 6.0
        b = 0.5 - th2 / 24.0
    else:
        a = math.sin(th) / th
        b = (1.0 - math.cos(th)) / th2
    # hat(v)^2 = v v' - |v|^2 I
    return np.array([
        [1.0 - b * (y * y + z * z), b * x * y - a * z, b * x * z + a * y],
        [b * x * y + a * z, 1.0 - b * (x * x + z * z), b * y * z - a * x],
        [b * x * z - a * y, b * y * z + a * x, 1.0 - b * (x * x + y * y)],
    ])


def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_zyx(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Body-to-world rotation from intrinsic Z-Y-X (yaw, pitch, roll) angles.

    ``rot_zyx(0, 0, psi)`` is a pure rotation by ``psi`` about the third axis.
    """
    return rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)


def reorthonormalize(R) -> np.ndarray:
    """Nearest rotation matrix in the Frobenius sense (orthogonal polar factor).

    Raises
    ------
    ValueError
        If ``R`` is rank deficient or has a negative determinant.
    """
    R = np.asarray(R, dtype=float)
    E = R.T @ R
    E[0, 0] -= 1.0
    E[1, 1] -= 1.0
    E[2, 2] -= 1.0
    if np.abs(E).max() < 1e-8 and R[:, 0] @ cross(R[:, 1], R[:, 2]) > 0.0:
        # one Newton-Schulz polar step; the residual error is O(|E|^2)
        return R - 0.5 * (R @ E)
    U, sv, Vt = np.linalg.svd(R)
    if sv[-1] < 1e-9 * max(sv[0], 1.0):
        raise ValueError("cannot reorthonormalize a rank-deficient matrix")
    Q = U @ Vt
    if np.linalg.det(Q) < 0.0:
        raise ValueError("matrix is closer to a reflection than a rotation")
    return Q


def orthonormality_error(R) -> float:
    """Frobenius norm of ``R'R - I``."""
    R = np.asarray(R, dtype=float)
    return float(np.linalg.norm(R.T @ R - np.eye(3)))


def is_rotation(R, tol: float = 1e-9) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    return orthonormality_error(R) <= tol and abs(np.linalg.det(R) - 1.0) <= tol
