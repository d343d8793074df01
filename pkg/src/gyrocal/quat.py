"""Quaternion and SO(3) primitives for strapdown attitude work.

Conventions used throughout the package:

* Quaternions are numpy arrays ``[w, x, y, z]`` (scalar part first,
  Hamilton product) and represent the rotation from the body frame to
  the navigation frame (NED: x north, y east, z down).
* Rotation matrices act on column vectors, ``v_nav = R @ v_body``.
* Euler angles are intrinsic Z-Y-X (yaw, pitch, roll). The reporting
  API works in degrees.

All functions are pure and operate on plain float64 arrays, so they are
safe to call concurrently.
"""

from __future__ import annotations

import warnings

import numpy as np

from .errors import GimbalLockWarning

STANDARD_GRAVITY = 9.80665  # m/s^2

_UNIT_TOL = 1e-6


def _as_quat(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (4,):
        raise ValueError(f"quaternion must have shape (4,), got {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ValueError("quaternion contains non-finite values")
    return q


def _require_unit(q: np.ndarray, tol: float = _UNIT_TOL) -> np.ndarray:
    n = float(np.linalg.norm(q))
    if abs(n - 1.0) > tol:
        raise ValueError(f"expected unit quaternion, norm deviates by {abs(n - 1.0):.3e}")
    return q


def quat_normalize(q) -> np.ndarray:
    """Scale to unit norm. Raises on (near-)zero norm instead of guessing."""
    q = _as_quat(q)
    n = float(np.linalg.norm(q))
    if n < 1e-12:
        raise ValueError("cannot normalize quaternion with near-zero norm")
    return q / n


def quat_conj(q) -> np.ndarray:
    q = _as_quat(q)
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_mul(a, b) -> np.ndarray:
    """Hamilton product a (x) b. Inputs need not be unit quaternions."""
    a = _as_quat(a)
    b = _as_quat(b)
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def integrate_step(q, omega, dt: float) -> np.ndarray:
    """One first-order attitude update: normalize(q (x) [1, omega*dt/2]).

    ``omega`` is the mean body angular rate (rad/s) over the interval
    ``dt`` (s). The explicit renormalization keeps open-loop chains on
    the unit sphere; the training path differentiates through the same
    renormalized step.
    """
    q = _as_quat(q)
    omega = np.asarray(omega, dtype=np.float64)
    if omega.shape != (3,):
        raise ValueError(f"angular rate must have shape (3,), got {omega.shape}")
    if not np.all(np.isfinite(omega)) or not np.isfinite(dt):
        raise ValueError("non-finite input to integrate_step")
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    half = 0.5 * dt
    dq = np.array([1.0, omega[0] * half, omega[1] * half, omega[2] * half])
    return quat_normalize(quat_mul(q, dq))


def quat_diff(a, b) -> float:
    """Distance between two unit quaternions: Euclidean norm of the
    component-wise difference after hemisphere alignment.

    ``b`` is sign-flipped when dot(a, b) < 0 so the double cover
    (q and -q encode the same rotation) cannot inflate the distance.
    """
    a = _require_unit(_as_quat(a))
    b = _require_unit(_as_quat(b))
    if float(np.dot(a, b)) < 0.0:
        b = -b
    return float(np.linalg.norm(a - b))


def quat_to_rotmat(q) -> np.ndarray:
    """Rotation matrix of a unit quaternion (body-to-navigation)."""
    q = _require_unit(_as_quat(q))
    w, x, y, z = q
    return np.array(
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ]
    )


def _check_rotmat(r: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (3, 3):
        raise ValueError(f"rotation matrix must have shape (3, 3), got {r.shape}")
    if np.max(np.abs(r.T @ r - np.eye(3))) > tol:
        raise ValueError("matrix is not orthogonal within tolerance")
    if abs(np.linalg.det(r) - 1.0) > tol:
        raise ValueError("matrix determinant is not +1 within tolerance")
    return r


def so3_log(r) -> np.ndarray:
    """Axis-angle vector (rad) of a rotation matrix, norm in [0, pi].

    Near theta = pi the axis is recovered from the symmetric part
    (uu^T extraction) because the skew part degenerates there.
    """
    r = _check_rotmat(r)
    cos_theta = np.clip((np.trace(r) - 1.0) / 2.0, -1.0, 1.0)
    theta = float(np.arccos(cos_theta))
    vee = 0.5 * np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    if theta < 1e-7:
        # vee = sin(theta) * axis; the sinc correction is ~1 here
        return vee * (1.0 + theta * theta / 6.0)
    if theta > np.pi - 1e-3:
        sym = 0.5 * (r + r.T)
        outer = (sym - cos_theta * np.eye(3)) / (1.0 - cos_theta)  # = u u^T
        i = int(np.argmax(np.diag(outer)))
        u = outer[:, i] / np.sqrt(outer[i, i])
        if float(np.dot(u, vee)) < 0.0:
            u = -u
        return theta * u
    return vee * (theta / np.sin(theta))


def quat_from_rotvec(v) -> np.ndarray:
    """Unit quaternion of an axis-angle vector (exact exponential)."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (3,):
        raise ValueError(f"rotation vector must have shape (3,), got {v.shape}")
    theta = float(np.linalg.norm(v))
    half = 0.5 * theta
    if theta < 1e-12:
        s = 0.5 - theta * theta / 48.0
    else:
        s = np.sin(half) / theta
    return np.array([np.cos(half), v[0] * s, v[1] * s, v[2] * s])


def quat_to_euler(q) -> tuple[float, float, float]:
    """(roll, pitch, yaw) in degrees, intrinsic Z-Y-X, NED.

    Emits :class:`GimbalLockWarning` when |pitch| is within 1e-6 deg of
    90 deg, where roll and yaw become degenerate.
    """
    r = quat_to_rotmat(q)
    pitch = float(np.degrees(np.arcsin(np.clip(-r[2, 0], -1.0, 1.0))))
    roll = float(np.degrees(np.arctan2(r[2, 1], r[2, 2])))
    yaw = float(np.degrees(np.arctan2(r[1, 0], r[0, 0])))
    if abs(abs(pitch) - 90.0) < 1e-6:
        warnings.warn("pitch within 1e-6 deg of +/-90 deg", GimbalLockWarning, stacklevel=2)
    return roll, pitch, yaw


def quat_from_euler(roll_deg: float, pitch_deg: float, yaw_deg: float) -> np.ndarray:
    """Unit quaternion from intrinsic Z-Y-X Euler angles in degrees."""
    hr = 0.5 * np.radians(roll_deg)
    hp = 0.5 * np.radians(pitch_deg)
    hy = 0.5 * np.radians(yaw_deg)
    qz = np.array([np.cos(hy), 0.0, 0.0, np.sin(hy)])
    qy = np.array([np.cos(hp), 0.0, np.sin(hp), 0.0])
    qx = np.array([np.cos(hr), np.sin(hr), 0.0, 0.0])
    return quat_normalize(quat_mul(quat_mul(qz, qy), qx))


def quat_from_gravity(accel, tol: float = 0.2) -> np.ndarray:
    """Attitude with roll/pitch from a quasi-static accelerometer reading.

    A static accelerometer measures the specific force
    ``f_body = R^T (0, 0, -g)``; roll and pitch follow from its
    direction. Yaw is unobservable from gravity and is set to zero.
    Inputs whose norm deviates from standard gravity by more than
    ``tol`` (relative) are rejected as non-static.
    """
    a = np.asarray(accel, dtype=np.float64)
    if a.shape != (3,):
        raise ValueError(f"acceleration must have shape (3,), got {a.shape}")
    n = float(np.linalg.norm(a))
    if not np.isfinite(n) or abs(n - STANDARD_GRAVITY) > tol * STANDARD_GRAVITY:
        raise ValueError(
            f"|accel| = {n:.3f} m/s^2 is not within {tol:.0%} of gravity; "
            "sensor does not appear static"
        )
    an = a / n
    pitch = np.degrees(np.arcsin(np.clip(an[0], -1.0, 1.0)))
    roll = np.degrees(np.arctan2(-an[1], -an[2]))
    return quat_from_euler(float(roll), float(pitch), 0.0)


def slerp(qa, qb, t: float) -> np.ndarray:
    """Spherical linear interpolation with hemisphere alignment.

    ``t`` in [0, 1]; endpoints are reproduced exactly. For a pair that
    differs only in sign the output is constant.
    """
    qa = _require_unit(_as_quat(qa))
    qb = _require_unit(_as_quat(qb))
    d = float(np.dot(qa, qb))
    if d < 0.0:
        qb = -qb
        d = -d
    if d > 1.0 - 1e-12:
        return quat_normalize(qa + t * (qb - qa))
    ang = np.arccos(np.clip(d, -1.0, 1.0))
    return quat_normalize((np.sin((1.0 - t) * ang) * qa + np.sin(t * ang) * qb) / np.sin(ang))
