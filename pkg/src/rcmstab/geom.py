"""Rigid-body math on SE(3).

Conventions
-----------
* A :class:`Transform` ``T`` with ``target="a"`` and ``source="b"`` maps
  coordinates expressed in frame ``b`` into frame ``a``: ``p_a = R p_b + t``.
* Twists are 6-vectors ordered ``(linear, angular)``.
* Rotations are plain ``(3, 3)`` float arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

ORTHO_TOL = 1e-10

_AXES = {"x": 0, "y": 1, "z": 2}


class FrameMismatchError(ValueError):
    """Raised when two transforms are composed whose frame labels do not chain."""


def rot_axis(axis: str, angle: float) -> np.ndarray:
    """Elementary rotation about ``axis`` (one of ``x``, ``y``, ``z``)."""
    if not math.isfinite(angle):
        raise ValueError(f"angle must be finite, got {angle}")
    c, s = math.cos(angle), math.sin(angle)
    if axis == "x":
        return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    if axis == "y":
        return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    if axis == "z":
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    raise ValueError(f"unknown axis {axis!r}")


def axis_index(axis: str) -> int:
    try:
        return _AXES[axis]
    except KeyError:
        raise ValueError(f"unknown axis {axis!r}") from None


def is_rotation(r: np.ndarray, tol: float = ORTHO_TOL) -> bool:
    r = np.asarray(r, dtype=float)
    if r.shape != (3, 3) or not np.all(np.isfinite(r)):
        return False
    return bool(
        np.max(np.abs(r.T @ r - np.eye(3))) < tol and abs(np.linalg.det(r) - 1.0) < tol
    )


def hat(w) -> np.ndarray:
    """Skew-symmetric matrix with ``hat(w) @ x == cross(w, x)``."""
    x, y, z = w
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(m: np.ndarray) -> np.ndarray:
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def exp_so3(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    theta = math.sqrt(float(w @ w))
    k = hat(w)
    if theta < 1e-8:
        # second-order series; error O(theta^3)
        return np.eye(3) + k + 0.5 * (k @ k)
    a = math.sin(theta) / theta
    b = (1.0 - math.cos(theta)) / (theta * theta)
    return np.eye(3) + a * k + b * (k @ k)


def log_so3(r: np.ndarray) -> np.ndarray:
    """Axis-angle vector ``w`` with ``exp_so3(w) == r`` and ``|w|`` in ``[0, pi]``.

    The angle comes from ``atan2`` of the skew and symmetric parts, which keeps
    full precision at both ends of the range. Within 1e-3 rad of pi the axis
    is read off the dominant column of the symmetric part instead of dividing by
    ``sin(theta)``.
    """
    r = np.asarray(r, dtype=float)
    skew = vee(r - r.T)  # 2 sin(theta) * axis
    s = 0.5 * math.sqrt(float(skew @ skew))
    c = 0.5 * (r[0, 0] + r[1, 1] + r[2, 2] - 1.0)
    theta = math.atan2(s, c)
    if theta < 1e-8:
        return 0.5 * skew
    if math.pi - theta > 1e-3:
        return (theta / (2.0 * math.sin(theta))) * skew
    # symmetric part: (R + R^T)/2 = cos(theta) I + (1 - cos(theta)) a a^T
    aat = (0.5 * (r + r.T) - c * np.eye(3)) / (1.0 - c)
    k = int(np.argmax(np.diag(aat)))
    axis = aat[:, k] / math.sqrt(max(aat[k, k], 1e-300))
    axis /= np.linalg.norm(axis)
    if axis @ skew < 0.0:
        axis = -axis
    return theta * axis


def rotation_angle(r: np.ndarray) -> float:
    """Geodesic angle of ``r`` in radians."""
    return float(np.linalg.norm(log_so3(r)))


@dataclass(frozen=True, eq=False)
class Transform:
    """Rigid pose ``target <- source``.

    ``None`` labels are wildcards: they chain with anything. Named labels must
    chain exactly under :func:`compose`.
    """

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    target: Optional[str] = None
    source: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float))

    @classmethod
    def identity(cls, target: Optional[str] = None, source: Optional[str] = None) -> "Transform":
        return cls(np.eye(3), np.zeros(3), target, source)

    @classmethod
    def from_matrix(cls, m, target=None, source=None) -> "Transform":
        m = np.asarray(m, dtype=float)
        return cls(m[:3, :3].copy(), m[:3, 3].copy(), target, source)

    @classmethod
    def translate(cls, v, target=None, source=None) -> "Transform":
        return cls(np.eye(3), np.asarray(v, dtype=float), target, source)

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def relabel(self, target: Optional[str] = None, source: Optional[str] = None) -> "Transform":
        return Transform(self.rotation, self.translation, target, source)

    def apply(self, point) -> np.ndarray:
        return self.rotation @ np.asarray(point, dtype=float) + self.translation

    def __matmul__(self, other: "Transform") -> "Transform":
        return compose(self, other)

    def __repr__(self) -> str:
        return (
            f"Transform({self.target}<-{self.source}, "
            f"t={np.array2string(self.translation, precision=4)})"
        )


@dataclass(frozen=True)
class Twist:
    linear: np.ndarray
    angular: np.ndarray
    frame: Optional[str] = None

    @classmethod
    def from_vector(cls, xi, frame: Optional[str] = None) -> "Twist":
        xi = np.asarray(xi, dtype=float)
        return cls(xi[:3].copy(), xi[3:].copy(), frame)

    def vector(self) -> np.ndarray:
        return np.concatenate([self.linear, self.angular])


def _chain_label(inner: Optional[str], outer: Optional[str]) -> None:
    if inner is not None and outer is not None and inner != outer:
        raise FrameMismatchError(f"cannot compose: source {inner!r} != target {outer!r}")


def compose(a: Transform, b: Transform) -> Transform:
    """``a @ b``; requires ``a.source == b.target`` when both are named."""
    _chain_label(a.source, b.target)
    return Transform(
        a.rotation @ b.rotation,
        a.rotation @ b.translation + a.translation,
        a.target,
        b.source,
    )


def invert(t: Transform) -> Transform:
    rt = t.rotation.T
    return Transform(rt, -(rt @ t.translation), t.source, t.target)


def adjoint(t: Transform) -> np.ndarray:
    """6x6 adjoint mapping twists in ``t.source`` coordinates to ``t.target``."""
    r = t.rotation
    ad = np.zeros((6, 6))
    ad[:3, :3] = r
    ad[:3, 3:] = hat(t.translation) @ r
    ad[3:, 3:] = r
    return ad


def interpolate_pose(a: Transform, b: Transform, s: float) -> Transform:
    """Linear translation, geodesic rotation; ``s=0`` gives ``a``, ``s=1`` gives ``b``."""
    if a.target != b.target or a.source != b.source:
        raise FrameMismatchError("interpolate_pose needs poses between the same frames")
    if s <= 0.0:
        return a
    if s >= 1.0:
        return b
    rel = log_so3(a.rotation.T @ b.rotation)
    rot = a.rotation @ exp_so3(s * rel)
    trans = (1.0 - s) * a.translation + s * b.translation
    return Transform(rot, trans, a.target, a.source)


def pose_error(goal: Transform, current: Transform) -> tuple[np.ndarray, np.ndarray]:
    """Displacement from ``goal`` to ``current`` in their common target frame.

    Returns ``(dp, dw)`` with ``dp = p_cur - p_goal`` and
    ``dw = log(R_cur R_goal^T)``.
    """
    dp = current.translation - goal.translation
    dw = log_so3(current.rotation @ goal.rotation.T)
    return dp, dw
