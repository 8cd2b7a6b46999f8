"""Kinematic model of an RCM manipulator.

The first ``N_OOV = 4`` joints (outer yaw, outer pitch, insertion, roll) form
the out-of-view segment with fixed canonical geometry

    T(q) = Rot_x(q1) Rot_y(q2) Transl_z(q3) Rot_z(q4)

so the remote center sits at the base origin. The remaining joints form a
configurable in-view tool segment. Joint index 2 (zero-based) is the
insertion, in meters; all other joints are revolute, in radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geom import Transform, adjoint, axis_index, compose, invert, rot_axis

N_OOV = 4
Q3_MIN = 0.005  # m; D and W are singular at zero insertion

DEFAULT_OOV_LIMITS = (
    (-math.radians(90.0), math.radians(90.0)),
    (-math.radians(53.0), math.radians(53.0)),
    (0.0565, 0.2400),
    (-math.radians(90.0), math.radians(90.0)),
)
DEFAULT_INVIEW_LIMIT = math.radians(80.0)
LND_WRIST_OFFSET = 0.0091  # m, pitch-to-yaw axis distance


class SingularInsertionError(ValueError):
    """Insertion depth at or below ``Q3_MIN``."""


class JointLimitError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class InViewJoint:
    """One revolute in-view joint: fixed ``pre`` transform, then rotation about ``axis``."""

    axis: str
    pre: Transform = field(default_factory=Transform.identity)

    def __post_init__(self):
        axis_index(self.axis)


@dataclass(frozen=True, eq=False)
class ChainModel:
    inview: tuple = ()
    limits: np.ndarray = None  # (n, 2)
    name: str = "chain"

    def __post_init__(self):
        object.__setattr__(self, "inview", tuple(self.inview))
        n = N_OOV + len(self.inview)
        if self.limits is None:
            lim = list(DEFAULT_OOV_LIMITS) + [
                (-DEFAULT_INVIEW_LIMIT, DEFAULT_INVIEW_LIMIT)
            ] * len(self.inview)
        else:
            lim = self.limits
        lim = np.array(lim, dtype=float)
        if lim.shape != (n, 2):
            raise ValueError(f"limits must have shape ({n}, 2), got {lim.shape}")
        if np.any(lim[:, 0] >= lim[:, 1]):
            raise ValueError("joint limits need lo < hi")
        if lim[2, 0] <= 0.0:
            raise ValueError("insertion lower limit must be strictly positive")
        lim.setflags(write=False)
        object.__setattr__(self, "limits", lim)

    @property
    def n(self) -> int:
        return N_OOV + len(self.inview)

    @property
    def n_inview(self) -> int:
        return len(self.inview)

    def with_limits(self, limits) -> "ChainModel":
        return ChainModel(self.inview, limits, self.name)

    def admissible(self, q, tol: float = 0.0) -> bool:
        q = np.asarray(q, dtype=float)
        return bool(
            np.all(np.isfinite(q))
            and np.all(q >= self.limits[:, 0] - tol)
            and np.all(q <= self.limits[:, 1] + tol)
        )

    def check_admissible(self, q) -> None:
        if not self.admissible(q):
            raise JointLimitError(f"joint vector {np.asarray(q)} outside limits")


def out_of_view_chain(limits=None) -> ChainModel:
    """The bare 4-DOF RCM chain (no tool wrist)."""
    lim = DEFAULT_OOV_LIMITS if limits is None else limits
    return ChainModel((), lim, name="oov")


def lnd_chain(limits=None, wrist_offset: float = LND_WRIST_OFFSET) -> ChainModel:
    """RCM chain plus a two-joint needle-driver-like wrist (pitch about x, yaw about y)."""
    inview = (
        InViewJoint("x"),
        InViewJoint("y", Transform.translate([wrist_offset, 0.0, 0.0])),
    )
    return ChainModel(inview, limits, name="full")


def _guard_insertion(q3: float) -> None:
    if not q3 > Q3_MIN:
        raise SingularInsertionError(f"insertion {q3} m must exceed {Q3_MIN} m")


def fk_oov(q, base: str = "base") -> Transform:
    """Pose of link 4 in the base frame."""
    q1, q2, q3, q4 = (float(x) for x in q[:N_OOV])
    _guard_insertion(q3)
    c1, s1 = math.cos(q1), math.sin(q1)
    c2, s2 = math.cos(q2), math.sin(q2)
    c4, s4 = math.cos(q4), math.sin(q4)
    # Rx(q1) Ry(q2)
    a = np.array(
        [[c2, 0.0, s2], [s1 * s2, c1, -s1 * c2], [-c1 * s2, s1, c1 * c2]]
    )
    rz = np.array([[c4, -s4, 0.0], [s4, c4, 0.0], [0.0, 0.0, 1.0]])
    return Transform(a @ rz, q3 * a[:, 2], base, "link4")


def body_jacobian_oov(q) -> np.ndarray:
    """6x4 body Jacobian of link 4 (rows: linear xyz, angular xyz)."""
    _, q2, q3, q4 = (float(x) for x in q[:N_OOV])
    _guard_insertion(q3)
    c2, s2 = math.cos(q2), math.sin(q2)
    c4, s4 = math.cos(q4), math.sin(q4)
    return np.array(
        [
            [-q3 * c2 * s4, q3 * c4, 0.0, 0.0],
            [-q3 * c2 * c4, -q3 * s4, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [c2 * c4, s4, 0.0, 0.0],
            [-c2 * s4, c4, 0.0, 0.0],
            [s2, 0.0, 0.0, 1.0],
        ]
    )


@dataclass(frozen=True, eq=False)
class JacobianFactors:
    D: np.ndarray
    Q: np.ndarray
    W: np.ndarray
    S: np.ndarray

    def product(self) -> np.ndarray:
        return self.D @ self.Q @ self.W @ self.S


def d_matrix(q3: float) -> np.ndarray:
    """6x4 lift from linear+roll space to twists."""
    _guard_insertion(q3)
    d = np.zeros((6, 4))
    d[0, 0] = d[1, 1] = d[2, 2] = d[5, 3] = 1.0
    d[3, 1] = -1.0 / q3
    d[4, 0] = 1.0 / q3
    return d


def q_matrix(q4: float) -> np.ndarray:
    c4, s4 = math.cos(q4), math.sin(q4)
    return np.array(
        [[-s4, c4, 0.0, 0.0], [-c4, -s4, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]]
    )


def w_matrix(q2: float, q3: float) -> np.ndarray:
    return np.diag([q3 * math.cos(q2), q3, 1.0, 1.0])


def s_matrix(q2: float) -> np.ndarray:
    s = np.eye(4)
    s[3, 0] = math.sin(q2)
    return s


def dqws_factors(q2: float, q3: float, q4: float) -> JacobianFactors:
    return JacobianFactors(d_matrix(q3), q_matrix(q4), w_matrix(q2, q3), s_matrix(q2))


def _inview_partials(chain: ChainModel, q_in: Sequence[float]) -> list:
    """Cumulative transforms link4 <- frame after each in-view joint."""
    q_in = np.asarray(q_in, dtype=float)
    if q_in.shape != (chain.n_inview,):
        raise ValueError(f"expected {chain.n_inview} in-view joints, got {q_in.shape}")
    frames = []
    rot = np.eye(3)
    trans = np.zeros(3)
    for joint, qi in zip(chain.inview, q_in):
        trans = rot @ joint.pre.translation + trans
        rot = rot @ joint.pre.rotation @ rot_axis(joint.axis, float(qi))
        frames.append((rot, trans))
    return frames


def fk_inview(chain: ChainModel, q_in) -> Transform:
    """Pose of the last link in the link-4 frame."""
    target, source = "link4", f"link{chain.n}"
    if chain.n_inview == 0:
        return Transform.identity(target, source)
    rot, trans = _inview_partials(chain, q_in)[-1]
    return Transform(rot, trans, target, source)


def fk_full(chain: ChainModel, q, base: str = "base", check: bool = False) -> Transform:
    q = np.asarray(q, dtype=float)
    if check:
        chain.check_admissible(q)
    t = fk_oov(q, base)
    if chain.n_inview == 0:
        return t
    return compose(t, fk_inview(chain, q[N_OOV:]))


def body_jacobian_inview(chain: ChainModel, q_in) -> np.ndarray:
    """6 x (n - 4) body Jacobian of the last link w.r.t. the in-view joints."""
    m = chain.n_inview
    jac = np.zeros((6, m))
    if m == 0:
        return jac
    frames = _inview_partials(chain, q_in)
    r_end, p_end = frames[-1]
    for i, (joint, (r_i, p_i)) in enumerate(zip(chain.inview, frames)):
        # axis of joint i through the origin of frame i, expressed in the end frame
        axis = r_end.T @ r_i[:, axis_index(joint.axis)]
        origin = r_end.T @ (p_i - p_end)
        jac[:3, i] = np.cross(origin, axis)
        jac[3:, i] = axis
    return jac


def body_jacobian_full(chain: ChainModel, q) -> np.ndarray:
    """6 x n body Jacobian of the last link for the whole chain."""
    q = np.asarray(q, dtype=float)
    j_oov = body_jacobian_oov(q)
    if chain.n_inview == 0:
        return j_oov
    t_in = fk_inview(chain, q[N_OOV:])
    return np.hstack([adjoint(invert(t_in)) @ j_oov, body_jacobian_inview(chain, q[N_OOV:])])


def chain_from_dict(cfg: Optional[dict], limits_cfg: Optional[dict] = None) -> ChainModel:
    """Build a chain from the ``chain``/``limits`` config sections.

    ``chain``: ``{"tool": "lnd"|"none", "inview": [{"axis": "x", "pre_translation": [..],
    "pre_rpy_deg": [..]}, ...], "wrist_offset": 0.0091}``.
    ``limits``: degrees for revolute joints, meters for insertion; keys ``oov`` (4 pairs)
    and ``inview`` (one pair per in-view joint, or a single pair for all).
    """
    cfg = dict(cfg or {})
    if "inview" in cfg:
        inview = []
        for entry in cfg["inview"]:
            rpy = np.radians(entry.get("pre_rpy_deg", [0.0, 0.0, 0.0]))
            rot = rot_axis("z", rpy[2]) @ rot_axis("y", rpy[1]) @ rot_axis("x", rpy[0])
            pre = Transform(rot, entry.get("pre_translation", [0.0, 0.0, 0.0]))
            inview.append(InViewJoint(entry["axis"], pre))
    else:
        tool = cfg.get("tool", "lnd")
        if tool == "lnd":
            inview = list(lnd_chain(wrist_offset=cfg.get("wrist_offset", LND_WRIST_OFFSET)).inview)
        elif tool in ("none", "oov"):
            inview = []
        else:
            raise ValueError(f"unknown tool {tool!r}")
    limits = None
    if limits_cfg:
        oov = limits_cfg.get("oov")
        lim = []
        if oov is None:
            lim = [list(p) for p in DEFAULT_OOV_LIMITS]
        else:
            for j, (lo, hi) in enumerate(oov):
                if j == 2:
                    lim.append([float(lo), float(hi)])
                else:
                    lim.append([math.radians(lo), math.radians(hi)])
        iv = limits_cfg.get("inview")
        if iv is None:
            iv = [[-80.0, 80.0]] * len(inview)
        elif len(iv) == 2 and not isinstance(iv[0], (list, tuple)):
            iv = [iv] * len(inview)
        lim.extend([math.radians(lo), math.radians(hi)] for lo, hi in iv)
        limits = lim
    return ChainModel(tuple(inview), limits, cfg.get("name", "full" if inview else "oov"))
