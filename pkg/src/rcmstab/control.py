"""Controllers for the RCM chain under out-of-view reading bias.

* ``rr_oov_step``: resolved-rate law on the 4D linear+roll objective using the
  erroneous factors ``Q(q~4) W(q~2, q~3)`` (the ``S`` factor is dropped).
* ``rr_full_step``: bilevel scheme; a least-squares allocation splits the 6D
  end-effector objective between the out-of-view law and a resolved-rate law on
  the (exactly known) in-view Jacobian.
* ``ik_step``: re-solve IK on the imaginary chain every step.
* ``baseline_step``: 6D resolved rate on a chain built from a one-off
  calibration and the raw readings, with no tracking.

All step functions return velocities for one control step; none of them
integrate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .chain import (
    N_OOV,
    Q3_MIN,
    ChainModel,
    SingularInsertionError,
    body_jacobian_full,
    body_jacobian_inview,
    d_matrix,
    fk_full,
    fk_inview,
    q_matrix,
    s_matrix,
    w_matrix,
)
from .errmodel import B_MINUS, BASE, B_PLUS, CAM, TrackedState, imaginary_link_pose
from .geom import Transform, adjoint, compose, invert, log_so3, pose_error

PINV_RCOND = 1e-8
# rows kept by the 6D -> linear+roll projection (drops angular x, y)
LINROLL_ROWS = (0, 1, 2, 5)

IK_DAMPING = 1e-3
IK_MAX_ITERS = 100
IK_TOL = 1e-6
IK_ORI_WEIGHT = 0.01  # m per rad


def pinv(a: np.ndarray, scale: Optional[float] = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse, singular values below ``1e-8 * s_max`` dropped.

    ``scale`` replaces ``s_max`` in the cut-off when given.
    """
    if scale is None:
        return np.linalg.pinv(a, rcond=PINV_RCOND)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    keep = s > PINV_RCOND * scale
    return (vt[keep].T / s[keep]) @ u[:, keep].T


def complement_projector(j: np.ndarray) -> np.ndarray:
    """Orthogonal projector onto the complement of ``j``'s column space."""
    m = j.shape[0]
    if j.shape[1] == 0:
        return np.eye(m)
    u, s, _ = np.linalg.svd(j)
    rank = int(np.sum(s > PINV_RCOND * s[0])) if s.size and s[0] > 0 else 0
    perp = u[:, rank:]
    return perp @ perp.T


@dataclass
class ControlCommand:
    joint_velocities: np.ndarray
    v_nb: Optional[np.ndarray] = None
    v_n_nb: Optional[np.ndarray] = None
    residual: float = 0.0
    ik_converged: Optional[bool] = None
    q_star: Optional[np.ndarray] = None
    extra: dict = field(default_factory=dict)


def blockdiag_rt(r: np.ndarray, dp: np.ndarray, dw: np.ndarray) -> np.ndarray:
    """``blockdiag(R, R)^T @ (dp; dw)``."""
    return np.concatenate([r.T @ dp, r.T @ dw])


def objective_oov(goal: Transform, current: Transform, r_nb_to_cam: np.ndarray) -> np.ndarray:
    """Linear+roll error of ``current`` w.r.t. ``goal``, in the link-4 frame."""
    dp, dw = pose_error(goal, current)
    return blockdiag_rt(r_nb_to_cam, dp, dw)[list(LINROLL_ROWS)]


def objective_full(goal: Transform, current: Transform, r_full: np.ndarray) -> np.ndarray:
    """6D error of ``current`` w.r.t. ``goal``, rotated into the end-effector frame."""
    dp, dw = pose_error(goal, current)
    return blockdiag_rt(r_full, dp, dw)


def rr_oov_step(
    v: np.ndarray, q2: float, q3: float, q4: float, alpha: float, include_s: bool = False
) -> ControlCommand:
    """``qdot_1:4 = -alpha (Q~ W~)^+ v`` from the (biased) readings.

    ``include_s=True`` uses ``(Q~ W~ S~)^+`` instead, i.e. it also cancels the
    yaw-to-roll coupling ``qdot_1 sin q2``. Off by default: the published law
    drops ``S`` and the stability certificate is derived for that law.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if not q3 > Q3_MIN:
        raise SingularInsertionError(f"insertion reading {q3} m must exceed {Q3_MIN} m")
    qw = q_matrix(q4) @ w_matrix(q2, q3)
    if include_s:
        qw = qw @ s_matrix(q2)
    v = np.asarray(v, dtype=float)
    qdot = -alpha * (pinv(qw) @ v)
    return ControlCommand(qdot, v_nb=v)


def bilevel_allocate(
    v_n: np.ndarray, j_inview: np.ndarray, ad: np.ndarray, d_tilde: np.ndarray
) -> tuple[np.ndarray, np.ndarray, float]:
    """Split ``v_n`` between the out-of-view and in-view controllers.

    Picks the out-of-view objective ``x`` minimising the part of
    ``v_n - Ad D~ x`` the in-view chain cannot realise, i.e. the component
    outside the column space of ``j_inview``. Returns ``(x, v_n - Ad D~ x,
    residual_norm)``.
    """
    v_n = np.asarray(v_n, dtype=float)
    p_perp = complement_projector(j_inview)
    lift = ad @ d_tilde
    # cut-off relative to the unprojected lift, so a (numerically) zero P_perp
    # gives x = 0 rather than amplified round-off
    ref = float(np.linalg.norm(lift, 2))
    x = pinv(p_perp @ lift, ref) @ (p_perp @ v_n)
    v_rest = v_n - lift @ x
    residual = float(np.linalg.norm(p_perp @ v_rest))
    return x, v_rest, residual


def rr_inview_step(v: np.ndarray, j_inview: np.ndarray, alpha: float) -> ControlCommand:
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    qdot = -alpha * (pinv(j_inview) @ np.asarray(v, dtype=float))
    return ControlCommand(qdot, v_n_nb=np.asarray(v, dtype=float))


def rr_oov_control(
    goal_cam: Transform,
    observed: Transform,
    tracked: TrackedState,
    chain: ChainModel,
    alpha: float,
    include_s: bool = False,
) -> ControlCommand:
    """Out-of-view-only chain: objective on link 4 plus ``rr_oov_step``."""
    r_nb = imaginary_link_pose(chain, tracked).rotation
    v = objective_oov(goal_cam, observed, r_nb)
    q = tracked.readings
    cmd = rr_oov_step(v, q[1], q[2], q[3], alpha, include_s)
    if chain.n_inview:
        cmd.joint_velocities = np.concatenate([cmd.joint_velocities, np.zeros(chain.n_inview)])
    return cmd


def rr_full_step(
    goal_cam: Transform,
    observed: Transform,
    tracked: TrackedState,
    chain: ChainModel,
    alpha: float,
    include_s: bool = False,
) -> ControlCommand:
    """Bilevel resolved-rate step over the whole chain."""
    q = tracked.readings
    v_n = objective_full(goal_cam, observed, observed.rotation)
    q_in = q[N_OOV:]
    j_in = body_jacobian_inview(chain, q_in)
    ad = adjoint(invert(fk_inview(chain, q_in)))  # link 4 twists -> last-link twists
    v_nb, v_rest, residual = bilevel_allocate(v_n, j_in, ad, d_matrix(q[2]))
    low = rr_oov_step(v_nb, q[1], q[2], q[3], alpha, include_s)
    qdot = low.joint_velocities
    if chain.n_inview:
        qdot = np.concatenate([qdot, rr_inview_step(v_rest, j_in, alpha).joint_velocities])
    return ControlCommand(qdot, v_nb=v_nb, v_n_nb=v_rest, residual=residual, extra={"v_n": v_n})


def rr6_step(goal_cam: Transform, estimate: Transform, jac: np.ndarray, alpha: float) -> ControlCommand:
    """Plain 6D resolved rate, ``qdot = -alpha J^+ v`` with ``v`` from ``estimate``."""
    v = objective_full(goal_cam, estimate, estimate.rotation)
    return ControlCommand(-alpha * (pinv(jac) @ v), extra={"v_n": v})


def rr_lumped_step(
    goal_cam: Transform, observed: Transform, tracked: TrackedState, chain: ChainModel, alpha: float
) -> ControlCommand:
    """6D resolved rate on the imaginary (lumped-error) chain."""
    return rr6_step(goal_cam, observed, body_jacobian_full(chain, tracked.readings), alpha)


def baseline_step(
    goal_cam: Transform,
    readings,
    initial_calib: Transform,
    chain: ChainModel,
    alpha: float,
    camera_extrinsic: Optional[Transform] = None,
) -> ControlCommand:
    """Resolved rate on the chain from a fixed calibration and raw readings."""
    ext = Transform.identity(CAM, B_MINUS) if camera_extrinsic is None else camera_extrinsic
    calib = initial_calib.relabel(B_MINUS, BASE)
    estimate = compose(compose(ext, calib), fk_full(chain, readings, BASE))
    return rr6_step(goal_cam, estimate, body_jacobian_full(chain, readings), alpha)


@dataclass
class IKResult:
    q: np.ndarray
    residual: float
    converged: bool
    iterations: int


def _weighted_error(target: Transform, current: Transform, w_ori: float) -> np.ndarray:
    dp = target.translation - current.translation
    dw = log_so3(target.rotation @ current.rotation.T)
    return np.concatenate([dp, w_ori * dw])


def solve_ik(
    chain: ChainModel,
    target: Transform,
    q0,
    base: str = BASE,
    damping: float = IK_DAMPING,
    max_iters: int = IK_MAX_ITERS,
    tol: float = IK_TOL,
    w_ori: float = IK_ORI_WEIGHT,
) -> IKResult:
    """Damped least squares on the weighted pose residual ``(dp, w_ori * dw)``.

    Stops early once the update stalls; the result is flagged converged only
    if the residual norm drops below ``tol``.
    """
    q = np.array(q0, dtype=float)
    n = q.size
    lam2 = damping * damping
    scale = np.concatenate([np.ones(3), np.full(3, w_ori)])
    err = None
    for it in range(1, max_iters + 1):
        t = fk_full(chain, q, base)
        err = _weighted_error(target, t, w_ori)
        res = float(np.linalg.norm(err))
        if res < tol:
            return IKResult(q, res, True, it - 1)
        jb = body_jacobian_full(chain, q)
        r = t.rotation
        jac = np.vstack([r @ jb[:3], r @ jb[3:]]) * scale[:, None]
        dq = np.linalg.solve(jac.T @ jac + lam2 * np.eye(n), jac.T @ err)
        q = q + dq
        q[2] = max(q[2], 2.0 * Q3_MIN)
        if float(np.linalg.norm(dq)) < 1e-12:
            break
    t = fk_full(chain, q, base)
    res = float(np.linalg.norm(_weighted_error(target, t, w_ori)))
    return IKResult(q, res, res < tol, it)


def clamp_velocity(qdot: np.ndarray, limit: float) -> np.ndarray:
    return np.clip(qdot, -limit, limit)


def ik_step(
    goal_cam: Transform,
    tracked: TrackedState,
    chain: ChainModel,
    alpha: float,
    warm_start=None,
) -> ControlCommand:
    """Move the goal into frame b+, solve IK there, step towards the solution."""
    to_bplus = invert(compose(tracked.camera_extrinsic, tracked.lumped))
    target = compose(to_bplus, goal_cam)
    q_read = tracked.readings
    seed = q_read if warm_start is None else warm_start
    sol = solve_ik(chain, target, seed, base=B_PLUS)
    qdot = clamp_velocity(-alpha * (q_read - sol.q), 10.0 * alpha)
    return ControlCommand(
        qdot, residual=sol.residual, ik_converged=sol.converged, q_star=sol.q,
        extra={"ik_iterations": sol.iterations},
    )
