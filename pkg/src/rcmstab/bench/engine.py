"""Episode sampling, the rollout loop and per-rollout metrics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..chain import N_OOV, ChainModel
from ..control import (
    baseline_step,
    ik_step,
    objective_full,
    objective_oov,
    rr_full_step,
    rr_oov_control,
)
from ..errmodel import B_MINUS, BASE, ErrorState, imaginary_link_pose, track, true_pose
from ..geom import Transform, interpolate_pose, log_so3
from ..stability import yaw_leak_ratio
from .config import EpisodeConfig

log = logging.getLogger(__name__)

YAW_LEAK_WARN = 0.1
DIVERGE_LIMIT = 1e6


@dataclass(frozen=True, eq=False)
class Episode:
    start_pose: Transform
    goal_pose: Transform
    q_start: np.ndarray
    q_goal: np.ndarray


def admissible_box(chain: ChainModel, bias=None) -> np.ndarray:
    """Joint box where both the true values and the readings ``q - bias`` respect the limits."""
    box = np.array(chain.limits, dtype=float)
    if bias is None:
        return box
    b = np.zeros(chain.n)
    b[:N_OOV] = bias
    lo = np.maximum(box[:, 0], box[:, 0] + b)
    hi = np.minimum(box[:, 1], box[:, 1] + b)
    pinch = lo > hi
    if np.any(lo - hi > 1e-9):
        raise ValueError("bias exceeds the joint range; no admissible configuration")
    mid = 0.5 * (lo + hi)
    lo = np.where(pinch, mid, lo)
    hi = np.where(pinch, mid, hi)
    return np.stack([lo, hi], axis=1)


def sample_fractions(n: int, seed) -> np.ndarray:
    """Two uniform draws in the unit cube, one for the start and one for the goal."""
    return np.random.default_rng(seed).random((2, n))


def sample_episode(
    chain: ChainModel,
    seed,
    box: Optional[np.ndarray] = None,
    calib: Optional[Transform] = None,
) -> Episode:
    """Uniform start/goal joint vectors inside ``box`` (default: the joint limits).

    Poses come from forward kinematics of the true chain, so both lie in its
    workspace.
    """
    box = chain.limits if box is None else box
    u = sample_fractions(chain.n, seed)
    qs = box[:, 0] + u * (box[:, 1] - box[:, 0])
    return Episode(
        true_pose(chain, qs[0], calib), true_pose(chain, qs[1], calib), qs[0], qs[1]
    )


@dataclass
class RolloutRecord:
    controller: str
    chain_mode: str
    bias: np.ndarray
    final_goal: Transform
    goal_p: np.ndarray
    goal_R: np.ndarray
    act_p: np.ndarray
    act_R: np.ndarray
    q_true: np.ndarray
    q_read: np.ndarray
    qdot: np.ndarray
    lyap_v: np.ndarray
    converged: bool
    diverged: bool
    iterations: int
    ik_failures: int = 0
    yaw_leak: Optional[float] = None  # ||qdot1 sin q2|| / ||qdot4|| over the rollout
    level: float = 0.0
    traj_id: int = 0
    seed: int = 0
    summary: dict = field(default_factory=dict)

    @property
    def V(self) -> np.ndarray:
        return 0.5 * np.einsum("ij,ij->i", self.lyap_v, self.lyap_v)


def _ori_deg(r_a: np.ndarray, r_b: np.ndarray) -> float:
    return math.degrees(float(np.linalg.norm(log_so3(r_a @ r_b.T))))


def metrics(record: RolloutRecord) -> dict:
    """Final and RMS tracking errors (mm, deg) of a rollout."""
    if len(record.act_p) == 0:
        raise ValueError("record has no steps")
    g = record.final_goal
    final_pos = 1e3 * float(np.linalg.norm(record.act_p[-1] - g.translation))
    final_ori = _ori_deg(record.act_R[-1], g.rotation)
    dp = np.linalg.norm(record.act_p - record.goal_p, axis=1)
    do = np.array([_ori_deg(a, b) for a, b in zip(record.act_R, record.goal_R)])
    return {
        "final_pos_mm": final_pos,
        "final_ori_deg": final_ori,
        "rms_pos_mm": 1e3 * float(np.sqrt(np.mean(dp * dp))),
        "rms_ori_deg": float(np.sqrt(np.mean(do * do))),
        "iters": int(record.iterations),
        "converged": bool(record.converged),
    }


def _monitor_objective(mode, goal, observed, tracked, chain) -> np.ndarray:
    if mode == "oov":
        return objective_oov(goal, observed, imaginary_link_pose(chain, tracked).rotation)
    return objective_full(goal, observed, observed.rotation)


def run_rollout(
    controller: str,
    chain_mode: str,
    chain: ChainModel,
    err: ErrorState,
    cfg: EpisodeConfig,
    episode: Episode,
    box: Optional[np.ndarray] = None,
) -> RolloutRecord:
    """Simulate one episode: goal trajectory stage, then a stationary goal.

    True joints are integrated with ``q += qdot * step_size`` and clamped to
    ``box`` (default: where both true values and readings are admissible).
    The rollout ends early once the end effector is within both convergence
    thresholds of the final goal.
    """
    if controller not in ("rr", "ik", "baseline"):
        raise ValueError(f"unknown controller {controller!r}")
    box = admissible_box(chain, err.bias) if box is None else box
    alpha = cfg.alpha
    vmax = cfg.velocity_clamp * alpha
    initial_calib = Transform.identity(B_MINUS, BASE)
    q = np.clip(np.array(episode.q_start, dtype=float), box[:, 0], box[:, 1])
    final_goal = episode.goal_pose

    goal_p, goal_r, act_p, act_r = [], [], [], []
    qs, qr, qd, lv = [], [], [], []
    converged = diverged = False
    ik_failures = 0
    warm = None

    for k in range(cfg.total_iters):
        s = min(k / cfg.trajectory_iters, 1.0)
        goal = interpolate_pose(episode.start_pose, final_goal, s)
        observed, tracked = track(chain, q, err)
        goal_p.append(goal.translation)
        goal_r.append(goal.rotation)
        act_p.append(observed.translation)
        act_r.append(observed.rotation)
        qs.append(q.copy())
        qr.append(tracked.readings)
        lv.append(_monitor_objective(chain_mode, goal, observed, tracked, chain))

        pos_err = float(np.linalg.norm(observed.translation - final_goal.translation))
        ori_err = float(np.linalg.norm(log_so3(observed.rotation @ final_goal.rotation.T)))
        if pos_err <= cfg.converge_pos and ori_err <= cfg.converge_ori:
            converged = True
            qd.append(np.zeros(chain.n))
            break

        if controller == "rr":
            if chain_mode == "oov":
                cmd = rr_oov_control(goal, observed, tracked, chain, alpha, cfg.rr_include_s)
            else:
                cmd = rr_full_step(goal, observed, tracked, chain, alpha, cfg.rr_include_s)
        elif controller == "ik":
            cmd = ik_step(goal, tracked, chain, alpha, warm_start=warm)
            warm = cmd.q_star
            ik_failures += not cmd.ik_converged
        else:
            cmd = baseline_step(goal, tracked.readings, initial_calib, chain, alpha)

        qdot = np.clip(cmd.joint_velocities, -vmax, vmax)
        qd.append(qdot)
        q_next = q + qdot * cfg.step_size
        if not np.all(np.isfinite(q_next)) or np.max(np.abs(q_next)) > DIVERGE_LIMIT:
            diverged = True
            break
        q = np.clip(q_next, box[:, 0], box[:, 1])

    a1 = None
    if controller == "rr" and qd:
        m = min(len(qd), len(qr))
        a1 = yaw_leak_ratio(np.array(qd[:m]), np.array(qr[:m])[:, 1])
        if a1 is not None and a1 > YAW_LEAK_WARN:
            log.warning(
                "%s/%s: ||qdot1 sin q2|| / ||qdot4|| = %.3g over the rollout (> %.1f)",
                controller, chain_mode, a1, YAW_LEAK_WARN,
            )

    record = RolloutRecord(
        controller=controller,
        chain_mode=chain_mode,
        bias=err.bias.copy(),
        final_goal=final_goal,
        goal_p=np.array(goal_p),
        goal_R=np.array(goal_r),
        act_p=np.array(act_p),
        act_R=np.array(act_r),
        q_true=np.array(qs),
        q_read=np.array(qr),
        qdot=np.array(qd),
        lyap_v=np.array(lv),
        converged=converged,
        diverged=diverged,
        iterations=len(act_p),
        ik_failures=ik_failures,
        yaw_leak=a1,
    )
    record.summary = metrics(record)
    return record
