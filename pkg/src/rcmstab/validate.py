"""Fast invariant checks run by ``rcmstab validate``.

Each check returns ``(passed, detail)``. They use fixed seeds and small sample
counts so the whole suite runs in a couple of seconds.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .chain import (
    body_jacobian_full,
    body_jacobian_oov,
    dqws_factors,
    fk_full,
    fk_oov,
    lnd_chain,
)
from .errmodel import ErrorState, imaginary_pose, track, true_pose
from .geom import Transform, adjoint, compose, exp_so3, invert, log_so3, vee
from .stability import derive_tau, hessian_H, matrix_M


def random_config(chain, rng, q3_min: float = 0.01) -> np.ndarray:
    lim = chain.limits
    q = rng.uniform(lim[:, 0], lim[:, 1])
    q[2] = max(q[2], q3_min)
    return q


def random_transform(rng, scale: float = 0.2) -> Transform:
    w = rng.normal(size=3)
    w *= rng.uniform(0.0, 3.0) / np.linalg.norm(w)
    return Transform(exp_so3(w), rng.normal(scale=scale, size=3))


def fd_body_jacobian(fk: Callable, q: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference body Jacobian, ``vee(T^-1 dT/dq_i)`` per column."""
    t_inv = np.linalg.inv(fk(q).matrix())
    cols = []
    for i in range(q.size):
        dq = np.zeros(q.size)
        dq[i] = h
        dt = (fk(q + dq).matrix() - fk(q - dq).matrix()) / (2.0 * h)
        b = t_inv @ dt
        cols.append(np.concatenate([b[:3, 3], vee(b[:3, :3])]))
    return np.array(cols).T


def check_decomposition(n: int = 500, seed: int = 0):
    rng = np.random.default_rng(seed)
    chain = lnd_chain()
    worst = 0.0
    for _ in range(n):
        q = random_config(chain, rng)
        f = dqws_factors(q[1], q[2], q[3])
        worst = max(worst, float(np.max(np.abs(f.product() - body_jacobian_oov(q)))))
    return worst < 1e-9, f"max |DQWS - J| = {worst:.2e}"


def check_jacobian_fd(n: int = 100, seed: int = 1):
    rng = np.random.default_rng(seed)
    chain = lnd_chain()
    worst = 0.0
    for _ in range(n):
        q = random_config(chain, rng)
        worst = max(worst, float(np.max(np.abs(fd_body_jacobian(fk_oov, q[:4]) - body_jacobian_oov(q)))))
        fd = fd_body_jacobian(lambda x: fk_full(chain, x), q)
        worst = max(worst, float(np.max(np.abs(fd - body_jacobian_full(chain, q)))))
    return worst < 1e-5, f"max |J_fd - J| = {worst:.2e}"


def check_rcm(n: int = 200, seed: int = 2):
    rng = np.random.default_rng(seed)
    chain = lnd_chain()
    worst = 0.0
    for _ in range(n):
        q = random_config(chain, rng)
        worst = max(worst, abs(float(np.linalg.norm(fk_oov(q).translation)) - q[2]))
    return worst < 1e-12, f"max | |p| - q3 | = {worst:.2e}"


def check_tracking(n: int = 100, seed: int = 3):
    rng = np.random.default_rng(seed)
    chain = lnd_chain()
    worst = 0.0
    for _ in range(n):
        q = random_config(chain, rng)
        calib = random_transform(rng, 0.02)
        err = ErrorState(rng.normal(scale=0.2, size=4) * [0, 1, 0.1, 1], calib)
        observed, tracked = track(chain, q, err)
        rebuilt = imaginary_pose(chain, tracked)
        worst = max(worst, float(np.max(np.abs(rebuilt.matrix() - observed.matrix()))))
        truth = true_pose(chain, q, err.calib_error)
        worst = max(worst, float(np.max(np.abs(truth.matrix() - observed.matrix()))))
    return worst < 1e-10, f"max imaginary-chain mismatch = {worst:.2e}"


def check_geometry(n: int = 200, seed: int = 4):
    rng = np.random.default_rng(seed)
    worst_log = worst_ad = worst_inv = 0.0
    for _ in range(n):
        w = rng.normal(size=3)
        w *= rng.uniform(0.0, 3.0) / np.linalg.norm(w)
        worst_log = max(worst_log, float(np.max(np.abs(log_so3(exp_so3(w)) - w))))
        a, b = random_transform(rng), random_transform(rng)
        worst_ad = max(worst_ad, float(np.max(np.abs(adjoint(compose(a, b)) - adjoint(a) @ adjoint(b)))))
        worst_inv = max(worst_inv, float(np.max(np.abs(compose(a, invert(a)).matrix() - np.eye(4)))))
    ok = worst_log < 1e-8 and worst_ad < 1e-9 and worst_inv < 1e-10
    return ok, f"log/exp {worst_log:.1e}, adjoint {worst_ad:.1e}, inverse {worst_inv:.1e}"


def check_certificate(n: int = 200, seed: int = 5):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        q2 = rng.uniform(-0.9, 0.9)
        q3 = rng.uniform(0.06, 0.24)
        worst = max(worst, float(np.max(np.abs(matrix_M(q2, q3, q2, q3, 0.0) - np.eye(4)))))
        worst = max(worst, float(np.max(np.abs(hessian_H(q2, q3, q2, q3, 0.0) - 2 * np.eye(4)))))
    return worst <= 1e-12, f"max |M - I|, |H - 2I| = {worst:.1e}"


def check_tau():
    res = derive_tau()
    deg, cf = res.tau_deg, math.degrees(res.tau_closed_form)
    ok = 74.0 <= deg <= 77.0 and abs(deg - cf) <= 0.5
    return ok, f"tau = {deg:.2f} deg (closed form {cf:.2f} deg)"


CHECKS = {
    "geometry": check_geometry,
    "decomposition": check_decomposition,
    "jacobian_fd": check_jacobian_fd,
    "rcm_property": check_rcm,
    "perfect_tracking": check_tracking,
    "certificate": check_certificate,
    "tau": check_tau,
}


def run_all() -> list[tuple[str, bool, str]]:
    out = []
    for name, fn in CHECKS.items():
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, bool(ok), detail))
    return out
