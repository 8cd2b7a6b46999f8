"""Lyapunov certificate for the out-of-view resolved-rate law.

With ``V = 1/2 |v|^2`` on the linear+roll objective and the closed loop
``v' = -alpha Q W (Q~ W~)^+ v``, the derivative is

    V' = -alpha * u^T M u,    u = Q~^T v

where ``M`` depends on the true/read pitch and insertion and on the roll bias
``e4``. ``V' < 0`` for all ``v != 0`` iff ``H = M + M^T`` is positive definite.
Only the upper 2x2 block of ``H`` is non-trivial, and its determinant
condition reduces to ``tan^2(e4) < 4 r / (1 - r)^2`` with
``r = cos q2 / cos q~2`` (plus ``cos e4 > 0``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .chain import DEFAULT_OOV_LIMITS, q_matrix

SYM_TOL = 1e-9
# minors within round-off of zero (relative to |H|^k) do not count as positive
PD_TOL = 1e-12


class CertificateDomainError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class StabilityReport:
    M: np.ndarray
    H: np.ndarray
    leading_minors: np.ndarray
    positive_definite: bool
    lyapunov_V: float


@dataclass(frozen=True)
class TauResult:
    tau: float  # rad
    argmin_state: tuple  # (q2, q~2) in rad at the binding cell
    grid_resolution: float  # rad
    tau_closed_form: float  # rad

    @property
    def tau_deg(self) -> float:
        return math.degrees(self.tau)


def _ratios(q2, q3, q2r, q3r):
    if not (q3 > 0 and q3r > 0):
        raise CertificateDomainError("insertions must be positive")
    c2r = math.cos(q2r)
    if abs(c2r) < 1e-12 or abs(q2) >= math.pi / 2 or abs(q2r) >= math.pi / 2:
        raise CertificateDomainError("pitch must lie strictly inside (-pi/2, pi/2)")
    b = q3 / q3r
    return b * math.cos(q2) / c2r, b


def matrix_M(q2: float, q3: float, q2r: float, q3r: float, e4: float) -> np.ndarray:
    """Certificate matrix; ``q2, q3`` true, ``q2r, q3r`` readings, ``e4`` roll bias."""
    a, b = _ratios(q2, q3, q2r, q3r)
    c, s = math.cos(e4), math.sin(e4)
    m = np.eye(4)
    m[0, 0] = a * c
    m[0, 1] = b * s
    m[1, 0] = -a * s
    m[1, 1] = b * c
    return m


def hessian_H(q2: float, q3: float, q2r: float, q3r: float, e4: float) -> np.ndarray:
    """Hessian of ``x -> x^T M x``, entrywise."""
    a, b = _ratios(q2, q3, q2r, q3r)
    c, s = math.cos(e4), math.sin(e4)
    r = a / b
    off = b * (1.0 - r) * s
    h = 2.0 * np.eye(4)
    h[0, 0] = 2.0 * a * c
    h[1, 1] = 2.0 * b * c
    h[0, 1] = h[1, 0] = off
    return h


def leading_minors(h: np.ndarray) -> np.ndarray:
    return np.array([np.linalg.det(h[:k, :k]) for k in range(1, h.shape[0] + 1)])


def sylvester_pd(h: np.ndarray) -> tuple[bool, np.ndarray]:
    """Positive definiteness by Sylvester's criterion; returns ``(flag, minors)``."""
    h = np.asarray(h, dtype=float)
    if np.max(np.abs(h - h.T)) > SYM_TOL:
        raise ValueError("Sylvester's criterion needs a symmetric matrix")
    minors = leading_minors(h)
    scale = max(float(np.max(np.abs(h))), 1e-300)
    tol = PD_TOL * scale ** np.arange(1, h.shape[0] + 1)
    return bool(np.all(minors > tol)), minors


def vdot_certificate(v: np.ndarray, q_true, q_read, alpha: float) -> float:
    """Predicted ``V'`` from the certificate, ``-alpha u^T M u`` with ``u = Q~^T v``."""
    m = matrix_M(q_true[1], q_true[2], q_read[1], q_read[2], q_true[3] - q_read[3])
    u = q_matrix(q_read[3]).T @ np.asarray(v, dtype=float)
    return float(-alpha * (u @ m @ u))


def certificate(v: np.ndarray, q_true, q_read) -> StabilityReport:
    e4 = q_true[3] - q_read[3]
    m = matrix_M(q_true[1], q_true[2], q_read[1], q_read[2], e4)
    h = hessian_H(q_true[1], q_true[2], q_read[1], q_read[2], e4)
    pd, minors = sylvester_pd(h)
    v = np.asarray(v, dtype=float)
    return StabilityReport(m, h, minors, pd, 0.5 * float(v @ v))


def tau_closed_form(pitch_limits) -> tuple[float, float]:
    """Closed-form bound from the 2x2 minor; returns ``(tau, worst_ratio)``.

    The bound ``atan(2 sqrt(r) / |1 - r|)`` shrinks as ``r`` moves away from 1
    and is symmetric under ``r -> 1/r``, so the worst case sits at the extreme
    ratio ``cos(q2) / cos(q~2)`` over the limit box.
    """
    lo, hi = pitch_limits
    cos_vals = [math.cos(lo), math.cos(hi)]
    c_max = 1.0 if lo <= 0.0 <= hi else max(cos_vals)
    c_min = min(cos_vals)
    r = c_min / c_max
    if abs(1.0 - r) < 1e-15:
        return math.pi / 2, r
    return math.atan(2.0 * math.sqrt(r) / (1.0 - r)), r


def _minors_2x2(cq2: np.ndarray, cq2r: np.ndarray, e4: float):
    """First two leading minors of H over (q2, q~2) cells (insertion ratio 1).

    The lower block of H is 2 I, so the 3rd and 4th minors are 2 m2 and 4 m2.
    """
    c, s = math.cos(e4), math.sin(e4)
    a = cq2 / cq2r
    h00 = 2.0 * a * c
    h01 = (1.0 - a) * s
    return h00, h00 * 2.0 * c - h01 * h01


def _pd_mask(cq2: np.ndarray, cq2r: np.ndarray, e4: float) -> np.ndarray:
    m1, m2 = _minors_2x2(cq2, cq2r, e4)
    scale = np.maximum(np.abs(m1), 2.0)
    return (m1 > PD_TOL * scale) & (m2 > PD_TOL * scale * scale)


def derive_tau(joint_limits=None, grid_resolution: float = math.radians(0.25)) -> TauResult:
    """Roll-bias bound ``tau`` such that ``|e4| < tau`` keeps ``H`` positive definite.

    Grid search over true/read pitch pairs inside the pitch limits; ``e4`` is
    scanned on the same resolution by bisection over grid indices, using the
    monotonicity of each cell's admissible set in ``|e4|``. ``tau`` is the
    first ``e4`` grid value at which some cell fails. The insertion ratio does
    not affect the sign of the minors, so it is fixed at 1.
    """
    if grid_resolution <= 0 or grid_resolution > math.radians(0.5) + 1e-12:
        raise ValueError("grid_resolution must be in (0, 0.5 deg]")
    if joint_limits is None:
        joint_limits = DEFAULT_OOV_LIMITS
    lim = np.asarray(joint_limits, dtype=float)
    lo, hi = (float(lim[1, 0]), float(lim[1, 1])) if lim.ndim == 2 else (float(lim[0]), float(lim[1]))
    n = max(int(round((hi - lo) / grid_resolution)), 0) + 1
    q2 = np.linspace(lo, hi, n) if n > 1 else np.array([lo])
    cq = np.cos(q2)
    cq2, cq2r = np.meshgrid(cq, cq, indexing="ij")

    n_e = int(math.floor((math.pi / 2) / grid_resolution + 1e-9))
    e_grid = np.arange(n_e + 1) * grid_resolution
    if e_grid[-1] < math.pi / 2 - 1e-12:
        e_grid = np.append(e_grid, math.pi / 2)

    def all_pd(k: int) -> bool:
        return bool(np.all(_pd_mask(cq2, cq2r, float(e_grid[k]))))

    # invariant: all_pd(ok) is True, all_pd(bad) is False (cos e4 = 0 at the top)
    ok, bad = 0, len(e_grid) - 1
    if not all_pd(ok):
        raise ValueError("H is not positive definite even without roll bias")
    while bad - ok > 1:
        mid = (ok + bad) // 2
        if all_pd(mid):
            ok = mid
        else:
            bad = mid
    tau = float(e_grid[bad])
    _, m2 = _minors_2x2(cq2, cq2r, tau)
    i, j = np.unravel_index(int(np.argmin(m2)), m2.shape)
    tau_cf, _ = tau_closed_form((lo, hi))
    return TauResult(tau, (float(q2[i]), float(q2[j])), grid_resolution, tau_cf)


@dataclass
class LyapunovTrace:
    V: np.ndarray
    Vdot: np.ndarray
    pd: np.ndarray

    def increases(self, start: int = 0, tol: float = 0.0) -> int:
        """Number of steps from ``start`` on where ``V`` grew by more than ``tol``."""
        return int(np.sum(self.Vdot[max(start, 1):] > tol))


def lyapunov_trace(record) -> LyapunovTrace:
    """Per-step ``V``, backward-difference ``V'`` and the instantaneous PD flag.

    ``record`` needs ``lyap_v`` (objective vectors), ``q_true`` and
    ``q_read`` arrays, one row per step.
    """
    vs = np.asarray(record.lyap_v, dtype=float)
    big_v = 0.5 * np.einsum("ij,ij->i", vs, vs)
    vdot = np.zeros_like(big_v)
    vdot[1:] = np.diff(big_v)
    pd = np.zeros(len(big_v), dtype=bool)
    for k, (qt, qr) in enumerate(zip(record.q_true, record.q_read)):
        try:
            pd[k] = sylvester_pd(hessian_H(qt[1], qt[2], qr[1], qr[2], qt[3] - qr[3]))[0]
        except CertificateDomainError:
            pd[k] = False
    return LyapunovTrace(big_v, vdot, pd)


def yaw_leak_ratio(qdot, q2) -> Optional[float]:
    """``||qdot1 sin q2|| / ||qdot4||``.

    Scalars give the per-step ratio; arrays (one row / entry per step) give
    the ratio of L2 norms over the whole signal, which is what the rollout
    monitor reports. ``None`` when both norms vanish.
    """
    qdot = np.atleast_2d(np.asarray(qdot, dtype=float))
    q2 = np.atleast_1d(np.asarray(q2, dtype=float))
    num = float(np.linalg.norm(qdot[:, 0] * np.sin(q2)))
    den = float(np.linalg.norm(qdot[:, 3]))
    if den == 0.0:
        return None if num == 0.0 else math.inf
    return num / den
