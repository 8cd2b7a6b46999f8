"""Biased joint readings, calibration error and lumped-error tracking.

Three chains are involved:

* ideal:      ``T = T_cam<-base * FK(q)``
* true:       ``T = T_cam<-b- * T_b-<-base * FK(q_reading + e)``
* imaginary:  ``T = T_cam<-b- * T_b-<-b+ * FK_oov(q_reading) * FK_inview(q_true_inview)``

The imaginary chain's base correction ``T_b-<-b+`` (the lumped error) is what a
tracker estimates from the camera view of the end effector. It absorbs the
calibration error and the out-of-view biases, and it changes with the readings
even when the biases are constant.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .chain import N_OOV, ChainModel, fk_full, fk_oov
from .geom import Transform, compose, invert

CAM, B_MINUS, B_PLUS, BASE = "cam", "b-", "b+", "base"

# worst-case out-of-view biases: yaw (rad), pitch (rad), insertion (m), roll (rad)
E_MAX = np.array([0.0, math.radians(53.0), 0.1835, math.radians(90.0)])


class ReadingLimitWarning(UserWarning):
    pass


def _calib_default() -> Transform:
    return Transform.identity(B_MINUS, BASE)


@dataclass(frozen=True, eq=False)
class ErrorState:
    """Out-of-view reading biases plus camera calibration error.

    ``bias`` is ``(e1, e2, e3, e4)`` in (rad, rad, m, rad) with
    ``q_true = q_reading + bias``. In-view errors are assumed corrected by the
    camera and kept at zero.
    """

    bias: np.ndarray = field(default_factory=lambda: np.zeros(N_OOV))
    calib_error: Transform = field(default_factory=_calib_default)
    inview_errors: Optional[np.ndarray] = None

    def __post_init__(self):
        b = np.asarray(self.bias, dtype=float)
        if b.shape != (N_OOV,) or not np.all(np.isfinite(b)):
            raise ValueError(f"bias must be a finite 4-vector, got {self.bias!r}")
        object.__setattr__(self, "bias", b)
        c = self.calib_error
        object.__setattr__(
            self, "calib_error", Transform(c.rotation, c.translation, B_MINUS, BASE)
        )

    @classmethod
    def zero(cls) -> "ErrorState":
        return cls()

    @classmethod
    def from_level(cls, fraction: float, signs=None, e_max=E_MAX) -> "ErrorState":
        """``bias = signs * fraction * e_max`` (signs default to all positive)."""
        signs = np.ones(N_OOV) if signs is None else np.asarray(signs, dtype=float)
        return cls(signs * float(fraction) * np.asarray(e_max, dtype=float) + 0.0)

    def full_bias(self, n: int) -> np.ndarray:
        """Bias over all ``n`` joints (in-view entries zero)."""
        out = np.zeros(n)
        out[:N_OOV] = self.bias
        return out

    def to_dict(self) -> dict:
        b = self.bias
        c = self.calib_error
        return {
            "bias_deg_m": [
                math.degrees(b[0]),
                math.degrees(b[1]),
                float(b[2]),
                math.degrees(b[3]),
            ],
            "calib_translation": [float(x) for x in c.translation],
            "calib_rotation": [[float(x) for x in row] for row in c.rotation],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ErrorState":
        b = d.get("bias_deg_m", [0.0, 0.0, 0.0, 0.0])
        bias = np.array([math.radians(b[0]), math.radians(b[1]), b[2], math.radians(b[3])])
        calib = Transform(
            d.get("calib_rotation", np.eye(3)), d.get("calib_translation", np.zeros(3))
        )
        return cls(bias, calib)


@dataclass(frozen=True, eq=False)
class TrackedState:
    readings: np.ndarray
    lumped: Transform
    camera_extrinsic: Transform


def true_pose(
    chain: ChainModel,
    q_true,
    calib: Optional[Transform] = None,
    camera_extrinsic: Optional[Transform] = None,
) -> Transform:
    """End-effector pose in the camera frame for the true joint values."""
    ext = Transform.identity(CAM, B_MINUS) if camera_extrinsic is None else camera_extrinsic
    calib = Transform.identity(B_MINUS, BASE) if calib is None else calib
    return compose(compose(ext, calib), fk_full(chain, q_true, BASE))


def apply_bias(q_true, err: ErrorState, chain: Optional[ChainModel] = None) -> np.ndarray:
    """Readings ``q_true - e`` on the out-of-view joints; in-view readings exact."""
    q_true = np.asarray(q_true, dtype=float)
    readings = q_true.copy()
    readings[:N_OOV] -= err.bias
    if chain is not None and not chain.admissible(readings):
        warnings.warn(
            f"joint readings {readings} leave the admissible range", ReadingLimitWarning
        )
    return readings


def lumped_correction(
    observed: Transform,
    readings,
    camera_extrinsic: Transform,
    chain: ChainModel,
) -> Transform:
    """Base correction ``T_b-<-b+`` making the imaginary chain hit ``observed``."""
    fk = fk_full(chain, readings, B_PLUS)
    return compose(compose(invert(camera_extrinsic), observed), invert(fk))


def imaginary_pose(chain: ChainModel, tracked: TrackedState) -> Transform:
    return compose(
        compose(tracked.camera_extrinsic, tracked.lumped),
        fk_full(chain, tracked.readings, B_PLUS),
    )


def imaginary_link_pose(chain: ChainModel, tracked: TrackedState) -> Transform:
    """Out-of-view part of the imaginary chain: link 4 in the camera frame."""
    return compose(
        compose(tracked.camera_extrinsic, tracked.lumped),
        fk_oov(tracked.readings, B_PLUS),
    )


def track(
    chain: ChainModel,
    q_true,
    err: ErrorState,
    camera_extrinsic: Optional[Transform] = None,
) -> tuple[Transform, TrackedState]:
    """Simulate perfect end-effector tracking.

    Returns the observed (true) pose and the tracker state built from the
    biased readings.
    """
    ext = Transform.identity(CAM, B_MINUS) if camera_extrinsic is None else camera_extrinsic
    observed = true_pose(chain, q_true, err.calib_error, ext)
    readings = apply_bias(q_true, err)
    lumped = lumped_correction(observed, readings, ext, chain)
    return observed, TrackedState(readings, lumped, ext)
