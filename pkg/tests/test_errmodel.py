import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rcmstab.chain import fk_full, fk_oov, lnd_chain
from rcmstab.errmodel import (
    B_MINUS,
    BASE,
    CAM,
    E_MAX,
    ErrorState,
    ReadingLimitWarning,
    apply_bias,
    imaginary_link_pose,
    imaginary_pose,
    lumped_correction,
    track,
    true_pose,
)
from rcmstab.geom import Transform, compose, exp_so3, rot_axis
from rcmstab.validate import random_config, random_transform

CHAIN = lnd_chain()
unit = st.floats(0.0, 1.0)
configs = st.tuples(*[unit] * 6).map(
    lambda f: CHAIN.limits[:, 0] + np.array(f) * (CHAIN.limits[:, 1] - CHAIN.limits[:, 0])
)
# insertion bias kept small enough that readings stay above the insertion guard
biases = st.tuples(st.floats(-0.5, 0.5), st.floats(-0.9, 0.9), st.floats(-0.05, 0.05), st.floats(-1.5, 1.5)).map(
    np.array
)
calibs = st.tuples(st.tuples(*[st.floats(-1, 1)] * 3), st.tuples(*[st.floats(-0.05, 0.05)] * 3)).map(
    lambda t: Transform(exp_so3(np.array(t[0])), np.array(t[1]))
)


def test_true_pose_without_errors_is_fk():
    q = np.array([0.1, -0.2, 0.15, 0.3, 0.2, -0.1])
    np.testing.assert_allclose(true_pose(CHAIN, q).matrix(), fk_full(CHAIN, q).matrix(), atol=1e-15)


def test_true_pose_with_pure_calibration_error():
    q = np.array([0.1, -0.2, 0.15, 0.3, 0.2, -0.1])
    c = Transform(rot_axis("z", 0.1), [0.01, 0.0, -0.02])
    np.testing.assert_allclose(
        true_pose(CHAIN, q, c).matrix(), c.matrix() @ fk_full(CHAIN, q).matrix(), atol=1e-15
    )


@given(configs, biases, calibs)
def test_true_pose_is_direct_composition(q, e, calib):
    ext = Transform(rot_axis("x", 0.4), [0.0, 0.1, 0.2], CAM, B_MINUS)
    q_read = apply_bias(q, ErrorState(e))
    direct = ext.matrix() @ calib.matrix() @ fk_full(CHAIN, q_read + np.r_[e, 0, 0]).matrix()
    np.testing.assert_allclose(true_pose(CHAIN, q, calib, ext).matrix(), direct, atol=1e-12)


def test_apply_bias_examples():
    q = np.array([0.1, -0.2, 0.15, 0.3, 0.2, -0.1])
    np.testing.assert_array_equal(apply_bias(q, ErrorState.zero()), q)
    r = apply_bias(q, ErrorState(np.array([0.0, 0.0, 0.0, 0.5])))
    assert r[3] == pytest.approx(q[3] - 0.5)
    np.testing.assert_array_equal(r[4:], q[4:])  # in-view readings exact


@pytest.mark.parametrize("i", [1, 2, 17, 26, 51])
def test_sweep_level_magnitudes(i):
    signs = np.array([1.0, -1.0, 1.0, -1.0])
    err = ErrorState.from_level((i - 1) / 50, signs)
    np.testing.assert_array_equal(np.abs(err.bias), (i - 1) / 50 * E_MAX)
    assert np.all(np.sign(err.bias[1:]) * signs[1:] >= 0)
    if i == 1:
        assert np.all(err.bias == 0) and not np.any(np.signbit(err.bias))


def test_reading_out_of_limits_warns():
    q = np.array([0.0, math.radians(50.0), 0.1, 0.0, 0.0, 0.0])
    with pytest.warns(ReadingLimitWarning):
        apply_bias(q, ErrorState(np.array([0.0, -0.2, 0.0, 0.0])), CHAIN)


def test_error_state_validation():
    with pytest.raises(ValueError):
        ErrorState(np.array([0.0, 0.0, math.nan, 0.0]))
    with pytest.raises(ValueError):
        ErrorState(np.zeros(3))


def test_error_state_dict_round_trip():
    err = ErrorState(np.array([0.0, 0.3, -0.05, 1.2]), Transform(rot_axis("y", 0.2), [0.01, 0, 0]))
    back = ErrorState.from_dict(err.to_dict())
    np.testing.assert_allclose(back.bias, err.bias, atol=1e-15)
    np.testing.assert_allclose(back.calib_error.matrix(), err.calib_error.matrix())
    assert err.to_dict()["bias_deg_m"][3] == pytest.approx(math.degrees(1.2))


def test_lumped_is_identity_without_errors():
    q = np.array([0.1, -0.2, 0.15, 0.3, 0.2, -0.1])
    _, tracked = track(CHAIN, q, ErrorState.zero())
    np.testing.assert_allclose(tracked.lumped.matrix(), np.eye(4), atol=1e-14)


def test_lumped_absorbs_calibration_error():
    q = np.array([0.1, -0.2, 0.15, 0.3, 0.2, -0.1])
    c = Transform(rot_axis("x", -0.3), [0.02, 0.01, 0.0])
    _, tracked = track(CHAIN, q, ErrorState(np.zeros(4), c))
    np.testing.assert_allclose(tracked.lumped.matrix(), c.matrix(), atol=1e-14)
    assert (tracked.lumped.target, tracked.lumped.source) == ("b-", "b+")


def test_lumped_depends_on_readings(rng):
    err = ErrorState(np.array([0.0, 0.3, 0.02, 0.6]))
    q1 = random_config(CHAIN, rng)
    q2 = random_config(CHAIN, rng)
    _, t1 = track(CHAIN, q1, err)
    _, t2 = track(CHAIN, q2, err)
    assert np.max(np.abs(t1.lumped.matrix() - t2.lumped.matrix())) > 1e-3


@given(configs, biases, calibs)
def test_perfect_tracking_identity(q, e, calib):
    ext = Transform(rot_axis("z", 0.7), [0.1, 0.0, 0.3], CAM, B_MINUS)
    observed, tracked = track(CHAIN, q, ErrorState(e, calib), ext)
    assert np.max(np.abs(imaginary_pose(CHAIN, tracked).matrix() - observed.matrix())) < 1e-10
    assert np.max(np.abs(true_pose(CHAIN, q, calib, ext).matrix() - observed.matrix())) < 1e-12
    # lumped_correction rebuilt from its parts agrees
    again = lumped_correction(observed, tracked.readings, ext, CHAIN)
    np.testing.assert_allclose(again.matrix(), tracked.lumped.matrix(), atol=1e-12)


def test_imaginary_out_of_view_chain_is_wrong_under_bias(rng):
    """Tracking pins link 4 (the in-view readings are exact), but the imaginary
    base b+ and the intermediate out-of-view links are misplaced."""
    err = ErrorState(np.array([0.0, 0.3, 0.02, 0.6]))
    for _ in range(20):
        q = random_config(CHAIN, rng)
        _, tracked = track(CHAIN, q, err)
        truth_link4 = compose(err.calib_error, fk_oov(q, BASE))
        imag_link4 = compose(tracked.lumped, fk_oov(tracked.readings, "b+"))
        np.testing.assert_allclose(imag_link4.matrix(), truth_link4.matrix(), atol=1e-12)
        # the imaginary base b+ (and with it the RCM point) is displaced
        assert np.max(np.abs(tracked.lumped.matrix() - err.calib_error.matrix())) > 1e-2
        imag_rcm = tracked.lumped.translation
        assert np.linalg.norm(imag_rcm - err.calib_error.translation) > 1e-3
        np.testing.assert_allclose(
            imaginary_link_pose(CHAIN, tracked).matrix(), imag_link4.matrix(), atol=1e-12
        )


def test_track_does_not_mutate_inputs(rng):
    q = random_config(CHAIN, rng)
    before = q.copy()
    track(CHAIN, q, ErrorState(np.array([0.0, 0.1, 0.01, 0.2]), random_transform(rng, 0.01)))
    np.testing.assert_array_equal(q, before)
