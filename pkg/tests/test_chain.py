import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rcmstab.chain import (
    DEFAULT_OOV_LIMITS,
    Q3_MIN,
    ChainModel,
    InViewJoint,
    JointLimitError,
    SingularInsertionError,
    body_jacobian_full,
    body_jacobian_inview,
    body_jacobian_oov,
    chain_from_dict,
    d_matrix,
    dqws_factors,
    fk_full,
    fk_inview,
    fk_oov,
    lnd_chain,
    out_of_view_chain,
    q_matrix,
    s_matrix,
    w_matrix,
)
from rcmstab.geom import Transform, compose, rot_axis
from rcmstab.validate import fd_body_jacobian, random_config

unit = st.floats(0.0, 1.0)


def config_from(fracs, chain):
    lim = chain.limits
    return lim[:, 0] + np.asarray(fracs) * (lim[:, 1] - lim[:, 0])


oov_q = st.tuples(unit, unit, unit, unit).map(lambda f: config_from(f, out_of_view_chain()))
full_q = st.tuples(*[unit] * 6).map(lambda f: config_from(f, lnd_chain()))


# --- forward kinematics ----------------------------------------------------

def test_fk_oov_home():
    t = fk_oov([0.0, 0.0, 0.1, 0.0])
    np.testing.assert_array_equal(t.rotation, np.eye(3))
    np.testing.assert_allclose(t.translation, [0.0, 0.0, 0.1])


def test_fk_oov_pitch_quarter_turn():
    t = fk_oov([0.0, math.pi / 2, 0.1, 0.0])
    np.testing.assert_allclose(t.rotation, rot_axis("y", math.pi / 2), atol=1e-15)
    np.testing.assert_allclose(t.translation, [0.1, 0.0, 0.0], atol=1e-15)


@given(oov_q)
def test_fk_oov_is_canonical_composition(q):
    expected = (
        Transform(rot_axis("x", q[0]))
        @ Transform(rot_axis("y", q[1]))
        @ Transform.translate([0, 0, q[2]])
        @ Transform(rot_axis("z", q[3]))
    )
    np.testing.assert_allclose(fk_oov(q).matrix(), expected.matrix(), atol=1e-14)


@given(oov_q)
def test_rcm_property(q):
    assert abs(np.linalg.norm(fk_oov(q).translation) - q[2]) < 1e-12


def test_fk_oov_insertion_guard():
    with pytest.raises(SingularInsertionError):
        fk_oov([0.0, 0.0, Q3_MIN, 0.0])
    with pytest.raises(SingularInsertionError):
        dqws_factors(0.0, 0.0, 0.0)


def test_fk_labels():
    chain = lnd_chain()
    t = fk_full(chain, [0, 0, 0.1, 0, 0, 0])
    assert (t.target, t.source) == ("base", "link6")
    assert fk_oov([0, 0, 0.1, 0], "b+").target == "b+"


# --- out-of-view Jacobian ----------------------------------------------------

def test_jacobian_columns_at_zero_pitch_and_roll():
    j = body_jacobian_oov([0.3, 0.0, 0.1, 0.0])
    np.testing.assert_allclose(j[:, 0], [0, -0.1, 0, 1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(j[:, 1], [0.1, 0, 0, 0, 1, 0], atol=1e-15)


@given(oov_q)
def test_jacobian_constant_columns(q):
    j = body_jacobian_oov(q)
    np.testing.assert_array_equal(j[:, 2], [0, 0, 1, 0, 0, 0])
    np.testing.assert_array_equal(j[:, 3], [0, 0, 0, 0, 0, 1])


@given(oov_q)
def test_jacobian_matches_finite_differences(q):
    fd = fd_body_jacobian(fk_oov, q, 1e-6)
    assert np.max(np.abs(fd - body_jacobian_oov(q))) < 1e-5


# --- D Q W S ------------------------------------------------------------------

def test_factors_at_reference_configuration():
    f = dqws_factors(0.0, 1.0, 0.0)
    np.testing.assert_allclose(f.Q, [[0, 1, 0, 0], [-1, 0, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]], atol=1e-15)
    np.testing.assert_array_equal(f.W, np.eye(4))
    np.testing.assert_array_equal(f.S, np.eye(4))


@given(oov_q)
def test_decomposition_identity(q):
    f = dqws_factors(q[1], q[2], q[3])
    assert np.max(np.abs(f.product() - body_jacobian_oov(q))) < 1e-9


@given(st.floats(-math.pi, math.pi), st.floats(-1.5, 1.5), st.floats(0.01, 0.3))
def test_factor_structure(q4, q2, q3):
    qm = q_matrix(q4)
    assert np.max(np.abs(qm.T @ qm - np.eye(4))) < 1e-12
    w = w_matrix(q2, q3)
    assert np.count_nonzero(w - np.diag(np.diag(w))) == 0
    assert np.all(np.diag(w) > 0)
    s = s_matrix(q2)
    assert np.allclose(np.diag(s), 1.0) and np.allclose(np.triu(s, 1), 0.0)
    assert d_matrix(q3).shape == (6, 4)


# --- in-view segment and the full chain ---------------------------------------

def test_empty_inview_reduces_to_oov():
    chain = out_of_view_chain()
    q = np.array([0.2, -0.3, 0.12, 0.5])
    np.testing.assert_allclose(fk_full(chain, q).matrix(), fk_oov(q).matrix())
    assert body_jacobian_inview(chain, []).shape == (6, 0)
    np.testing.assert_array_equal(body_jacobian_full(chain, q), body_jacobian_oov(q))


def test_zero_inview_joints_give_fixed_pre_transforms():
    chain = lnd_chain(wrist_offset=0.01)
    t = fk_inview(chain, [0.0, 0.0])
    np.testing.assert_allclose(t.matrix(), Transform.translate([0.01, 0, 0]).matrix())


def test_single_z_joint_at_tip():
    chain = ChainModel((InViewJoint("z"),))
    j = body_jacobian_inview(chain, [0.7])
    np.testing.assert_allclose(j[:, 0], [0, 0, 0, 0, 0, 1], atol=1e-15)


@given(full_q)
def test_fk_full_is_oov_then_inview(q):
    chain = lnd_chain()
    expected = compose(fk_oov(q), fk_inview(chain, q[4:]))
    np.testing.assert_allclose(fk_full(chain, q).matrix(), expected.matrix(), atol=1e-14)


@given(full_q)
def test_full_jacobian_matches_finite_differences(q):
    chain = lnd_chain()
    fd = fd_body_jacobian(lambda x: fk_full(chain, x), q)
    assert np.max(np.abs(fd - body_jacobian_full(chain, q))) < 1e-5


@given(st.tuples(unit, unit))
def test_inview_jacobian_matches_finite_differences(f):
    chain = lnd_chain()
    q_in = -1.3 + 2.6 * np.array(f)
    fd = fd_body_jacobian(lambda x: fk_inview(chain, x), q_in)
    assert np.max(np.abs(fd - body_jacobian_inview(chain, q_in))) < 1e-5


def test_custom_tool_jacobian_matches_finite_differences(rng):
    chain = chain_from_dict(
        {"inview": [
            {"axis": "z", "pre_translation": [0.0, 0.0, 0.01]},
            {"axis": "x", "pre_translation": [0.0, 0.004, 0.0], "pre_rpy_deg": [10.0, 0.0, 30.0]},
            {"axis": "y", "pre_translation": [0.009, 0.0, 0.0]},
        ]}
    )
    assert chain.n == 7
    for _ in range(20):
        q = random_config(chain, rng)
        fd = fd_body_jacobian(lambda x: fk_full(chain, x), q)
        assert np.max(np.abs(fd - body_jacobian_full(chain, q))) < 1e-5


# --- limits / config ----------------------------------------------------------

def test_default_limits():
    lim = out_of_view_chain().limits
    np.testing.assert_allclose(lim[1], np.radians([-53.0, 53.0]))
    np.testing.assert_allclose(lim[2], [0.0565, 0.24])
    np.testing.assert_allclose(lnd_chain().limits[4:], np.radians([[-80, 80], [-80, 80]]))


def test_admissibility_check():
    chain = lnd_chain()
    q = np.array([0.0, 0.0, 0.1, 0.0, 0.0, 0.0])
    assert chain.admissible(q)
    bad = q.copy()
    bad[1] = math.radians(60.0)
    assert not chain.admissible(bad)
    with pytest.raises(JointLimitError):
        fk_full(chain, bad, check=True)
    fk_full(chain, bad)  # unchecked evaluation is allowed


@pytest.mark.parametrize(
    "limits",
    [
        [(-1, 1)] * 3,  # wrong shape
        [(-1, 1), (1, -1), (0.06, 0.2), (-1, 1)],  # lo > hi
        [(-1, 1), (-1, 1), (0.0, 0.2), (-1, 1)],  # insertion not positive
    ],
)
def test_invalid_limits_rejected(limits):
    with pytest.raises(ValueError):
        ChainModel((), limits)


def test_chain_from_dict_limits_in_degrees_and_meters():
    chain = chain_from_dict(
        {"tool": "lnd"},
        {"oov": [[-90, 90], [-30, 30], [0.05, 0.2], [-90, 90]], "inview": [-45, 45]},
    )
    np.testing.assert_allclose(chain.limits[1], np.radians([-30, 30]))
    np.testing.assert_allclose(chain.limits[2], [0.05, 0.2])
    np.testing.assert_allclose(chain.limits[5], np.radians([-45, 45]))
    assert chain_from_dict({"tool": "none"}).n == 4
    with pytest.raises(ValueError):
        chain_from_dict({"tool": "laser"})


def test_with_limits_keeps_tool():
    chain = lnd_chain().with_limits(list(DEFAULT_OOV_LIMITS) + [(-1, 1), (-1, 1)])
    assert chain.n == 6 and chain.limits[4, 1] == 1.0
