import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cplslam.se2 import (
    IDENTITY_POSE,
    PlanarPose,
    UnitComplex,
    act,
    compose,
    from_angle,
    from_matrix,
    inverse,
    normalize,
    relative,
)

angles = st.floats(-10, 10, allow_nan=False)
coords = st.floats(-100, 100, allow_nan=False)
poses = st.builds(PlanarPose.from_xytheta, coords, coords, angles)


def close_pose(a, b, tol=1e-12):
    return abs(a.translation - b.translation) <= tol * max(1, abs(b.translation)) and abs(a.rotation.value - b.rotation.value) <= tol


def test_from_angle_trivial():
    assert from_angle(0.0).value == 1 + 0j
    q = from_angle(math.pi / 2)
    assert abs(q.re) < 1e-16 and q.im == 1.0


def test_from_angle_matches_rotation_matrix():
    # frozen from the 2x2 rotation matrix of angle 0.3
    R = np.array([[0.955336489125606, -0.29552020666133955], [0.29552020666133955, 0.955336489125606]])
    z = from_angle(0.3)
    assert np.allclose(z.matrix(), R, atol=1e-15, rtol=0)
    assert from_matrix(R).angle == pytest.approx(0.3, abs=1e-15)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_from_angle_rejects_non_finite(bad):
    with pytest.raises(ValueError):
        from_angle(bad)


def test_unit_complex_renormalizes_and_rejects_zero():
    z = UnitComplex(3.0, 4.0)
    assert abs(z.re**2 + z.im**2 - 1) <= 1e-12
    with pytest.raises(ValueError):
        UnitComplex(0.0, 0.0)


def test_angle_range_is_half_open():
    assert UnitComplex(-1.0, 0.0).angle == math.pi
    assert UnitComplex(-1.0, -0.0).angle == math.pi


def test_compose_examples():
    a = PlanarPose(1 + 0j, UnitComplex(0, 1))
    b = PlanarPose(1 + 0j, UnitComplex(1, 0))
    c = compose(a, b)
    assert c.translation == 1 + 1j and c.rotation.value == 1j
    assert close_pose(compose(IDENTITY_POSE, b), b)


def test_inverse_examples():
    assert close_pose(inverse(IDENTITY_POSE), IDENTITY_POSE)
    a = PlanarPose(2 + 0j, UnitComplex(0, 1))
    ai = inverse(a)
    # frozen from the inverse of the homogeneous matrix [[0,-1,2],[1,0,0],[0,0,1]]
    assert ai.translation == pytest.approx(2j, abs=1e-15)
    assert ai.rotation.value == pytest.approx(-1j, abs=1e-15)
    assert close_pose(compose(ai, a), IDENTITY_POSE)


def test_act_examples():
    assert act(IDENTITY_POSE, 3 - 2j) == 3 - 2j
    assert act(PlanarPose(1 + 1j, UnitComplex(0, 1)), 1 + 0j) == 1 + 2j
    with pytest.raises(ValueError):
        act(IDENTITY_POSE, complex(math.nan, 0))


@settings(max_examples=200, deadline=None)
@given(poses, poses)
def test_compose_is_matrix_product(a, b):
    assert np.allclose(compose(a, b).matrix(), a.matrix() @ b.matrix(), atol=1e-12 * 100, rtol=1e-12)


@settings(max_examples=200, deadline=None)
@given(poses)
def test_inverse_matches_matrix_inverse(a):
    assert np.allclose(inverse(a).matrix(), np.linalg.inv(a.matrix()), atol=1e-10, rtol=1e-12)
    assert close_pose(inverse(inverse(a)), a, 1e-12)


@settings(max_examples=200, deadline=None)
@given(poses, poses, poses)
def test_associativity(a, b, c):
    assert close_pose(compose(compose(a, b), c), compose(a, compose(b, c)), 1e-12)


@settings(max_examples=200, deadline=None)
@given(poses, poses, coords, coords)
def test_action_is_compatible(a, b, x, y):
    p = complex(x, y)
    lhs = act(compose(a, b), p)
    rhs = act(a, act(b, p))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))
    R, t = a.matrix()[:2, :2], a.matrix()[:2, 2]
    v = R @ np.array([x, y]) + t
    assert abs(act(a, p) - complex(*v)) <= 1e-12 * max(1.0, abs(p))


@settings(max_examples=100, deadline=None)
@given(angles)
def test_angle_round_trip(theta):
    back = from_angle(theta).angle
    assert abs(np.exp(1j * back) - np.exp(1j * theta)) <= 1e-12
    assert -math.pi < back <= math.pi


def test_long_chain_stays_unit():
    z = UnitComplex()
    step = from_angle(0.123456789)
    for _ in range(10000):
        z = z * step
    assert abs(z.re**2 + z.im**2 - 1) <= 1e-12


def test_relative_and_normalize():
    a = PlanarPose.from_xytheta(1, 2, 0.4)
    b = PlanarPose.from_xytheta(-1, 0.5, -2.0)
    assert close_pose(compose(a, relative(a, b)), b)
    z = normalize(np.array([2 + 0j, 1j * 3]))
    assert np.allclose(np.abs(z), 1)
    with pytest.raises(ValueError):
        normalize(np.array([0j]))
