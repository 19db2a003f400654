import numpy as np
import pytest

from charflow.dynamics import flow, linearized_path
from charflow.errors import PreconditionError
from charflow.surface import Ellipsoid, PerturbedGauge

from oracles import ellipsoid_fundamental, jmat

COEFFS = (0.5, -1.0, 0.3, -0.6)


@pytest.mark.parametrize("R", [1.0, 2.0, 3.7])
def test_sphere_full_rotation(R):
    s = Ellipsoid((R, R))
    y0 = s.project(np.array([0.3, -0.2, 0.5, 0.4]))
    res = flow(s, y0, 2 * np.pi * R**2)
    assert np.linalg.norm(res.end_point - y0) < 1e-8
    np.testing.assert_array_equal(res.points[0], y0)
    assert res.times[0] == 0.0


def test_ellipsoid_half_period():
    s = Ellipsoid((1.0, 1.5))
    y0 = np.array([0.6, 0.0, 0.8, 0.0])
    res = flow(s, y0, np.pi * 1.0**2)
    assert np.linalg.norm(res.end_point + y0) < 1e-8


def test_zero_time():
    s = Ellipsoid((1.0, 1.5))
    y0 = np.array([1.0, 0, 0, 0])
    res = flow(s, y0, 0.0, variational=True)
    np.testing.assert_array_equal(res.end_point, y0)
    np.testing.assert_array_equal(res.matrices[-1], np.eye(4))


def test_off_surface_start_rejected():
    with pytest.raises(PreconditionError):
        flow(Ellipsoid((1.0, 1.5)), [2.0, 0, 0, 0], 1.0)


def test_linearization_matches_expm():
    axes = (1.0, 1.3, 1.7)
    s = Ellipsoid(axes)
    y0 = s.project(np.array([0.2, 0.4, -0.1, 0.3, 0.5, 0.2]))
    res = flow(s, y0, 5.0, variational=True, n_samples=11)
    path = linearized_path(s, res)
    np.testing.assert_array_equal(path.matrices[0], np.eye(6))
    for t, M in zip(path.times, path.matrices):
        np.testing.assert_allclose(M, ellipsoid_fundamental(axes, t), atol=1e-8)


def test_semigroup_property():
    axes = (1.0, 1.4)
    s = Ellipsoid(axes)
    y0 = s.project(np.array([0.3, 0.1, 0.5, -0.2]))
    a, b = 1.3, 2.1
    first = flow(s, y0, a, variational=True)
    second = flow(s, first.end_point, b, variational=True)
    whole = flow(s, y0, a + b, variational=True)
    np.testing.assert_allclose(second.matrices[-1] @ first.matrices[-1], whole.matrices[-1], atol=1e-8)


@pytest.mark.parametrize("frac", [0.0, 0.6])
def test_symplecticity_and_energy(frac):
    s = PerturbedGauge((1.0, 1.2), frac, COEFFS)
    y0 = s.project(np.array([0.7, 0.2, -0.3, 0.5]))
    T = 10.0
    res = flow(s, y0, T, variational=True)
    J = jmat(2)
    for M in res.matrices:
        assert np.max(np.abs(M.T @ J @ M - J)) < 1e-7
        assert abs(np.linalg.det(M) - 1) < 1e-7
    assert res.energy_drift < 1e-9 * T
    for p in res.points:
        assert abs(s.gauge(p) - 1) < 1e-9


def test_linearization_against_finite_differences():
    s = PerturbedGauge((1.0, 1.2), 0.4, COEFFS)
    y0 = s.project(np.array([0.7, 0.2, -0.3, 0.5]))
    T = 3.0
    base = flow(s, y0, T, variational=True)
    M = base.matrices[-1]
    v = np.array([0.1, -0.4, 0.3, 0.2])
    errors = []
    for delta in (1e-4, 5e-5):
        shifted = flow(s, s.project(y0 + delta * v), T).end_point
        dv = s.project(y0 + delta * v) - y0
        pred = M @ dv
        errors.append(np.linalg.norm(shifted - base.end_point - pred) / np.linalg.norm(pred))
    assert errors[0] < 1e-3
    # O(delta): halving delta roughly halves the error
    assert errors[1] < 0.75 * errors[0]


def test_reversibility():
    s = PerturbedGauge((1.0, 1.2), 0.5, COEFFS)
    y0 = s.project(np.array([0.1, 0.9, 0.3, -0.2]))
    there = flow(s, y0, 4.0)
    back = flow(s, there.end_point, -4.0)
    assert np.linalg.norm(back.end_point - y0) < 1e-7


def test_alpha_flow_stays_on_surface():
    s = Ellipsoid((1.0, 1.2))
    y0 = np.array([1.0, 0, 0, 0])
    # on the surface H = j^alpha moves alpha times faster than F
    res = flow(s, y0, 2 * np.pi / 1.5, alpha=1.5)
    assert np.linalg.norm(res.end_point - y0) < 1e-8
