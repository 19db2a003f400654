import numpy as np
import pytest

from charflow.dynamics import linearized_path
from charflow.errors import CaseError, PreconditionError
from charflow.maslov import (IndexRecord, ceil_e, index_sequence, iterate_index_formula,
                             maslov_index, mean_index, mean_index_formula)
from charflow.normal_forms import block_path, direct_sum_path
from charflow.orbitfinder import analytic_ellipsoid_orbits
from charflow.spectral import floquet
from charflow.surface import Ellipsoid

from oracles import (ellipsoid_mean_index, ellipsoid_orbit_indices, hyperbolic_iterate,
                     planar_rotation_index)


def rotation_path(rho, samples=400):
    return direct_sum_path([block_path("R", 2 * np.pi * rho)], samples)


@pytest.mark.parametrize("rho", [0.1, 0.5, 0.93, 1.2, 1.5, 1.99, 2.7, 3.3])
def test_planar_rotation(rho):
    i, nu = maslov_index(rotation_path(rho))
    assert (i, nu) == planar_rotation_index(rho)


@pytest.mark.parametrize("rho", [1.0, 2.0, 3.0])
def test_planar_rotation_integer_turns(rho):
    assert maslov_index(rotation_path(rho)) == planar_rotation_index(rho)


def test_direct_sum_additive():
    a, b = 0.4, 1.7
    joint = direct_sum_path([block_path("R", 2 * np.pi * a), block_path("R", 2 * np.pi * b)], 400)
    ia, na = planar_rotation_index(a)
    ib, nb = planar_rotation_index(b)
    assert maslov_index(joint) == (ia + ib, na + nb)


@pytest.mark.parametrize("axes", [(1.0, 2 ** 0.25), (1.0, 1.2), (1.0, 1.15, 1.4)])
def test_ellipsoid_indices_match_oracle(axes):
    s = Ellipsoid(axes)
    for j, orbit in enumerate(analytic_ellipsoid_orbits(axes)):
        rec = index_sequence(linearized_path(s, orbit.samples), 20)
        assert rec.n == len(axes)
        for m, i, nu, v in rec.iterates:
            assert (i, nu, v) == ellipsoid_orbit_indices(axes, j, m)
        assert rec.mean_index == pytest.approx(ellipsoid_mean_index(axes, j), abs=1e-9)
        assert (rec.i_maslov_1, rec.nu_1) == maslov_index(linearized_path(s, orbit.samples))


def test_irrational_short_orbit_values():
    axes = (1.0, 2 ** 0.25)
    orbit = analytic_ellipsoid_orbits(axes)[0]
    rec = index_sequence(linearized_path(Ellipsoid(axes), orbit.samples), 5)
    assert rec.i_maslov_1 == 2 and rec.i_viterbo_1 == 0
    assert [r[3] for r in rec.iterates] == [0, 4, 8, 10, 14]
    assert rec.mean_index == pytest.approx(2 + np.sqrt(2), abs=1e-9)


def forced_plus(kind, param=None, turns=0, forced_turns=0):
    # the forced block ends at N1(1, 1), whose kernel is already one-dimensional
    return direct_sum_path([block_path("forced", turns=forced_turns), block_path(kind, param, turns)], 300)


def test_hyperbolic_iteration():
    found = False
    for turns in range(-1, 3):
        path = forced_plus("hyperbolic", 0.8, turns)
        rec = index_sequence(path, 12)
        if rec.i_maslov_1 == 3:
            found = True
        for m, i, nu, _ in rec.iterates:
            assert i == hyperbolic_iterate(rec.i_maslov_1, m)
            assert nu == 1
    assert found


def test_record_invariants():
    axes = (1.0, 1.3)
    s = Ellipsoid(axes)
    for orbit in analytic_ellipsoid_orbits(axes):
        rec = index_sequence(linearized_path(s, orbit.samples), 20, regression_m_max=60)
        n = rec.n
        for m, i, nu, v in rec.iterates:
            assert v == i - n
            assert 1 <= nu <= 2 * n - 1
            assert abs(v - m * rec.mean_index) <= 2 * n
        assert all(b[1] >= a[1] for a, b in zip(rec.iterates, rec.iterates[1:]))
        assert abs(rec.regression_slope - rec.mean_index) < 0.1
        back = IndexRecord.from_dict(rec.to_dict())
        assert back.iterates == rec.iterates and back.mean_index == rec.mean_index


def test_mean_index_of_constructed_paths():
    assert mean_index(forced_plus("R", np.pi / 2)) == pytest.approx(2.5)
    assert mean_index(forced_plus("hyperbolic", 0.8)) == pytest.approx(4.0)


@pytest.mark.parametrize("tag, i1, theta, m, expected", [
    (("Case1", 1), 0, None, 2, 3),
    ("Case2", 0, np.pi / 2, 3, 4),
    (("Case1", 0), 0, None, 2, 2),
    (("Case3", 1), -2, None, 3, 2),
    ("Hyperbolic", 0, None, 4, 9),
])
def test_formula_examples(tag, i1, theta, m, expected):
    assert iterate_index_formula(tag, i1, theta, m) == expected


@pytest.mark.parametrize("tag, i1, theta, expected", [
    ("Hyperbolic", -2, None, 1.0),
    ("Case2", 0, np.pi, 3.0),
    (("Case3", 0), -2, None, 2.0),
    ("Case4", 1, None, 4.0),
])
def test_mean_formula_examples(tag, i1, theta, expected):
    assert mean_index_formula(tag, i1, theta) == pytest.approx(expected)


def test_formula_errors():
    with pytest.raises(PreconditionError):
        iterate_index_formula("Case2", 0, None, 1)
    with pytest.raises(CaseError):
        iterate_index_formula("Other", 0, None, 1)
    with pytest.raises(CaseError):
        mean_index_formula("Other", 0)
    with pytest.raises(PreconditionError):
        iterate_index_formula("Case4", 0, None, 0)


def test_ceil_e():
    assert ceil_e(2.0) == 2
    assert ceil_e(2.0 + 1e-12) == 2
    assert ceil_e(2.1) == 3
    assert ceil_e(-0.5) == 0


@pytest.mark.parametrize("kind, param, tag_name", [
    ("N1(-1,b)", 1, "Case1"), ("N1(-1,b)", 0, "Case1"), ("N1(-1,b)", -1, "Case1"),
    ("R", 2.0, "Case2"), ("N1(1,b)", -1, "Case4"),
])
def test_parity_facts(kind, param, tag_name):
    for turns in range(-1, 2):
        path = forced_plus(kind, param, turns)
        tag = floquet(path.end).case_tag
        assert tag.name == tag_name
        v = index_sequence(path, 2).i_viterbo_1
        if tag_name in ("Case1", "Case2"):
            assert v % 2 == 0
        else:
            assert v % 2 == 1


def test_m_max_floor():
    with pytest.raises(PreconditionError):
        index_sequence(rotation_path(0.5), 1)
