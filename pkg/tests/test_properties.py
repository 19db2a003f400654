"""Randomized properties (hypothesis)."""

from fractions import Fraction

import numpy as np
from hypothesis import given, settings, strategies as st

from charflow.identities import chi_hat_from_indices, divide_series
from charflow.maslov import maslov_index
from charflow.normal_forms import block_path, direct_sum_path
from charflow.surface import PerturbedGauge

from oracles import planar_rotation_index

COEFFS = (0.5, -1.0, 0.3, -0.6)


@given(st.dictionaries(st.integers(0, 15), st.integers(0, 4)))
def test_divide_series_round_trip(u):
    # counts of 1/(1 - t^2) + (1 + t) U(t)
    counts = {q: 1 for q in range(0, 17, 2)}
    for q, c in u.items():
        counts[q] = counts.get(q, 0) + c
        counts[q + 1] = counts.get(q + 1, 0) + c
    got = divide_series(counts, 0, 15)
    assert got == {q: u.get(q, 0) for q in range(0, 16)}


@given(st.integers(-50, 50), st.integers(-50, 50))
def test_chi_hat_closed_form(i1, i2):
    chi = chi_hat_from_indices(i1, i2)
    assert abs(chi) in (Fraction(1), Fraction(1, 2))
    assert (chi > 0) == (i1 % 2 == 0)
    assert (abs(chi) == 1) == ((i2 - i1) % 2 == 0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4).filter(lambda v: np.linalg.norm(v) > 1e-2),
       st.floats(0.1, 10), st.floats(0, 0.6))
def test_gauge_homogeneity(v, t, frac):
    s = PerturbedGauge((1.0, 1.2), frac, COEFFS)
    x = np.array(v)
    assert np.isclose(s.gauge(t * x), t * s.gauge(x), rtol=1e-10)
    assert np.isclose(s.gauge(s.project(x)), 1.0, rtol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 4.0).filter(lambda r: abs(r - round(r)) > 1e-3))
def test_rotation_index_matches_oracle(rho):
    path = direct_sum_path([block_path("R", 2 * np.pi * rho)], 400)
    assert maslov_index(path) == planar_rotation_index(rho)
