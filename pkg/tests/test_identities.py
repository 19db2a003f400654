from fractions import Fraction

import numpy as np
import pytest

from charflow import identities as ident
from charflow.errors import (HypothesisError, IncompleteDossierError, PreconditionError, TableError,
                             UnsupportedError)
from charflow.identities import OrbitDossier
from charflow.maslov import IndexRecord, iterate_index_formula
from charflow.orbitfinder import analytic_ellipsoid_orbits
from charflow.pipeline import build_dossier
from charflow.spectral import floquet
from charflow.normal_forms import diamond, n1, rotation
from charflow.surface import Ellipsoid, SurfaceMetrics, metrics

from oracles import (chi_hat_two_iterates, ellipsoid_mean_index, ellipsoid_orbit_indices,
                     morse_counts, resonance_sum)


def record(viterbo, n=2, mean=None, nullities=None):
    nullities = nullities or [1] * len(viterbo)
    rows = [(m, v + n, nu, v) for m, (v, nu) in enumerate(zip(viterbo, nullities), start=1)]
    if mean is None:
        mean = viterbo[-1] / len(viterbo)
    return IndexRecord(viterbo[0] + n, nullities[0], viterbo[0], rows, float(mean), n)


def dossier(name, action, rec, chi=None, fd=None):
    if chi is None and all(r[2] == 1 for r in rec.iterates):
        chi = ident.chi_hat_nondegenerate(rec)
    return OrbitDossier(name, float(action), 2 * float(action), [1.0, 0, 0, 0], fd, rec, chi)


def oracle_dossiers(axes, m_max=40):
    out = []
    for j, r in enumerate(sorted(axes)):
        vs = [ellipsoid_orbit_indices(sorted(axes), j, m)[2] for m in range(1, m_max + 1)]
        nus = [ellipsoid_orbit_indices(sorted(axes), j, m)[1] for m in range(1, m_max + 1)]
        rec = record(vs, len(axes), ellipsoid_mean_index(sorted(axes), j), nus)
        out.append(dossier(f"y{j + 1}", np.pi * r**2, rec, chi_hat_two_iterates(vs[0], vs[1])))
    return out


def pipeline_dossiers(axes, m_max=20):
    s = Ellipsoid(axes)
    sm = metrics(s)
    return [build_dossier(s, o, sm, m_max) for o in analytic_ellipsoid_orbits(axes)]


# -- average Euler characteristic -----------------------------------------------------

@pytest.mark.parametrize("i1, i2, expected", [(0, 2, Fraction(1)), (0, 3, Fraction(1, 2)),
                                              (-1, 1, Fraction(-1))])
def test_chi_hat_nondegenerate(i1, i2, expected):
    assert ident.chi_hat_nondegenerate(record([i1, i2])) == expected
    assert ident.chi_hat_from_indices(i1, i2) == expected


def test_chi_hat_requires_nondegenerate():
    with pytest.raises(UnsupportedError):
        ident.chi_hat_nondegenerate(record([0, 2], nullities=[1, 3]))
    with pytest.raises(IncompleteDossierError):
        ident.chi_hat_nondegenerate(record([0]))


def test_chi_hat_table_examples():
    assert ident.chi_hat_table(1, [(1, 0, 1, 0, 0)]) == 1
    assert ident.chi_hat_table(2, [(1, -2, 1, 0, 0), (2, -1, 0, 1, 0)]) == 1
    assert ident.chi_hat_table(3, [(1, 0, 0, 0, 0), (2, 2, 0, 0, 0), (3, 4, 0, 0, 0)]) == 0


@pytest.mark.parametrize("i1", [-3, -2, 0, 1, 4])
def test_table_agrees_with_closed_form(i1):
    assert ident.chi_hat_table(1, [(1, i1, 1, 0, 0)]) == (-1) ** (i1 % 2)
    assert ident.chi_hat_nondegenerate(record([i1, i1 + 4])) == (-1) ** (i1 % 2)


@pytest.mark.parametrize("rows, nullities, clause", [
    ([(1, 0, 1, 1, 0)], None, "(i)"),
    ([(1, 0, 1, 0, 0, 1)], [4], "(ii)"),
    ([(1, 0, 0, 1, 0, 1)], [4], "(iii)"),
    ([(1, 0, 0, 1, 1)], [3], "(iv)"),
    ([(1, 0, 0, 0, 1)], [2], "nu - 1"),
    ([(1, 0, 2, 0, 0)], None, "end value"),
])
def test_chi_hat_table_admissibility(rows, nullities, clause):
    with pytest.raises(TableError, match=clause.replace("(", r"\(").replace(")", r"\)")):
        ident.chi_hat_table(1, rows, nullities)


def test_chi_hat_table_shape_errors():
    with pytest.raises(TableError):
        ident.chi_hat_table(2, [(1, 0, 1, 0, 0)])
    with pytest.raises(TableError):
        ident.chi_hat_table(1, [(2, 0, 1, 0, 0)])
    with pytest.raises(TableError):
        ident.chi_hat_table(0, [])


# -- resonance and mean-index sums ------------------------------------------------------------

def test_resonance_irrational_ellipsoid():
    axes = (1.0, 2 ** 0.25)
    assert abs(resonance_sum(axes) - 0.5) < 1e-12
    res = ident.resonance_check(oracle_dossiers(axes), 1e-9)
    assert abs(res.sum_pos - 0.5) < 1e-9 and res.pos_entry.passed
    assert res.sum_neg == 0 and res.neg_entry.passed and res.neg_entry.evidence["vacuous"]
    pipe = ident.resonance_check(pipeline_dossiers(axes), 1e-6)
    assert abs(pipe.sum_pos - 0.5) < 1e-6
    assert all(d.chi_hat == 1 for d in pipeline_dossiers(axes))


def test_resonance_single_hyperbolic():
    d = dossier("h", 1.0, record([-2, 1], mean=1.0), chi=Fraction(1, 2))
    res = ident.resonance_check([d])
    assert res.sum_pos == pytest.approx(0.5)


def test_resonance_needs_chi():
    d = dossier("x", 1.0, record([0, 2], nullities=[1, 3]))
    with pytest.raises(IncompleteDossierError):
        ident.resonance_check([d])


def test_sum_inverse_mean():
    total, entry, cor = ident.sum_inverse_mean(oracle_dossiers((1.0, 2 ** 0.25)))
    assert total == pytest.approx(0.5, abs=1e-12) and entry.passed and cor.passed
    total, entry, _ = ident.sum_inverse_mean([dossier("a", 1.0, record([0, 2], mean=2.0))])
    assert total == 0.5 and entry.passed
    _, _, cor = ident.sum_inverse_mean([dossier("a", 1.0, record([0, 3], mean=3.0))])
    assert not cor.passed and cor.status == ident.INCOMPLETE
    with pytest.raises(PreconditionError):
        ident.sum_inverse_mean([dossier("a", 1.0, record([-3, -6], mean=-3.0))])


# -- gamma and action bounds --------------------------------------------------------------------

@pytest.mark.parametrize("R", [1.0, 2.0])
def test_gamma_sphere(R):
    d = dossier("s", np.pi * R**2, record([2, 6], mean=4.0))
    entry = ident.gamma_consistency([d], SurfaceMetrics(R, R, R), 1e-9)
    assert entry.passed
    assert entry.evidence["common"] == pytest.approx(np.pi * R**2 / 4)
    lo, hi = entry.evidence["interval"]
    assert lo == pytest.approx(hi)


@pytest.mark.parametrize("lam", [2 ** 0.25, 1.3, 1.7])
def test_gamma_ellipsoid(lam):
    entry = ident.gamma_consistency(oracle_dossiers((1.0, lam)), SurfaceMetrics(1.0, lam, 1.0), 1e-9)
    assert entry.passed
    assert entry.evidence["common"] == pytest.approx(np.pi * lam**2 / (2 * (1 + lam**2)), abs=1e-9)
    lo, hi = entry.evidence["interval"]
    assert (lo, hi) == pytest.approx((np.pi / 4, np.pi * lam**2 / 4))


def test_gamma_empty_is_incomplete():
    assert ident.gamma_consistency([], SurfaceMetrics(1, 1, 1)).status == ident.INCOMPLETE


def test_action_window_examples():
    ds = oracle_dossiers((1.0, 1.2))
    entry = ident.action_window(ds, SurfaceMetrics(1.0, 1.2, 1.0))
    assert entry.passed
    assert entry.evidence["window"] == pytest.approx([np.pi, 1.44 * np.pi])
    assert entry.evidence["eligible"] == {"y1": [1], "y2": [1]}
    sphere = ident.action_window([dossier("s", 4 * np.pi, record([2, 6], mean=4.0))],
                                 SurfaceMetrics(2.0, 2.0, 2.0))
    assert sphere.evidence["eligible"] == {"s": [1]}
    bad = ident.action_window([dossier("tiny", 0.5, record([0, 2]))], SurfaceMetrics(1.0, 1.2, 1.0))
    assert not bad.passed and bad.evidence["violators"] == ["tiny"]


def test_psi_value():
    assert ident.psi_value(np.pi, 1, 1.5) == pytest.approx(-0.25 * (4 * np.pi / 3) ** -3)
    vals = [ident.psi_value(np.pi, m, 1.5) for m in range(1, 6)]
    assert all(a < b < 0 for a, b in zip(vals, vals[1:]))
    assert ident.psi_value(2.0, 3, 1.2) == ident.psi_value(3.0, 2, 1.2)
    with pytest.raises(PreconditionError):
        ident.psi_value(1.0, 1, 2.0)
    with pytest.raises(PreconditionError):
        ident.psi_value(-1.0, 1, 1.5)


# -- Morse series ---------------------------------------------------------------------------------

def test_morse_irrational_ellipsoid():
    axes = (1.0, 2 ** 0.25)
    entry = ident.morse_series_check(oracle_dossiers(axes), (-2, 20))
    assert entry.passed
    assert all(v >= 0 for v in entry.evidence["u"].values())
    expected = morse_counts(axes, 20)
    assert {q: v for q, v in entry.evidence["m"].items() if v} == expected


def test_morse_empty_fails():
    entry = ident.morse_series_check([], (0, 4))
    assert not entry.passed
    assert entry.evidence["u"][0] == -1


def test_morse_single_hyperbolic():
    vs = [3 * m - 3 for m in range(1, 15)]
    d = dossier("h", 1.0, record(vs, mean=3.0), chi=Fraction(1, 2))
    counts = ident.morse_coefficients([d], 20)
    # beta = 1 only for odd m, i.e. indices 0, 6, 12, 18
    assert counts == {0: 1, 6: 1, 12: 1, 18: 1}
    entry = ident.morse_series_check([d], (0, 20))
    # M(t) - 1/(1-t^2) has coefficient -1 at t^2, so the hyperbolic orbit alone is not enough
    assert entry.evidence["u"][2] < 0 and not entry.passed


def test_divide_series_exact():
    # M = 1/(1-t^2) + (1+t)(t^2 + 2 t^5)
    counts = {q: 1 for q in range(0, 12, 2)}
    for q, c in ((2, 1), (3, 1), (5, 2), (6, 2)):
        counts[q] = counts.get(q, 0) + c
    u = ident.divide_series(counts, 0, 11)
    assert u == {q: (1 if q == 2 else 2 if q == 5 else 0) for q in range(0, 12)}


def test_morse_bottom_monotonicity():
    d1 = dossier("a", 1.0, record([-1 + 2 * (m - 1) for m in range(1, 20)], mean=2.0))
    d2 = dossier("b", 1.0, record([-1 + 2 * (m - 1) for m in range(1, 20)], mean=2.0))
    entry = ident.morse_series_check([d1], (-1, 10))
    bottom = entry.evidence["bottom_monotone"]
    assert bottom["applicable"] and bottom["p"] == -1
    assert not bottom["holds"] and not entry.passed
    assert ident.morse_series_check([d1, d2], (-1, 10)).evidence["bottom_monotone"]["m_p"] == 2


def test_morse_errors():
    with pytest.raises(HypothesisError):
        ident.morse_series_check([dossier("z", 1.0, record([0, 0], mean=0.0))], (0, 4))
    with pytest.raises(UnsupportedError):
        ident.morse_series_check([dossier("d", 1.0, record([0, 2, 4, 6, 8, 10], mean=2.0, nullities=[1, 1, 3, 1, 1, 1]),
                                          chi=Fraction(1))], (0, 4))
    with pytest.raises(IncompleteDossierError):
        ident.morse_series_check([dossier("s", 1.0, record([0, 2], mean=2.0))], (0, 20))


# -- convexity and theorem verdicts ---------------------------------------------------------------

def test_dyn_convex_ellipsoid_window():
    ds = pipeline_dossiers((1.0, 1.2), m_max=50)
    entry = ident.dyn_convex_check(ds, 2, 50)
    assert entry.passed and entry.evidence["verified_up_to_m"] == 50


def test_dyn_convex_failures():
    hyper = dossier("h", 1.0, record([1 - 2 + 0, 3 * 2 - 3 - 1], mean=2.0))
    entry = ident.dyn_convex_check([hyper], 2)
    assert not entry.passed and entry.evidence["failures"][0]["m"] == 1
    theta = 1.0
    vs = [iterate_index_formula("Case2", 0, theta, m) for m in range(1, 21)]
    assert ident.dyn_convex_check([dossier("c", 1.0, record(vs, mean=2 + theta / np.pi))], 2).passed


def elliptic_fd():
    return floquet(diamond(n1(1.0, 1.0), rotation(1.0)))


def hyperbolic_fd():
    return floquet(diamond(n1(1.0, 1.0), np.diag([2.0, 0.5])))


def test_theorem_1_1():
    ds = pipeline_dossiers((1.0, 1.2))
    assert ident.theorem_1_1_verdict(ds, SurfaceMetrics(1.0, 1.2, 1.0)).status == ident.PASS
    entry = ident.theorem_1_1_verdict(ds, SurfaceMetrics(1.0, 1.5, 1.0))
    assert entry.passed and entry.status == ident.NOT_MET
    assert entry.evidence["failed_clauses"] == ["pinching"]
    three = ds + [ds[0]]
    assert ident.theorem_1_1_verdict(three, SurfaceMetrics(1.0, 1.2, 1.0)).evidence["failed_clauses"] == ["count"]
    mixed = [dossier("a", 1.0, record([0, 4]), fd=elliptic_fd()),
             dossier("b", 1.2, record([0, 3]), fd=hyperbolic_fd())]
    bad = ident.theorem_1_1_verdict(mixed, SurfaceMetrics(1.0, 1.2, 1.0))
    assert not bad.passed and bad.status == ident.FAIL


def test_multiplicity():
    ds = pipeline_dossiers((1.0, 1.2))
    dyn = ident.dyn_convex_check(ds, 2)
    entry = ident.multiplicity_verdicts(ds, 2, True, dyn)
    assert entry.passed and entry.rhs == 2
    ds3 = pipeline_dossiers((1.0, 1.1, 1.2))
    entry = ident.multiplicity_verdicts(ds3, 3, True, ident.dyn_convex_check(ds3, 3))
    assert entry.passed and entry.rhs == 3
    fake = [dossier(f"y{k}", 1.0 + k, record([2, 8], n=4)) for k in range(3)]
    entry = ident.multiplicity_verdicts(fake, 4, True)
    assert not entry.passed and entry.status == ident.INCOMPLETE and entry.rhs == 4
    not_convex = ident.dyn_convex_check([dossier("h", 1.0, record([-1, 2]))], 2)
    assert ident.multiplicity_verdicts([], 2, True, not_convex).status == ident.NOT_MET


def test_dossier_round_trip():
    d = pipeline_dossiers((1.0, 1.3))[0]
    back = OrbitDossier.from_dict(d.to_dict())
    assert back.chi_hat == d.chi_hat and back.index.iterates == d.index.iterates
    assert back.floquet.case_tag == d.floquet.case_tag
    assert back.eligible_iterates == d.eligible_iterates


def test_verdict_entries_carry_evidence():
    entry = ident.pinching_entry(SurfaceMetrics(1.0, 1.2, 1.0))
    as_dict = entry.to_dict()
    assert set(as_dict) == {"pass", "status", "lhs", "rhs", "tol", "evidence"}
    assert as_dict["evidence"]["pinched"] is True


def test_global_failure_labels():
    from charflow.pipeline import run_checks, survey_confidence
    ds = pipeline_dossiers((1.0, 2 ** 0.25))
    ds[0].chi_hat = -ds[0].chi_hat
    sm = SurfaceMetrics(1.0, 2 ** 0.25, 1.0)
    base = {"failures": 0, "families": []}
    for info, status in (({**base, "exhaustive": True}, ident.FAIL),
                         ({**base, "exhaustive": False}, ident.INCOMPLETE),
                         ({**base, "failures": 2, "exhaustive": True}, ident.INCOMPLETE)):
        report = run_checks(ds, sm, 2, ["resonance_pos"], survey_info=info)
        assert not report.all_passed
        assert report.entries["resonance_pos"].status == status
        assert report.inputs["survey_confidence"] == survey_confidence(info)
    assert survey_confidence(None) == "unknown"


def test_boundary_orbit_kept_unclassified(monkeypatch):
    from charflow import pipeline
    from charflow.errors import BoundaryError

    def ambiguous(*args, **kwargs):
        raise BoundaryError("ambiguous", 3e-6)

    monkeypatch.setattr(pipeline, "floquet", ambiguous)
    d = pipeline_dossiers((1.0, 1.3))[0]
    assert d.floquet is None and d.chi_hat is None
    assert d.notes["floquet_boundary_gap"] == 3e-6
    assert pipeline.formula_mismatches(d) is None
    with pytest.raises(IncompleteDossierError):
        ident.resonance_check([d])
