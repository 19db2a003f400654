"""Per-orbit dossiers and verdict-report assembly."""

from __future__ import annotations

import math
from typing import Sequence

from . import identities as ident
from .dynamics import flow, linearized_path
from .errors import BoundaryError, CaseError, ConfigError, NumericInstabilityError, PreconditionError
from .identities import OrbitDossier, VerdictReport
from .maslov import DEFAULT_M_MAX, index_sequence, iterate_index_formula
from .orbitfinder import ClosedCharacteristic
from .spectral import floquet
from .surface import SurfaceMetrics, SurfaceModel

ALL_CHECKS = (
    "resonance_pos",
    "resonance_zero",
    "morse_nonneg",
    "gamma_consistent",
    "action_lower_bound",
    "pinching",
    "dyn_convex",
    "thm_1_1",
    "sum_inverse_mean",
    "cor_3_11",
    "multiplicity",
)


REFINEMENTS = 3


def _indexed_path(surface: SurfaceModel, orbit: ClosedCharacteristic, m_max: int):
    """Linearized path and index record, resampling more densely if the path is too coarse."""
    samples = orbit.samples
    for attempt in range(REFINEMENTS + 1):
        path = linearized_path(surface, samples)
        try:
            return path, index_sequence(path, m_max)
        except NumericInstabilityError:
            if attempt == REFINEMENTS:
                raise
        samples = flow(surface, orbit.y0, orbit.period_tau, n_samples=4 * len(samples.times),
                       variational=True)


def build_dossier(surface: SurfaceModel, orbit: ClosedCharacteristic, surface_metrics: SurfaceMetrics,
                  m_max: int = DEFAULT_M_MAX) -> OrbitDossier:
    """Floquet data, iterate indices and (when non-degenerate) the average Euler characteristic."""
    path, rec = _indexed_path(surface, orbit, m_max)
    try:
        fd = floquet(path, orbit.period_tau)
    except BoundaryError as exc:
        # ambiguous eigenvalue-1 multiplicity: keep the orbit but refuse to classify it
        fd = None
        notes = {"classification": None, "floquet_boundary_gap": exc.gap}
    else:
        notes = {"classification": fd.classification}
        if "case_boundary_gap" in fd.extras:
            notes["case_unresolved"] = True
    dossier = OrbitDossier(
        prime_id=orbit.prime_id,
        action=float(orbit.action_A),
        period=float(orbit.period_tau),
        y0=[float(v) for v in orbit.y0],
        floquet=fd,
        index=rec,
        notes=notes,
    )
    if fd is None:
        notes["chi_hat_omitted"] = "Floquet data unresolved"
    elif dossier.nondegenerate():
        dossier.chi_hat = ident.chi_hat_nondegenerate(rec)
    else:
        notes["chi_hat_omitted"] = "degenerate iterate within m_max"
    lo = math.pi * surface_metrics.support_dist_d**2
    hi = math.pi * surface_metrics.outer_radius_R**2
    dossier.eligible_iterates = ident.window_iterates(dossier.action, lo, hi, m_max)
    return dossier


def formula_mismatches(dossier: OrbitDossier) -> list[tuple[int, int, int]] | None:
    """``(m, formula, computed)`` rows where the Sp(4) iteration formula disagrees.

    Returns None when the dossier has no recognised case tag.
    """
    fd, rec = dossier.floquet, dossier.index
    if fd is None or rec is None or fd.case_tag is None or fd.case_tag.name == "Other":
        return None
    tag = fd.case_tag
    out = []
    for m, _, _, i_m in rec.iterates:
        try:
            expected = iterate_index_formula(tag.key(), rec.viterbo(1), tag.theta, m)
        except CaseError:
            return None
        if expected != i_m:
            out.append((m, expected, i_m))
    return out


# checks whose statement involves every prime orbit of the surface
GLOBAL_CHECKS = ("resonance_pos", "resonance_zero", "morse_nonneg", "gamma_consistent",
                 "sum_inverse_mean")


def survey_confidence(survey_info: dict | None) -> str:
    if not survey_info:
        return "unknown"
    if survey_info.get("families") or survey_info.get("failures", 0) > 0:
        return "partial"
    return "exhaustive" if survey_info.get("exhaustive") else "window-only"


def _failure_status(survey_info: dict | None) -> str:
    """Label for a failed global identity: only an exhaustive survey can violate one."""
    if survey_confidence(survey_info) in ("partial", "window-only"):
        return ident.INCOMPLETE
    return ident.FAIL


def parse_checks(spec: str | Sequence[str] | None) -> list[str]:
    if spec is None or spec == "all":
        return list(ALL_CHECKS)
    names = [s.strip() for s in spec.split(",")] if isinstance(spec, str) else list(spec)
    names = [s for s in names if s]
    if "all" in names:
        return list(ALL_CHECKS)
    unknown = [s for s in names if s not in ALL_CHECKS]
    if unknown or not names:
        raise ConfigError(f"unknown checks {unknown}; choose from {', '.join(ALL_CHECKS)}")
    return names


def run_checks(dossiers: Sequence[OrbitDossier], surface_metrics: SurfaceMetrics, n: int,
               checks: Sequence[str] | None = None, tol: float = ident.PIPELINE_TOL,
               m_max: int | None = None, window: tuple[int, int] = (0, 20),
               survey_info: dict | None = None, inputs: dict | None = None) -> VerdictReport:
    """Evaluate the requested checks over the surveyed dossiers."""
    if tol <= 0:
        raise PreconditionError("tolerance must be positive")
    wanted = parse_checks(checks)
    failure = _failure_status(survey_info)
    entries: dict[str, ident.VerdictEntry] = {}

    if {"resonance_pos", "resonance_zero"} & set(wanted):
        res = ident.resonance_check(dossiers, tol, failure)
        entries["resonance_pos"] = res.pos_entry
        entries["resonance_zero"] = res.neg_entry
    if {"sum_inverse_mean", "cor_3_11"} & set(wanted):
        _, bound, cor = ident.sum_inverse_mean(dossiers, tol)
        entries["sum_inverse_mean"] = bound
        entries["cor_3_11"] = cor
    if "morse_nonneg" in wanted:
        entries["morse_nonneg"] = ident.morse_series_check(dossiers, window)
    if "gamma_consistent" in wanted:
        entries["gamma_consistent"] = ident.gamma_consistency(dossiers, surface_metrics, tol)
    if "action_lower_bound" in wanted:
        entries["action_lower_bound"] = ident.action_window(dossiers, surface_metrics,
                                                            m_max or DEFAULT_M_MAX)
    if "pinching" in wanted:
        entries["pinching"] = ident.pinching_entry(surface_metrics)
    dyn = None
    if {"dyn_convex", "multiplicity"} & set(wanted):
        dyn = ident.dyn_convex_check(dossiers, n, m_max)
        if "dyn_convex" in wanted:
            entries["dyn_convex"] = dyn
    if "thm_1_1" in wanted:
        entries["thm_1_1"] = ident.theorem_1_1_verdict(dossiers, surface_metrics, n)
    if "multiplicity" in wanted:
        nondeg = bool(dossiers) and all(d.nondegenerate() for d in dossiers)
        entries["multiplicity"] = ident.multiplicity_verdicts(dossiers, n, nondeg, dyn)

    for name in GLOBAL_CHECKS:
        entry = entries.get(name)
        if entry is not None and not entry.passed and entry.status == ident.FAIL:
            entry.status = failure
    ordered = {k: entries[k] for k in ALL_CHECKS if k in entries and k in wanted}
    info = dict(inputs or {})
    info["survey_confidence"] = survey_confidence(survey_info)
    if survey_info is not None:
        info["survey"] = survey_info
    return VerdictReport(ordered, info)
