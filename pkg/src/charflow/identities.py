"""Global identities and theorem-level verdicts over a surveyed orbit set.

Every check returns a :class:`VerdictEntry` carrying the computed left- and
right-hand sides, the tolerance and supporting evidence.  Entries whose
hypotheses fail are reported with ``status="hypothesis-not-met"`` and
``passed=True``: nothing is asserted in that case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import (HypothesisError, IncompleteDossierError, PreconditionError,
                     TableError, UnsupportedError)
from .maslov import IndexRecord
from .spectral import FloquetData
from .surface import SurfaceMetrics

PIPELINE_TOL = 1e-6
ORACLE_TOL = 1e-9
ACTION_TOL = 1e-8

PASS = "pass"
FAIL = "identity-violated"
INCOMPLETE = "survey-incomplete"
NOT_MET = "hypothesis-not-met"


@dataclass
class OrbitDossier:
    """Everything known about one prime closed characteristic."""

    prime_id: str
    action: float
    period: float
    y0: list[float]
    floquet: FloquetData | None
    index: IndexRecord | None
    chi_hat: Fraction | None = None
    eligible_iterates: list[int] = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def mean_index(self) -> float:
        if self.index is None:
            raise IncompleteDossierError(f"{self.prime_id}: missing index record")
        return self.index.mean_index

    def nondegenerate(self) -> bool:
        return self.index is not None and all(row[2] == 1 for row in self.index.iterates)

    def to_dict(self) -> dict:
        return {
            "prime_id": self.prime_id,
            "action": self.action,
            "period": self.period,
            "y0": list(self.y0),
            "floquet": None if self.floquet is None else self.floquet.to_dict(),
            "index": None if self.index is None else self.index.to_dict(),
            "chi_hat": None if self.chi_hat is None else str(self.chi_hat),
            "eligible_iterates": list(self.eligible_iterates),
            "notes": self.notes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OrbitDossier":
        chi = d.get("chi_hat")
        return cls(
            prime_id=d["prime_id"],
            action=float(d["action"]),
            period=float(d["period"]),
            y0=[float(v) for v in d["y0"]],
            floquet=None if d.get("floquet") is None else FloquetData.from_dict(d["floquet"]),
            index=None if d.get("index") is None else IndexRecord.from_dict(d["index"]),
            chi_hat=None if chi is None else Fraction(chi),
            eligible_iterates=[int(m) for m in d.get("eligible_iterates", [])],
            notes=d.get("notes", {}),
        )


@dataclass
class VerdictEntry:
    name: str
    passed: bool
    status: str
    lhs: float | None
    rhs: float | None
    tol: float | None
    evidence: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "pass": self.passed,
            "status": self.status,
            "lhs": _num(self.lhs),
            "rhs": _num(self.rhs),
            "tol": self.tol,
            "evidence": _jsonable(self.evidence),
        }


@dataclass
class VerdictReport:
    entries: dict[str, VerdictEntry]
    inputs: dict = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return all(e.passed for e in self.entries.values())

    def to_dict(self) -> dict:
        return {
            "schema": "v1",
            "inputs": self.inputs,
            "checks": {k: v.to_dict() for k, v in self.entries.items()},
        }


def _num(v):
    if v is None:
        return None
    if isinstance(v, Fraction):
        return float(v)
    return float(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# -- average Euler characteristic ------------------------------------------------

def chi_hat_from_indices(i_y: int, i_y2: int) -> Fraction:
    """Closed form for non-degenerate orbits from ``i(y)`` and ``i(y^2)``."""
    sign = 1 if i_y % 2 == 0 else -1
    if (i_y2 - i_y) % 2 == 0:
        return Fraction(sign)
    return Fraction(sign, 2)


def chi_hat_nondegenerate(index: IndexRecord) -> Fraction:
    """Average Euler characteristic of an orbit whose checked iterates are all non-degenerate."""
    if len(index.iterates) < 2:
        raise IncompleteDossierError("need the first two iterates")
    bad = [row[0] for row in index.iterates if row[2] != 1]
    if bad:
        raise UnsupportedError(f"iterates {bad} are degenerate; use chi_hat_table")
    return chi_hat_from_indices(index.viterbo(1), index.viterbo(2))


def _check_row(m: int, ks: Sequence[int], nu: int | None) -> None:
    """Admissibility of one row; the most specific violated clause is named."""
    if any(k < 0 or int(k) != k for k in ks):
        raise TableError(f"row m={m}: critical type numbers must be non-negative integers")
    nonzero = [l for l, k in enumerate(ks) if k]
    if ks[0] not in (0, 1):
        raise TableError(f"row m={m}: k_0 must be 0 or 1 (end value rule)")
    if nu is None:
        if ks[0] == 1 and len(nonzero) > 1:
            raise TableError(f"row m={m}: clause (i) violated, k_0 = 1 forces all other k_l = 0")
        return
    if not 1 <= nu <= len(ks):
        raise TableError(f"row m={m}: nullity {nu} outside [1, {len(ks)}]")
    if any(l > nu - 1 for l in nonzero):
        raise TableError(f"row m={m}: k_l must vanish for l outside [0, nu - 1]")
    top = ks[nu - 1]
    if top not in (0, 1):
        raise TableError(f"row m={m}: k_(nu-1) must be 0 or 1 (end value rule)")
    if nu <= 3 and len(nonzero) > 1:
        raise TableError(f"row m={m}: clause (iv) violated, at most one nonzero k_l when nu <= 3")
    if any(1 <= l <= nu - 2 for l in nonzero) and (ks[0] or top):
        raise TableError(f"row m={m}: clause (iii) violated, interior k_l forces both ends to 0")
    if nu > 1 and top == 1 and any(l < nu - 1 for l in nonzero):
        raise TableError(f"row m={m}: clause (ii) violated, k_(nu-1) = 1 forces lower k_l = 0")
    if ks[0] == 1 and len(nonzero) > 1:
        raise TableError(f"row m={m}: clause (i) violated, k_0 = 1 forces all other k_l = 0")


def chi_hat_table(K_y: int, rows: Sequence[Sequence[int]],
                  nullities: Sequence[int] | None = None) -> Fraction:
    """Average Euler characteristic from a table of critical type numbers.

    ``rows`` are ``(m, i(y^m), k_0, ..., k_(2n-2))`` for ``m = 1..K_y``.
    ``nullities`` optionally gives ``nu(y^m)`` per row, enabling the clauses
    that depend on it.
    """
    if K_y < 1:
        raise TableError("K(y) must be a positive integer")
    if len(rows) != K_y:
        raise TableError(f"expected {K_y} rows (m = 1..K), got {len(rows)}")
    if nullities is not None and len(nullities) != len(rows):
        raise TableError("one nullity per row is required")
    width = {len(r) for r in rows}
    if len(width) != 1 or width.pop() < 3:
        raise TableError("rows must share the layout (m, i, k_0, ..., k_(2n-2))")
    total = Fraction(0)
    for pos, row in enumerate(rows):
        m, i_m, *ks = (int(v) for v in row)
        if m != pos + 1:
            raise TableError(f"row {pos}: expected m = {pos + 1}, got {m}")
        _check_row(m, ks, None if nullities is None else int(nullities[pos]))
        for l, k in enumerate(ks):
            total += (-1) ** ((i_m + l) % 2) * k
    return total / K_y


# -- resonance identities ---------------------------------------------------------

@dataclass
class ResonanceResult:
    sum_pos: float
    sum_neg: float
    negative_members: list[str]
    zero_members: list[str]
    pos_entry: VerdictEntry
    neg_entry: VerdictEntry


def _require_chi(dossiers: Iterable[OrbitDossier]) -> None:
    missing = [d.prime_id for d in dossiers if d.chi_hat is None or d.index is None]
    if missing:
        raise IncompleteDossierError(f"chi_hat/mean_index missing for {missing}")


def resonance_check(dossiers: Sequence[OrbitDossier], tol: float = PIPELINE_TOL,
                    failure_status: str = FAIL) -> ResonanceResult:
    """Positive and negative mean-index resonance sums."""
    _require_chi(dossiers)
    pos = [d for d in dossiers if d.mean_index > 0]
    neg = [d for d in dossiers if d.mean_index < 0]
    zero = [d.prime_id for d in dossiers if d.mean_index == 0]
    s_pos = math.fsum(float(d.chi_hat) / d.mean_index for d in pos)
    s_neg = math.fsum(float(d.chi_hat) / d.mean_index for d in neg)
    terms = {d.prime_id: {"chi_hat": d.chi_hat, "mean_index": d.mean_index} for d in dossiers}
    ok_pos = abs(s_pos - 0.5) <= tol
    ok_neg = abs(s_neg) <= tol
    pos_entry = VerdictEntry("resonance_pos", ok_pos, PASS if ok_pos else failure_status,
                             s_pos, 0.5, tol, {"terms": terms, "zero_mean_index": zero})
    neg_entry = VerdictEntry("resonance_zero", ok_neg, PASS if ok_neg else failure_status,
                             s_neg, 0.0, tol, {"members": [d.prime_id for d in neg],
                                               "vacuous": not neg})
    return ResonanceResult(s_pos, s_neg, [d.prime_id for d in neg], zero, pos_entry, neg_entry)


def sum_inverse_mean(dossiers: Sequence[OrbitDossier], tol: float = PIPELINE_TOL
                     ) -> tuple[float, VerdictEntry, VerdictEntry]:
    """``sum 1/mean_index`` with the lower bound 1/2 and the two-orbit corollary."""
    means = [d.mean_index for d in dossiers]
    if any(m <= 0 for m in means):
        raise PreconditionError("all mean indices must be positive")
    total = math.fsum(1.0 / m for m in means)
    ok = total >= 0.5 - tol
    entry = VerdictEntry("sum_inverse_mean", ok, PASS if ok else INCOMPLETE, total, 0.5, tol,
                         {"mean_indices": dict(zip((d.prime_id for d in dossiers), means))})
    big = [d.prime_id for d in dossiers if d.mean_index > 2 + tol]
    cor_ok = not big or len(dossiers) >= 2
    cor = VerdictEntry("cor_3_11", cor_ok, PASS if cor_ok else INCOMPLETE, float(len(dossiers)),
                       2.0 if big else 1.0, 0.0, {"mean_index_above_2": big})
    return total, entry, cor


# -- action and gamma bounds ---------------------------------------------------------

def gamma_consistency(dossiers: Sequence[OrbitDossier], surface_metrics: SurfaceMetrics,
                      tol: float = PIPELINE_TOL) -> VerdictEntry:
    """Common value of ``A / mean_index`` and its position in ``[pi r^2/2n, pi R^2/2n]``."""
    if not dossiers:
        return VerdictEntry("gamma_consistent", False, INCOMPLETE, None, None, tol, {"orbits": 0})
    n = dossiers[0].index.n
    vals = {d.prime_id: d.action / d.mean_index for d in dossiers}
    arr = np.array(list(vals.values()))
    common = float(np.mean(arr))
    spread = float(np.max(arr) - np.min(arr))
    lo = math.pi * surface_metrics.inner_radius_r**2 / (2 * n)
    hi = math.pi * surface_metrics.outer_radius_R**2 / (2 * n)
    scale = max(abs(common), 1.0)
    equal = spread <= tol * scale
    inside = lo - tol * scale <= common <= hi + tol * scale
    ok = equal and inside
    return VerdictEntry("gamma_consistent", ok, PASS if ok else FAIL, spread, 0.0, tol,
                        {"values": vals, "common": common, "interval": [lo, hi],
                         "mutually_equal": equal, "in_interval": inside})


def action_window(dossiers: Sequence[OrbitDossier], surface_metrics: SurfaceMetrics,
                  m_max: int = 20, tol: float = ACTION_TOL) -> VerdictEntry:
    """Lower bound ``A >= pi d^2`` and the iterates whose action lies in ``[pi d^2, pi R^2]``."""
    lo = math.pi * surface_metrics.support_dist_d**2
    hi = math.pi * surface_metrics.outer_radius_R**2
    eligible, violators = {}, []
    for d in dossiers:
        if d.action < lo - tol:
            violators.append(d.prime_id)
        eligible[d.prime_id] = window_iterates(d.action, lo, hi, m_max)
    min_action = min((d.action for d in dossiers), default=None)
    ok = not violators
    return VerdictEntry("action_lower_bound", ok, PASS if ok else FAIL, min_action, lo, tol,
                        {"window": [lo, hi], "eligible": eligible, "violators": violators})


def window_iterates(action_A: float, lo: float, hi: float, m_max: int, rel: float = 1e-9) -> list[int]:
    return [m for m in range(1, m_max + 1)
            if lo * (1 - rel) <= m * action_A <= hi * (1 + rel)]


def psi_value(action_A: float, m: int, alpha: float) -> float:
    """Dual action value ``-(1 - alpha/2) ((2/alpha) m A)^(-alpha/(2 - alpha))``."""
    if action_A <= 0:
        raise PreconditionError("action must be positive")
    if not 1 < alpha < 2:
        raise PreconditionError("alpha must lie in (1, 2)")
    return -(1 - alpha / 2) * ((2 / alpha) * m * action_A) ** (-alpha / (2 - alpha))


# -- Morse series ---------------------------------------------------------------------

def morse_coefficients(dossiers: Sequence[OrbitDossier], q_max: int) -> dict[int, int]:
    """``m_q`` for all ``q <= q_max`` from non-degenerate iterates with ``beta = 1``."""
    counts: dict[int, int] = {}
    for d in dossiers:
        rec = d.index
        if rec is None:
            raise IncompleteDossierError(f"{d.prime_id}: missing index record")
        mean = rec.mean_index
        if abs(mean) < 1e-9:
            raise HypothesisError(f"{d.prime_id} has zero mean index")
        if mean < 0:
            raise HypothesisError(f"{d.prime_id} has negative mean index; the series would not be locally finite")
        needed = math.floor((q_max + 2 * rec.n) / mean) + 1
        if len(rec.iterates) < needed:
            raise IncompleteDossierError(
                f"{d.prime_id}: {len(rec.iterates)} iterates stored, {needed} needed for q <= {q_max}")
        i_y = rec.viterbo(1)
        for m, _, nu, i_m in rec.iterates[:needed]:
            if i_m > q_max:
                continue
            if (i_m - i_y) % 2:
                continue
            if nu != 1:
                raise UnsupportedError(f"{d.prime_id}: iterate {m} is degenerate (nu = {nu})")
            counts[i_m] = counts.get(i_m, 0) + 1
    return counts


def divide_series(counts: dict[int, int], q_lo: int, q_hi: int) -> dict[int, int]:
    """Coefficients of ``U`` in ``M(t) - 1/(1 - t^2) = (1 + t) U(t)`` on ``[q_lo, q_hi]``.

    Division runs upward from ``q_lo``, below which every coefficient of the
    left side must vanish, so the result is exact on the whole range.
    """
    u: dict[int, int] = {}
    prev = 0
    for q in range(q_lo, q_hi + 1):
        c = counts.get(q, 0) - (1 if q >= 0 and q % 2 == 0 else 0)
        prev = c - prev
        u[q] = prev
    return u


def morse_series_check(dossiers: Sequence[OrbitDossier], window: tuple[int, int] = (0, 20)
                       ) -> VerdictEntry:
    """Non-negativity of ``U`` on the window, plus the bottom-of-spectrum monotonicity."""
    q_min, q_max = window
    counts = morse_coefficients(dossiers, q_max)
    q_lo = min([q_min, 0] + list(counts))
    u = divide_series(counts, q_lo, q_max)
    shown = {q: u[q] for q in range(q_min, q_max + 1)}
    negative = [q for q, v in shown.items() if v < 0]
    nonzero = sorted(q for q, v in counts.items() if v > 0)
    bottom = {"applicable": False}
    if nonzero and nonzero[0] < 0:
        p = nonzero[0]
        holds = counts.get(p + 1, 0) >= counts[p]
        bottom = {"applicable": True, "p": p, "m_p": counts[p], "m_p_plus_1": counts.get(p + 1, 0),
                  "holds": holds}
    ok = not negative and bottom.get("holds", True)
    status = PASS if ok else (INCOMPLETE if not dossiers else FAIL)
    return VerdictEntry("morse_nonneg", ok, status, float(min(shown.values())), 0.0, 0.0,
                        {"m": {q: counts.get(q, 0) for q in range(q_lo, q_max + 1)},
                         "u": shown, "negative_at": negative, "bottom_monotone": bottom,
                         "window": [q_min, q_max]})


# -- convexity and theorem verdicts --------------------------------------------------------

def dyn_convex_check(dossiers: Sequence[OrbitDossier], n: int, m_max: int | None = None
                     ) -> VerdictEntry:
    """``i(y, m) >= n`` for every stored iterate up to ``m_max``."""
    worst, failures, checked = None, [], 0
    for d in dossiers:
        rows = d.index.iterates if m_max is None else d.index.iterates[:m_max]
        for m, i_m, _, _ in rows:
            checked = max(checked, m)
            if worst is None or i_m < worst:
                worst = i_m
            if i_m < n:
                failures.append({"orbit": d.prime_id, "m": m, "index": i_m})
    ok = not failures
    return VerdictEntry("dyn_convex", ok, PASS if ok else FAIL,
                        None if worst is None else float(worst), float(n), 0.0,
                        {"verified_up_to_m": checked, "failures": failures[:20]})


def pinching_entry(surface_metrics: SurfaceMetrics) -> VerdictEntry:
    R2 = surface_metrics.outer_radius_R**2
    d2 = 2 * surface_metrics.support_dist_d**2
    holds = R2 < d2
    return VerdictEntry("pinching", True, PASS if holds else NOT_MET, R2, d2, 0.0,
                        {"pinched": holds})


def theorem_1_1_verdict(dossiers: Sequence[OrbitDossier], surface_metrics: SurfaceMetrics,
                        n: int = 2) -> VerdictEntry:
    """Both orbits elliptic, asserted only for two orbits in R^4 under pinching."""
    R2 = surface_metrics.outer_radius_R**2
    d2 = 2 * surface_metrics.support_dist_d**2
    clauses = {"dimension": n == 2, "count": len(dossiers) == 2, "pinching": R2 < d2}
    evidence = {"clauses": clauses, "orbits": len(dossiers)}
    if not all(clauses.values()):
        evidence["failed_clauses"] = [k for k, v in clauses.items() if not v]
        return VerdictEntry("thm_1_1", True, NOT_MET, R2, d2, 0.0, evidence)
    if any(d.floquet is None for d in dossiers):
        raise IncompleteDossierError("Floquet data required for the ellipticity verdict")
    elliptic = {d.prime_id: d.floquet.is_elliptic for d in dossiers}
    evidence["elliptic"] = elliptic
    ok = all(elliptic.values())
    return VerdictEntry("thm_1_1", ok, PASS if ok else FAIL, R2, d2, 0.0, evidence)


def multiplicity_verdicts(dossiers: Sequence[OrbitDossier], n: int, nondegenerate_flag: bool,
                          dyn_convex: VerdictEntry | None = None) -> VerdictEntry:
    """Compare the orbit count with the lower bounds for dynamically convex surfaces."""
    if dyn_convex is not None and not dyn_convex.passed:
        return VerdictEntry("multiplicity", True, NOT_MET, float(len(dossiers)), None, 0.0,
                            {"reason": "dynamical convexity not verified"})
    bound = (n + 1) // 2 + 1
    sources = ["general"]
    if nondegenerate_flag and n > bound:
        bound, sources = n, sources + ["nondegenerate"]
    if n in (3, 4) and n > bound:
        bound, sources = n, sources + ["n in {3, 4}"]
    found = len(dossiers)
    elliptic = sum(1 for d in dossiers if d.floquet is not None and d.floquet.is_elliptic)
    ok = found >= bound
    return VerdictEntry("multiplicity", ok, PASS if ok else INCOMPLETE, float(found), float(bound), 0.0,
                        {"bound_sources": sources, "elliptic_found": elliptic,
                         "elliptic_clause_met": elliptic >= 2})
