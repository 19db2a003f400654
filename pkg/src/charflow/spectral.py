"""Monodromy spectra, ellipticity and the Sp(4) basic-form case taxonomy."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .dynamics import SymplecticPath
from .errors import BoundaryError, CaseError, NumericInstabilityError, UnsupportedError
from .surface import symplectic_j

ONE_TOL = 1e-6
CIRCLE_TOL = 1e-6
SYMMETRY_TOL = 1e-7
TRACE_TOL = 1e-9
BAND = 10.0
MAX_DENOMINATOR = 64

J2 = np.array([[0.0, -1.0], [1.0, 0.0]])


@dataclass(frozen=True)
class CaseTag:
    """Basic-form case of the transverse 2x2 block of an Sp(4) monodromy.

    ``name`` is one of Case1, Case2, Case3, Case4, Hyperbolic, Other.
    ``b`` is set for Case1/Case3, ``theta`` for Case2.
    """

    name: str
    b: int | None = None
    theta: float | None = None

    def key(self):
        """Tag in the form accepted by the iteration formulas."""
        if self.name in ("Case1", "Case3"):
            return (self.name, self.b)
        return self.name

    def label(self) -> str:
        if self.b is not None:
            return f"{self.name}(b={self.b})"
        if self.theta is not None:
            return f"{self.name}(theta={self.theta:.12g})"
        return self.name

    def to_dict(self) -> dict:
        return {"name": self.name, "b": self.b, "theta": self.theta}

    @classmethod
    def from_dict(cls, d: dict | None) -> "CaseTag | None":
        if d is None:
            return None
        return cls(d["name"], d.get("b"), d.get("theta"))


@dataclass
class FloquetData:
    monodromy: np.ndarray
    multipliers: np.ndarray
    nullity_nu: int
    classification: str
    is_elliptic: bool
    is_hyperbolic: bool
    symmetry_defect: float
    transverse_block: np.ndarray | None = None
    case_tag: CaseTag | None = None
    extras: dict = field(default_factory=dict)

    @property
    def nondegenerate(self) -> bool:
        return self.nullity_nu == 2

    def to_dict(self) -> dict:
        return {
            "monodromy": self.monodromy.tolist(),
            "multipliers": [[float(z.real), float(z.imag)] for z in self.multipliers],
            "nullity_nu": self.nullity_nu,
            "classification": self.classification,
            "is_elliptic": self.is_elliptic,
            "is_hyperbolic": self.is_hyperbolic,
            "symmetry_defect": self.symmetry_defect,
            "transverse_block": None if self.transverse_block is None else self.transverse_block.tolist(),
            "case_tag": None if self.case_tag is None else self.case_tag.to_dict(),
            "extras": self.extras,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FloquetData":
        tb = d.get("transverse_block")
        return cls(
            monodromy=np.array(d["monodromy"], dtype=float),
            multipliers=np.array([complex(a, b) for a, b in d["multipliers"]]),
            nullity_nu=int(d["nullity_nu"]),
            classification=d["classification"],
            is_elliptic=bool(d["is_elliptic"]),
            is_hyperbolic=bool(d["is_hyperbolic"]),
            symmetry_defect=float(d["symmetry_defect"]),
            transverse_block=None if tb is None else np.array(tb, dtype=float),
            case_tag=CaseTag.from_dict(d.get("case_tag")),
            extras=dict(d.get("extras", {})),
        )


def _symmetry_defect(w: np.ndarray) -> float:
    worst = 0.0
    for lam in w:
        inv = 1.0 / lam
        d_inv = np.min(np.abs(w - inv)) / max(1.0, abs(inv))
        d_conj = np.min(np.abs(w - np.conj(lam))) / max(1.0, abs(lam))
        worst = max(worst, d_inv, d_conj)
    return float(worst)


def _multiplicity_of_one(w: np.ndarray) -> int:
    dist = np.abs(w - 1.0)
    band = (dist >= ONE_TOL) & (dist < BAND * ONE_TOL)
    if np.any(band):
        raise BoundaryError("multiplier at the eigenvalue-1 tolerance boundary", float(np.min(dist[band])))
    return int(np.sum(dist < ONE_TOL))


def transverse_block(M: np.ndarray, plane: np.ndarray) -> np.ndarray:
    """Restriction of ``M`` to the symplectic complement of ``plane`` (Sp(4) only).

    The complement basis ``(e, f)`` is normalised to ``e^T J f = -1`` so that
    the restriction is symplectic for the standard 2x2 form.
    """
    J = symplectic_j(2)
    a, b = plane[:, 0], plane[:, 1]
    # complement: v with a^T J v = b^T J v = 0
    constraints = np.vstack([a @ J, b @ J])
    _, _, vh = np.linalg.svd(constraints)
    e, f = vh[2], vh[3]
    w = e @ J @ f
    if abs(w) < 1e-12:
        raise NumericInstabilityError("forced plane is not symplectic")
    f = -f / w
    B = np.column_stack([e, f])
    MB = M @ B
    block, *_ = np.linalg.lstsq(B, MB, rcond=None)
    leak = float(np.linalg.norm(MB - B @ block))
    if leak > 1e-6 * max(1.0, float(np.linalg.norm(M))):
        raise NumericInstabilityError(f"symplectic complement of the forced plane is not invariant ({leak:.3g})")
    return block


def _default_plane() -> np.ndarray:
    # first conjugate pair, matching diamond(N1(1, 1), M_j) inputs
    return np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0], [0.0, 0.0]])


def classify_block(Mj: np.ndarray, trace_tol: float = TRACE_TOL) -> CaseTag:
    """Basic-form case of a 2x2 symplectic block.

    Sign conventions: ``N1(lam, b) = [[lam, b], [0, lam]]``; the sign of ``b``
    is the sign of ``tr sym(J2 (Mj - lam I))``, a symplectic congruence
    invariant.  ``theta`` is the angle of the Krein-positive eigenvalue, so
    ``R(theta)`` maps to ``theta``.
    """
    t = float(np.trace(Mj))
    scale = max(1.0, float(np.linalg.norm(Mj)))
    for target in (2.0, -2.0):
        gap = abs(t - target)
        if trace_tol * scale <= gap < BAND * trace_tol * scale:
            raise BoundaryError("transverse trace at the tolerance boundary", gap)
    lam = 1.0 if abs(t - 2.0) < trace_tol * scale else -1.0 if abs(t + 2.0) < trace_tol * scale else None
    if lam is not None:
        N = Mj - lam * np.eye(2)
        if np.linalg.norm(N) < 1e-6 * scale:
            b = 0
        else:
            s = float(np.trace(J2 @ N))
            b = 1 if s > 0 else -1
        if lam < 0:
            return CaseTag("Case1", b=b)
        if b == -1:
            return CaseTag("Case4")
        return CaseTag("Case3", b=b)
    if abs(t) > 2.0:
        return CaseTag("Hyperbolic")
    c = t / 2.0
    base = float(np.arccos(np.clip(c, -1.0, 1.0)))
    s = -float(np.trace(J2 @ (Mj - c * np.eye(2))))
    theta = base if s > 0 else 2.0 * np.pi - base
    return CaseTag("Case2", theta=theta)


def floquet(path: SymplecticPath | np.ndarray, period_tau: float | None = None,
            forced_plane: np.ndarray | None = None) -> FloquetData:
    """Floquet data of the monodromy ``gamma(tau)``.

    ``path`` may be a SymplecticPath (its last matrix is the monodromy, and
    ``period_tau`` must match its final time when given) or a bare matrix.
    For n = 2 the transverse block and case tag are filled in; the forced
    plane defaults to the path's orbit plane or the first conjugate pair.
    """
    if isinstance(path, SymplecticPath):
        M = np.asarray(path.end, dtype=float)
        if period_tau is not None and abs(path.times[-1] - period_tau) > 1e-9 * max(1.0, abs(period_tau)):
            raise CaseError("path does not end at the requested period")
        if forced_plane is None:
            forced_plane = path.forced_plane
    else:
        M = np.asarray(path, dtype=float)
    dim = M.shape[0]
    n = dim // 2
    w = np.linalg.eigvals(M)
    defect = _symmetry_defect(w)
    if defect > SYMMETRY_TOL:
        raise NumericInstabilityError(f"multiplier spectrum is not symplectic (defect {defect:.3g})")
    det_defect = abs(float(np.prod(w).real) - 1.0)
    if det_defect > 1e-8 * max(1.0, float(np.max(np.abs(w))) ** 2):
        raise NumericInstabilityError(f"monodromy determinant off by {det_defect:.3g}")
    nu = _multiplicity_of_one(w)
    on_circle = np.abs(np.abs(w) - 1.0) < CIRCLE_TOL
    is_elliptic = bool(np.all(on_circle))
    is_hyperbolic = bool(nu == 2 and np.sum(on_circle) == 2)
    if nu > 2:
        label = "degenerate-beyond-forced"
    elif is_elliptic:
        label = "elliptic"
    elif is_hyperbolic:
        label = "hyperbolic"
    else:
        label = "mixed"

    block = tag = None
    extras: dict = {}
    if n == 2:
        plane = _default_plane() if forced_plane is None else np.asarray(forced_plane, dtype=float)
        block = transverse_block(M, plane)
        try:
            tag = classify_block(block)
        except BoundaryError as exc:
            # left unresolved; normal_form_case re-raises on request
            extras["case_boundary_gap"] = exc.gap
    order = np.lexsort((np.round(w.imag, 12), np.round(w.real, 12)))
    return FloquetData(M, w[order], nu, label, is_elliptic, is_hyperbolic, defect, block, tag, extras)


def normal_form_case(data: FloquetData) -> CaseTag:
    """Case tag of an Sp(4) monodromy's transverse block."""
    if data.monodromy.shape[0] != 4:
        raise UnsupportedError("normal-form cases are implemented for Sp(4) only")
    if data.case_tag is None:
        if data.transverse_block is not None:
            return classify_block(data.transverse_block)
        raise CaseError("Floquet data carries no transverse block")
    return data.case_tag


@dataclass(frozen=True)
class RotationAngle:
    theta: float
    approx: Fraction
    error: float

    @property
    def ratio(self) -> float:
        return self.theta / np.pi


def rotation_angle(data: FloquetData | CaseTag) -> RotationAngle:
    """Case 2 rotation angle with the best ``p/q`` (``q <= 64``) approximation of theta/pi."""
    tag = data if isinstance(data, CaseTag) else normal_form_case(data)
    if tag.name != "Case2":
        raise CaseError(f"rotation angle is defined for Case2 only, got {tag.label()}")
    ratio = tag.theta / np.pi
    approx = Fraction(ratio).limit_denominator(MAX_DENOMINATOR)
    return RotationAngle(tag.theta, approx, abs(ratio - float(approx)))
