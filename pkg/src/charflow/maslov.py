"""Maslov-type index of symplectic paths, iterates and mean indices.

The index ``i_1`` of a path ``gamma: [0, T] -> Sp(2n)`` is computed from the
Lagrangian graph ``{(Cx, gamma x)}`` in the doubled space, with
``C = diag(I, -I)``.  Each Lagrangian frame ``Z`` is encoded as the unitary
symmetric matrix ``G = A (A^* A)^{-1} A^T`` with ``A = X + iY``; the winding of
``det G`` along the path, corrected by the endpoint position relative to the
diagonal, counts the crossings with eigenvalue 1.  A degenerate endpoint is
resolved by appending the short arc ``gamma(T) exp(-sJ)``, ``0 < s <= eps``.

Iterates never form ``gamma(tau)^m`` explicitly: graph frames of
``gamma(t) M^j`` are propagated as orthonormal pairs ``(X, Y)`` with
``Y = M^j X`` and re-orthonormalised every period.

The mean index is evaluated exactly as the total rotation of the normalised
rotation function ``rho`` along one period (eigenvalues on the unit circle
weighted by their Krein-positive multiplicity).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .dynamics import SymplecticPath
from .errors import BoundaryError, CaseError, NumericInstabilityError, PreconditionError
from .surface import symplectic_j

DEFAULT_EPS = 1e-5
INTEGER_TOL = 1e-6
KERNEL_TOL = 1e-6
MAX_STEP_ANGLE = 1.5
DEFAULT_M_MAX = 20
REGRESSION_M_MAX = 200


@dataclass
class IndexRecord:
    """Indices of a closed characteristic and its iterates.

    ``iterates`` rows are ``(m, i(y, m), nu(y, m), i(y^m))``.
    """

    i_maslov_1: int
    nu_1: int
    i_viterbo_1: int
    iterates: list[tuple[int, int, int, int]]
    mean_index: float
    n: int
    regression_slope: float | None = None
    regression_stderr: float | None = None
    extras: dict = field(default_factory=dict)

    def viterbo(self, m: int) -> int:
        return self.iterates[m - 1][3]

    def maslov(self, m: int) -> int:
        return self.iterates[m - 1][1]

    def nullity(self, m: int) -> int:
        return self.iterates[m - 1][2]

    def to_dict(self) -> dict:
        return {
            "i_maslov_1": self.i_maslov_1,
            "nu_1": self.nu_1,
            "i_viterbo_1": self.i_viterbo_1,
            "iterates": [list(r) for r in self.iterates],
            "mean_index": self.mean_index,
            "n": self.n,
            "regression_slope": self.regression_slope,
            "regression_stderr": self.regression_stderr,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IndexRecord":
        return cls(
            i_maslov_1=int(d["i_maslov_1"]),
            nu_1=int(d["nu_1"]),
            i_viterbo_1=int(d["i_viterbo_1"]),
            iterates=[tuple(int(v) for v in r) for r in d["iterates"]],
            mean_index=float(d["mean_index"]),
            n=int(d["n"]),
            regression_slope=d.get("regression_slope"),
            regression_stderr=d.get("regression_stderr"),
        )


# -- Lagrangian Grassmannian helpers ------------------------------------------

def _qp_rows(n: int) -> tuple[np.ndarray, np.ndarray]:
    d = 2 * n
    q = np.r_[0:n, d:d + n]
    p = np.r_[n:d, d + n:2 * d]
    return q, p


def _frames_to_g(frames: np.ndarray, n: int) -> np.ndarray:
    """Map a stack of 4n x 2n Lagrangian frames to unitary symmetric matrices."""
    q, p = _qp_rows(n)
    A = frames[:, q, :] + 1j * frames[:, p, :]
    S = np.einsum("kji,kjl->kil", A.conj(), A).real
    return A @ np.linalg.solve(S, np.transpose(A, (0, 2, 1)))


def _graph_frames(mats: np.ndarray, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Frames ``[C X; gamma_k Y]`` of graph(gamma_k M^j) given ``Y = M^j X``."""
    n = X.shape[0] // 2
    C = np.diag(np.r_[np.ones(n), -np.ones(n)])
    top = np.broadcast_to(C @ X, mats.shape)
    return np.concatenate([top, mats @ Y], axis=1)


def _winding(G: np.ndarray) -> float:
    inc = np.angle(np.linalg.eigvals(np.einsum("kij,kjl->kil", G[:-1].conj(), G[1:])))
    if inc.size and np.max(np.abs(inc)) > MAX_STEP_ANGLE:
        raise NumericInstabilityError("path sampling too coarse for index winding")
    return float(inc.sum())


def _orthonormal_pair(X: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d = X.shape[0]
    Q, _ = np.linalg.qr(np.vstack([X, Y]))
    return Q[:d], Q[d:]


def _end_fraction(G_end: np.ndarray, G0: np.ndarray) -> float:
    th = np.mod(np.angle(np.linalg.eigvals(G_end @ G0.conj())), 2.0 * np.pi)
    return float(th.sum() / (2.0 * np.pi))


class _IndexEngine:
    """Shared state for computing ``i_1`` over a path and its iterates."""

    def __init__(self, path: SymplecticPath):
        mats = np.asarray(path.matrices, dtype=float)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2] or mats.shape[1] % 2:
            raise PreconditionError("path matrices must be a stack of 2n x 2n arrays")
        if np.max(np.abs(mats[0] - np.eye(mats.shape[1]))) > 1e-8:
            raise PreconditionError("symplectic path must start at the identity")
        self.mats = mats
        self.n = mats.shape[1] // 2
        self.J = symplectic_j(self.n)
        eye = np.eye(2 * self.n)
        self.G0 = _frames_to_g(_graph_frames(eye[None], eye, eye), self.n)[0]

    def segment_windings(self, m: int) -> tuple[list[float], list[tuple[np.ndarray, np.ndarray]]]:
        """Winding over each of the first ``m`` periods and the frame pair at each period end."""
        d = 2 * self.n
        M = self.mats[-1]
        X, Y = np.eye(d), np.eye(d)
        X, Y = _orthonormal_pair(X, Y)
        winds, ends = [], []
        for _ in range(m):
            G = _frames_to_g(_graph_frames(self.mats, X, Y), self.n)
            winds.append(_winding(G))
            X, Y = _orthonormal_pair(X, M @ Y)
            ends.append((X, Y))
        return winds, ends

    def end_correction(self, X: np.ndarray, Y: np.ndarray, eps: float) -> tuple[float, float]:
        """Winding along the perturbation arc and the final fraction for endpoint ``(X, Y)``."""
        s = np.linspace(0.0, eps, 5)
        # graph(P exp(-sJ)) is spanned by [C exp(sJ) X; P X] where Y = P X
        n = self.n
        C = np.diag(np.r_[np.ones(n), -np.ones(n)])
        frames = np.array([np.vstack([C @ expm(si * self.J) @ X, Y]) for si in s])
        G = _frames_to_g(frames, n)
        return _winding(G), _end_fraction(G[-1], self.G0)


def _kernel_dim(X: np.ndarray, Y: np.ndarray, tol: float = KERNEL_TOL) -> int:
    """dim ker(P - I) for the endpoint ``P`` encoded by ``Y = P X``."""
    sv = np.linalg.svd(Y - X, compute_uv=False)
    scale = max(1.0, float(np.linalg.norm(Y, 2)))
    return int(np.sum(sv < tol * scale))


def _resolve(engine: _IndexEngine, wind: float, X: np.ndarray, Y: np.ndarray,
             eps: float) -> int:
    values = []
    e = eps
    for _ in range(4):
        arc, frac = engine.end_correction(X, Y, e)
        raw = engine.n + (wind + arc) / (2.0 * np.pi) - frac
        values.append(raw)
        k = round(raw)
        if abs(raw - k) < INTEGER_TOL:
            return int(k)
        e /= 2.0
    gap = min(abs(v - round(v)) for v in values)
    raise BoundaryError("endpoint degeneracy could not be resolved", gap)


def _nullity_offset(path: SymplecticPath) -> int:
    return 1 if path.kind == "characteristic" else 0


def maslov_index(path: SymplecticPath, eps: float = DEFAULT_EPS) -> tuple[int, int]:
    """Index ``i_1`` and nullity of a symplectic path starting at the identity.

    For paths of kind ``"characteristic"`` the nullity excludes the extra
    direction carried by the monodromy's identity block on the orbit plane.
    """
    engine = _IndexEngine(path)
    winds, ends = engine.segment_windings(1)
    X, Y = ends[0]
    idx = _resolve(engine, winds[0], X, Y, eps)
    return idx, _kernel_dim(X, Y) - _nullity_offset(path)


def iterate_indices(path: SymplecticPath, m_max: int,
                    eps: float = DEFAULT_EPS) -> list[tuple[int, int]]:
    """``(i(y, m), nu(y, m))`` for ``m = 1..m_max`` via ``gamma(t + tau) = gamma(t) gamma(tau)``."""
    engine = _IndexEngine(path)
    winds, ends = engine.segment_windings(m_max)
    offset = _nullity_offset(path)
    out = []
    total = 0.0
    for w, (X, Y) in zip(winds, ends):
        total += w
        out.append((_resolve(engine, total, X, Y, eps), _kernel_dim(X, Y) - offset))
    return out


# -- mean index ----------------------------------------------------------------

def _rotation_function(M: np.ndarray, J: np.ndarray, near: float = 1e-6,
                       cluster: float = 1e-6) -> complex:
    """Normalised rotation function of a symplectic matrix.

    Unit-circle eigenvalues away from +-1 contribute ``lam**m_plus`` with
    ``m_plus`` the Krein-positive multiplicity; negative real eigenvalues
    contribute a sign per pair; everything else contributes 1.
    """
    d = M.shape[0]
    w = np.linalg.eigvals(M)
    used = np.zeros(d, dtype=bool)
    value = 1.0 + 0.0j
    negatives = 0
    for i in range(d):
        if used[i]:
            continue
        lam = w[i]
        if abs(lam - 1.0) < near:
            used[i] = True
            continue
        if abs(lam + 1.0) < near or (abs(lam.imag) < 1e-9 * max(1.0, abs(lam)) and lam.real < 0):
            used[i] = True
            negatives += 1
            continue
        if abs(abs(lam) - 1.0) > 1e-7:
            used[i] = True
            continue
        members = [k for k in range(d) if not used[k] and abs(w[k] - lam) < cluster]
        used[members] = True
        k = len(members)
        centre = w[members].mean()
        _, _, vh = np.linalg.svd(np.linalg.matrix_power(M - centre * np.eye(d), k))
        Z = vh[-k:].conj().T
        H = -1j * Z.conj().T @ J @ Z
        m_plus = int(np.sum(np.linalg.eigvalsh((H + H.conj().T) / 2.0) > 0))
        value *= (lam / abs(lam)) ** m_plus
    return value * (-1.0) ** (negatives // 2)


def mean_index(path: SymplecticPath) -> float:
    """Exact mean index: total rotation of ``rho(gamma(t))`` over the path, divided by pi."""
    J = symplectic_j(path.n)
    r = np.array([_rotation_function(M, J) for M in path.matrices])
    inc = np.angle(r[1:] / r[:-1])
    if inc.size and np.max(np.abs(inc)) > MAX_STEP_ANGLE:
        raise NumericInstabilityError("path sampling too coarse for mean index")
    return float(inc.sum() / np.pi)


def _regression(ms: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    A = np.column_stack([ms, np.ones_like(ms)])
    coef, *_ = np.linalg.lstsq(A, values, rcond=None)
    resid = values - A @ coef
    dof = max(1, len(ms) - 2)
    s2 = float(resid @ resid) / dof
    var = s2 / float(np.sum((ms - ms.mean()) ** 2))
    return float(coef[0]), math.sqrt(var)


def index_sequence(path: SymplecticPath, m_max: int = DEFAULT_M_MAX,
                   eps: float = DEFAULT_EPS, regression_m_max: int | None = None) -> IndexRecord:
    """Indices of iterates ``m = 1..m_max`` and the mean index of a prime path.

    ``regression_m_max`` additionally fits the slope of ``i(y^m)`` over
    ``[m/2, m]`` as a diagnostic next to the exact mean index.
    """
    if m_max < 2:
        raise PreconditionError("m_max must be at least 2")
    n = path.n
    m_total = max(m_max, regression_m_max or 0)
    pairs = iterate_indices(path, m_total, eps)
    rows = [(m, i, nu, i - n) for m, (i, nu) in enumerate(pairs, start=1)]
    slope = stderr = None
    if regression_m_max:
        lo = max(1, regression_m_max // 2)
        ms = np.arange(lo, regression_m_max + 1, dtype=float)
        vals = np.array([rows[int(m) - 1][3] for m in ms], dtype=float)
        slope, stderr = _regression(ms, vals)
    i1, nu1 = pairs[0]
    return IndexRecord(
        i_maslov_1=i1,
        nu_1=nu1,
        i_viterbo_1=i1 - n,
        iterates=rows[:m_max],
        mean_index=mean_index(path),
        n=n,
        regression_slope=slope,
        regression_stderr=stderr,
    )


# -- Sp(4) iteration formulas ----------------------------------------------------

def ceil_e(a: float) -> int:
    """``E(a) = min{k in Z : k >= a}``, robust to rounding just above an integer."""
    k = round(a)
    if abs(a - k) < 1e-9:
        return int(k)
    return math.ceil(a)


def _case_parts(case_tag) -> tuple[str, object]:
    if isinstance(case_tag, str):
        return case_tag, None
    name, param = case_tag
    return name, param


def iterate_index_formula(case_tag, i1: int, theta: float | None, m: int) -> int:
    """Closed-form Viterbo index ``i(y^m)`` of an Sp(4) orbit in a basic-form case.

    ``case_tag`` is ``"Hyperbolic"``, ``"Case4"``, ``("Case1", b)``,
    ``("Case3", b)`` or ``"Case2"`` (``theta`` required).  ``i1`` is the
    Viterbo index ``i(y)``.
    """
    name, param = _case_parts(case_tag)
    if m < 1:
        raise PreconditionError("iterate count must be positive")
    if name == "Case1":
        if param == 1:
            return m * (i1 + 3) - 3
        if param in (0, -1):
            return m * (i1 + 3) - 3 - (1 + (-1) ** m) // 2
        raise CaseError(f"Case1 needs b in {{-1, 0, 1}}, got {param!r}")
    if name == "Case2":
        if theta is None:
            raise PreconditionError("Case2 requires the rotation angle theta")
        return m * (i1 + 2) + 2 * ceil_e(m * theta / (2.0 * np.pi)) - 4
    if name == "Case3":
        return m * (i1 + 4) - 4
    if name in ("Case4", "Hyperbolic"):
        return m * (i1 + 3) - 3
    raise CaseError(f"no iteration formula for case {case_tag!r}")


def mean_index_formula(case_tag, i1: int, theta: float | None = None) -> float:
    """Closed-form mean index for the same cases as :func:`iterate_index_formula`."""
    name, _ = _case_parts(case_tag)
    if name == "Case2":
        if theta is None:
            raise PreconditionError("Case2 requires the rotation angle theta")
        return i1 + 2 + theta / np.pi
    if name == "Case3":
        return float(i1 + 4)
    if name in ("Case1", "Case4", "Hyperbolic"):
        return float(i1 + 3)
    raise CaseError(f"no mean-index formula for case {case_tag!r}")
