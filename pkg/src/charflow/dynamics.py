"""Characteristic flow and its linearisation.

Integrates ``x' = J grad F(x)`` (``F = j^2/2``) with an adaptive
Dormand-Prince 8(5,3) scheme and radial reprojection onto the surface after
every accepted step.  The fundamental solution of ``z' = J F''(x(t)) z`` is
integrated in the same augmented system so that path samples line up with
orbit samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import DOP853

from . import _kernels
from .errors import IntegrationError, NumericInstabilityError, PreconditionError
from .surface import ON_SURFACE_TOL, SurfaceModel, symplectic_j

DEFAULT_RTOL = 1e-11
DEFAULT_ATOL = 1e-11
MIN_SAMPLES = 64
SYMPLECTIC_TOL = 1e-7

# Butcher tableau borrowed from scipy's DOP853 (class attributes, public).
_A = np.ascontiguousarray(DOP853.A, dtype=float)
_B = np.ascontiguousarray(DOP853.B, dtype=float)
_E3 = np.ascontiguousarray(DOP853.E3, dtype=float)
_E5 = np.ascontiguousarray(DOP853.E5, dtype=float)
_STAGES = DOP853.n_stages


@dataclass
class FlowResult:
    times: np.ndarray
    points: np.ndarray
    energy_drift: float
    matrices: np.ndarray | None = None
    alpha: float | None = None

    @property
    def end_point(self) -> np.ndarray:
        return self.points[-1]

    @property
    def samples(self) -> list[tuple[float, np.ndarray]]:
        return list(zip(self.times.tolist(), self.points))


@dataclass
class SymplecticPath:
    """Sampled path ``t -> gamma(t)`` in Sp(2n) starting at the identity.

    ``kind == "characteristic"`` marks fundamental solutions of the ``F``-flow
    along a closed characteristic; their monodromy carries an identity block on
    the plane spanned by the orbit point and the flow vector, which shifts the
    nullity by one relative to the usual convention.
    """

    times: np.ndarray
    matrices: np.ndarray
    kind: str = "generic"
    forced_plane: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.matrices.shape[1]

    @property
    def n(self) -> int:
        return self.dim // 2

    @property
    def end(self) -> np.ndarray:
        return self.matrices[-1]

    def symplectic_defect(self) -> float:
        J = symplectic_j(self.n)
        d = np.einsum("kji,jl,klm->kim", self.matrices, J, self.matrices) - J
        return float(np.max(np.abs(d)))


def _vector_field(surface: SurfaceModel, alpha: float | None):
    """Return ``rhs(x) -> (J grad H, Hessian H)`` for H = F or H = j^alpha."""
    J = symplectic_j(surface.dim_n)

    if alpha is None:
        def rhs(x):
            return J @ surface._grad_F(x), surface._hess_F(x)
    else:
        def rhs(x):
            j = surface._j(x)
            g = surface._grad_j(x)
            grad = alpha * j ** (alpha - 1) * g
            hess = (alpha * (alpha - 1) * j ** (alpha - 2) * np.outer(g, g)
                    + alpha * j ** (alpha - 1) * surface._hess_j(x))
            return J @ grad, hess
    return rhs, J


def _integrate(surface, y0, times, variational, alpha, rtol, atol, max_steps=2_000_000):
    params = surface._kernel_params()
    if params is not None:
        kind, w, a, eps = params
        out, drift, status = _kernels.integrate(
            np.asarray(y0, dtype=float), np.asarray(times, dtype=float), bool(variational),
            int(kind), w, a, float(eps), -1.0 if alpha is None else float(alpha),
            float(rtol), float(atol), _A, _B, _E3, _E5, _STAGES, max_steps)
        if status == _kernels.STATUS_MAX_STEPS:
            raise IntegrationError("maximum number of steps exceeded")
        if status == _kernels.STATUS_UNDERFLOW:
            raise IntegrationError("step size underflow")
        return out, float(drift)
    return _integrate_python(surface, y0, times, variational, alpha, rtol, atol, max_steps)


def _integrate_python(surface, y0, times, variational, alpha, rtol, atol, max_steps):
    rhs, J = _vector_field(surface, alpha)
    dim = surface.dim

    if variational:
        def fun(s):
            v, h = rhs(s[:dim])
            phi = s[dim:].reshape(dim, dim)
            return np.concatenate([v, (J @ h @ phi).ravel()])
        state = np.concatenate([y0, np.eye(dim).ravel()])
    else:
        def fun(s):
            return rhs(s)[0]
        state = np.array(y0, dtype=float)

    out = np.empty((len(times), state.size))
    out[0] = state
    drift = 0.0
    t = float(times[0])
    f = fun(state)
    span = float(times[-1] - times[0])
    direction = 1.0 if span >= 0 else -1.0
    speed = max(np.linalg.norm(f[:dim]), 1e-12)
    h = direction * min(abs(span) if span else 1.0, 0.05 * np.linalg.norm(y0) / speed)
    K = np.empty((_STAGES + 1, state.size))
    steps = 0

    for k in range(1, len(times)):
        target = float(times[k])
        while direction * (target - t) > 0:
            if steps > max_steps:
                raise IntegrationError("maximum number of steps exceeded")
            clipped = direction * (t + h - target) >= 0
            step = target - t if clipped else h
            if abs(step) < 1e-14 * max(1.0, abs(t)) and not clipped:
                raise IntegrationError(f"step size underflow at t={t}")
            K[0] = f
            for s in range(1, _STAGES):
                K[s] = fun(state + step * (_A[s, :s] @ K[:s]))
            new = state + step * (_B @ K[:_STAGES])
            K[_STAGES] = fun(new)
            scale = atol + np.maximum(np.abs(state), np.abs(new)) * rtol
            err5 = (K.T @ _E5) / scale
            err3 = (K.T @ _E3) / scale
            e5 = float(err5 @ err5)
            e3 = float(err3 @ err3)
            err = 0.0 if e5 == 0 and e3 == 0 else abs(step) * e5 / np.sqrt((e5 + 0.01 * e3) * scale.size)
            steps += 1
            fac = 10.0 if err == 0 else 0.9 * err ** (-1 / 8)
            if err <= 1.0:
                t = target if clipped else t + step
                jn = surface._j(new[:dim])
                drift = max(drift, abs(jn - 1.0))
                new[:dim] /= jn
                state = new
                f = fun(state)
                if not clipped:
                    h = step * min(10.0, fac)
            else:
                h = step * max(0.2, fac)
        out[k] = state
    return out, drift


def default_sample_count(surface: SurfaceModel, y0, t_end: float) -> int:
    """Samples over ``[0, t_end]`` so path eigen-angles move < ~0.25 rad per step."""
    lam = float(np.max(np.abs(np.linalg.eigvalsh(surface.gauge_hess(y0)))))
    return int(max(MIN_SAMPLES, np.ceil(abs(t_end) * 2.0 * lam / 0.25))) + 1


def flow(
    surface: SurfaceModel,
    y0,
    t_end: float,
    tol: float = DEFAULT_RTOL,
    n_samples: int | None = None,
    variational: bool = False,
    alpha: float | None = None,
) -> FlowResult:
    """Integrate the characteristic flow from ``y0`` over ``[0, t_end]``.

    ``alpha`` switches the Hamiltonian from ``j^2/2`` to ``j^alpha``.
    With ``variational=True`` the fundamental matrices are stored as well.
    """
    y0 = np.asarray(y0, dtype=float)
    if abs(surface.gauge(y0) - 1.0) > 1e3 * ON_SURFACE_TOL:
        raise PreconditionError("initial point is not on the surface")
    if n_samples is None:
        n_samples = default_sample_count(surface, y0, t_end)
    if t_end == 0:
        mats = np.eye(surface.dim)[None].repeat(2, 0) if variational else None
        return FlowResult(np.zeros(2), np.array([y0, y0]), 0.0, mats, alpha)
    times = np.linspace(0.0, float(t_end), max(2, n_samples))
    out, drift = _integrate(surface, y0, times, variational, alpha, tol, DEFAULT_ATOL)
    dim = surface.dim
    mats = out[:, dim:].reshape(-1, dim, dim) if variational else None
    return FlowResult(times, out[:, :dim].copy(), drift, mats, alpha)


def linearized_path(surface: SurfaceModel, orbit: FlowResult, tol: float = DEFAULT_RTOL,
                    kind: str = "characteristic") -> SymplecticPath:
    """Fundamental solution of the linearised flow along ``orbit``'s samples."""
    if orbit.matrices is None:
        y0 = orbit.points[0]
        out, _ = _integrate(surface, y0, orbit.times, True, orbit.alpha, tol, DEFAULT_ATOL)
        dim = surface.dim
        mats = out[:, dim:].reshape(-1, dim, dim)
    else:
        mats = orbit.matrices
    y0 = orbit.points[0]
    J = symplectic_j(surface.dim_n)
    v0 = J @ surface.hamiltonian_grad(y0)
    path = SymplecticPath(orbit.times.copy(), mats, kind, np.column_stack([y0, v0]))
    defect = path.symplectic_defect()
    if defect > SYMPLECTIC_TOL * max(1.0, float(np.max(np.abs(mats)))):
        raise NumericInstabilityError(f"symplecticity defect {defect:.3g}")
    return path
