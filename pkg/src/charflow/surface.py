"""Star-shaped hypersurfaces described by gauge functions.

A hypersurface is stored through its gauge ``j``, the positively 1-homogeneous
function with ``Sigma = j^{-1}(1)``.  Every dynamical computation in the package
uses the quadratic-growth Hamiltonian ``F = j**2 / 2``; on ``Sigma`` its
gradient equals ``grad j``, which is the normal normalised by ``N(y) . y = 1``.

Phase-space coordinates are ordered ``(q_1..q_n, p_1..p_n)`` so the k-th
conjugate pair is ``(x[k], x[n + k])`` and ``J = [[0, -I], [I, 0]]``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize
from scipy.stats import norm, qmc

from .errors import ConfigError, DomainError, PreconditionError, StarShapednessError

ON_SURFACE_TOL = 1e-9
METRIC_MIN_BUDGET = 256
DEFAULT_METRIC_BUDGET = 10_000


def symplectic_j(n: int) -> np.ndarray:
    """Standard symplectic matrix ``[[0, -I], [I, 0]]`` of size 2n."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, -eye], [eye, zero]])


class SurfaceModel:
    """Base class for gauge-defined star-shaped hypersurfaces in R^{2n}.

    Subclasses implement ``_j``, ``_grad_j`` and ``_hess_j`` for nonzero points.
    """

    dim_n: int

    # -- gauge and derivatives -------------------------------------------
    def _j(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def _grad_j(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _hess_j(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError

    def _kernel_params(self):
        """``(kind, w, a, eps)`` for the compiled integrator, or None."""
        return None

    @property
    def dim(self) -> int:
        return 2 * self.dim_n

    def _check_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise PreconditionError(f"expected a point of R^{self.dim}, got shape {x.shape}")
        return x

    def gauge(self, x) -> float:
        x = self._check_point(x)
        if not np.any(x):
            return 0.0
        return float(self._j(x))

    def gauge_grad(self, x) -> np.ndarray:
        x = self._check_point(x)
        if not np.any(x):
            raise DomainError("gauge gradient is undefined at the origin")
        return self._grad_j(x)

    # unchecked derivatives of F = j^2/2, used in integrator inner loops
    def _grad_F(self, x: np.ndarray) -> np.ndarray:
        return self._j(x) * self._grad_j(x)

    def _hess_F(self, x: np.ndarray) -> np.ndarray:
        g = self._grad_j(x)
        h = np.outer(g, g) + self._j(x) * self._hess_j(x)
        return 0.5 * (h + h.T)

    def hamiltonian_grad(self, x) -> np.ndarray:
        """Gradient of ``F = j^2/2``."""
        x = self._check_point(x)
        if not np.any(x):
            return np.zeros(self.dim)
        return self._grad_F(x)

    def gauge_hess(self, x) -> np.ndarray:
        """Hessian of ``F = j^2/2`` (not of ``j``)."""
        x = self._check_point(x)
        if not np.any(x):
            raise DomainError("Hessian is undefined at the origin")
        return self._hess_F(x)

    def hess_j(self, x) -> np.ndarray:
        x = self._check_point(x)
        if not np.any(x):
            raise DomainError("Hessian is undefined at the origin")
        return self._hess_j(x)

    def project(self, x) -> np.ndarray:
        """Radial projection ``x / j(x)`` onto the hypersurface."""
        x = self._check_point(x)
        return x / self._j(x)

    def config_hash(self) -> str:
        return surface_hash(self.to_config())


@dataclass(frozen=True)
class Ellipsoid(SurfaceModel):
    """Ellipsoid ``sum_k (q_k^2 + p_k^2) / r_k^2 = 1``; equal axes give a round sphere."""

    axes: tuple[float, ...]
    dim_n: int = field(init=False)

    def __post_init__(self):
        axes = tuple(float(a) for a in self.axes)
        if not axes or any(not np.isfinite(a) or a <= 0 for a in axes):
            raise ConfigError(f"ellipsoid axes must be positive, got {self.axes}")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "dim_n", len(axes))
        w = 1.0 / np.asarray(axes) ** 2
        object.__setattr__(self, "_weights", np.concatenate([w, w]))
        object.__setattr__(self, "_hess", np.diag(self._weights))

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    def _j(self, x):
        return float(np.sqrt(np.dot(self.weights * x, x)))

    def _grad_j(self, x):
        return self.weights * x / self._j(x)

    def _hess_j(self, x):
        j = self._j(x)
        wx = self.weights * x
        return np.diag(self.weights) / j - np.outer(wx, wx) / j**3

    def _grad_F(self, x):
        return self._weights * x

    def _kernel_params(self):
        return 0, self._weights, np.zeros(self.dim), 0.0

    def _hess_F(self, x):
        return self._hess

    @property
    def is_sphere(self) -> bool:
        return len(set(self.axes)) == 1

    def to_config(self) -> dict:
        return {"n": self.dim_n, "kind": "ellipsoid", "axes": list(self.axes)}


def _quartic_extrema(coeffs: np.ndarray) -> tuple[float, float]:
    """Min and max of ``sum a_i u_i^4`` over the unit sphere."""
    a = np.asarray(coeffs, dtype=float)

    def _min(a):
        if a.min() < 0:
            return float(a.min())
        if np.any(a == 0):
            return 0.0
        return float(1.0 / np.sum(1.0 / a))

    return _min(a), -_min(-a)


@dataclass(frozen=True)
class PerturbedGauge(SurfaceModel):
    """Ellipsoid gauge multiplied by ``1 + epsilon * p(x/|x|)``.

    ``p(u) = sum_i coeffs[i] * u_i**4`` is even and homogeneous of degree zero
    in ``x``; the quartic terms can bend the ellipsoid into a non-convex shape
    while keeping every coordinate plane invariant under the flow.
    """

    axes: tuple[float, ...]
    epsilon: float
    coeffs: tuple[float, ...]
    dim_n: int = field(init=False)

    def __post_init__(self):
        base = Ellipsoid(self.axes)
        coeffs = tuple(float(c) for c in self.coeffs)
        if len(coeffs) != 2 * base.dim_n:
            raise ConfigError(
                f"perturbation needs {2 * base.dim_n} coefficients, got {len(coeffs)}"
            )
        object.__setattr__(self, "axes", base.axes)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "dim_n", base.dim_n)
        object.__setattr__(self, "_base", base)
        object.__setattr__(self, "_coeffs", np.asarray(coeffs))
        lo, hi = _quartic_extrema(np.asarray(coeffs))
        smin = min(1 + self.epsilon * lo, 1 + self.epsilon * hi)
        if smin <= 0:
            raise StarShapednessError(
                f"epsilon={self.epsilon} makes the gauge non-positive (min factor {smin:.3g})"
            )

    @property
    def base(self) -> Ellipsoid:
        return self._base

    @staticmethod
    def epsilon_limit(coeffs: Sequence[float]) -> float:
        """Largest positive epsilon for which the gauge stays positive."""
        lo, _ = _quartic_extrema(np.asarray(coeffs, dtype=float))
        return np.inf if lo >= 0 else -1.0 / lo

    def _factor(self, x, order: int = 0):
        """``s = 1 + eps * p(x / |x|)`` and, up to ``order``, its derivatives."""
        a = self._coeffs
        r2 = float(np.dot(x, x))
        x3 = x**3
        q = float(np.dot(a, x3 * x))
        s = 1.0 + self.epsilon * q / r2**2
        if order == 0:
            return s, None, None
        dq = 4 * a * x3
        ds = self.epsilon * (dq / r2**2 - 4 * q * x / r2**3)
        if order == 1:
            return s, ds, None
        d2s = self.epsilon * (
            np.diag(12 * a * x**2) / r2**2
            - 4 * (np.outer(dq, x) + np.outer(x, dq)) / r2**3
            - 4 * q * np.eye(len(x)) / r2**3
            + 24 * q * np.outer(x, x) / r2**4
        )
        return s, ds, d2s

    def _kernel_params(self):
        return 1, self._base.weights, self._coeffs, self.epsilon

    def _j(self, x):
        s, _, _ = self._factor(x)
        return self._base._j(x) * s

    def _grad_j(self, x):
        b = self._base
        s, ds, _ = self._factor(x, 1)
        return s * b._grad_j(x) + b._j(x) * ds

    def _grad_F(self, x):
        b = self._base
        s, ds, _ = self._factor(x, 1)
        j0 = b._j(x)
        return j0 * s * (s * b._grad_j(x) + j0 * ds)

    def _hess_j(self, x):
        b = self._base
        s, ds, d2s = self._factor(x, 2)
        g0 = b._grad_j(x)
        h = s * b._hess_j(x) + np.outer(g0, ds) + np.outer(ds, g0) + b._j(x) * d2s
        return 0.5 * (h + h.T)

    def to_config(self) -> dict:
        return {
            "n": self.dim_n,
            "kind": "perturbed",
            "axes": list(self.axes),
            "perturbation": {"epsilon": self.epsilon, "coeffs": list(self.coeffs)},
        }


@dataclass(frozen=True)
class SurfaceMetrics:
    inner_radius_r: float
    outer_radius_R: float
    support_dist_d: float

    @property
    def pinched(self) -> bool:
        """Pinching predicate ``R^2 < 2 d^2``."""
        return self.outer_radius_R**2 < 2 * self.support_dist_d**2

    def to_dict(self) -> dict:
        return {"r": self.inner_radius_r, "R": self.outer_radius_R, "d": self.support_dist_d}


# -- module-level operations --------------------------------------------------


def gauge(surface: SurfaceModel, x) -> float:
    return surface.gauge(x)


def gauge_grad(surface: SurfaceModel, x) -> np.ndarray:
    return surface.gauge_grad(x)


def gauge_hess(surface: SurfaceModel, x) -> np.ndarray:
    return surface.gauge_hess(x)


def normal_and_support(surface: SurfaceModel, y, tol: float = 1e-7) -> tuple[np.ndarray, float]:
    """Unit outward normal ``n(y)`` and support distance ``d(y) = n(y) . y``."""
    y = surface._check_point(y)
    jy = surface.gauge(y)
    if abs(jy - 1.0) > tol:
        raise PreconditionError(f"point is not on the surface: |j(y) - 1| = {abs(jy - 1):.3g}")
    g = surface.gauge_grad(y)
    nvec = g / np.linalg.norm(g)
    d = float(nvec @ y)
    if d <= 0:
        raise StarShapednessError(f"support distance {d} <= 0", witness=y)
    return nvec, d


def sphere_points(dim: int, count: int, seed: int = 0) -> np.ndarray:
    """Deterministic low-discrepancy points on the unit sphere of R^dim."""
    m = max(1, int(np.ceil(np.log2(count))))
    sampler = qmc.Sobol(d=dim, scramble=True, seed=seed)
    u = sampler.random_base2(m)[:count]
    g = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _radius(surface, v):
    return 1.0 / surface.gauge(v / np.linalg.norm(v))


def _support(surface, v):
    u = v / np.linalg.norm(v)
    y = u / surface.gauge(u)
    return 1.0 / np.linalg.norm(surface.gauge_grad(y))


def metrics(
    surface: SurfaceModel, budget: int = DEFAULT_METRIC_BUDGET, seed: int = 0
) -> SurfaceMetrics:
    """Inner radius r, outer radius R and minimal support distance d.

    Ellipsoids use closed forms.  Other surfaces are sampled on ``budget``
    low-discrepancy directions and the best candidates refined by local
    optimisation over the sphere.
    """
    if isinstance(surface, Ellipsoid):
        a = surface.axes
        return SurfaceMetrics(min(a), max(a), min(a))
    if budget < METRIC_MIN_BUDGET:
        raise PreconditionError(f"sampling budget must be >= {METRIC_MIN_BUDGET}")

    pts = sphere_points(surface.dim, budget, seed)
    radii = np.array([1.0 / surface.gauge(u) for u in pts])
    supports = np.empty(len(pts))
    for k, u in enumerate(pts):
        y = u * radii[k]
        g = surface.gauge_grad(y)
        supports[k] = (g @ y) / np.linalg.norm(g)
        if supports[k] <= 0:
            raise StarShapednessError("non-positive support distance", witness=y)

    def refine(fun, values, sign):
        best = sign * np.min(sign * values)
        for idx in np.argsort(sign * values)[:3]:
            res = optimize.minimize(
                lambda v: sign * fun(surface, v), pts[idx], method="Nelder-Mead",
                options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000},
            )
            best = sign * min(sign * best, res.fun)
        return float(best)

    r = refine(_radius, radii, 1.0)
    R = refine(_radius, radii, -1.0)
    d = refine(_support, supports, 1.0)
    if d <= 0:
        raise StarShapednessError("non-positive support distance after refinement")
    return SurfaceMetrics(r, R, min(d, r))


# -- configuration --------------------------------------------------------------


def surface_from_config(cfg: dict) -> SurfaceModel:
    """Build a surface from the JSON configuration document."""
    if not isinstance(cfg, dict):
        raise ConfigError("surface config must be a JSON object")
    try:
        n = int(cfg["n"])
        kind = cfg["kind"]
        axes = cfg["axes"]
    except KeyError as exc:
        raise ConfigError(f"missing key {exc.args[0]!r} in surface config") from None
    if not isinstance(axes, list) or len(axes) != n:
        raise ConfigError(f"key 'axes' must list {n} positive reals")
    if kind == "ellipsoid":
        return Ellipsoid(tuple(axes))
    if kind == "perturbed":
        pert = cfg.get("perturbation")
        if not isinstance(pert, dict) or "epsilon" not in pert or "coeffs" not in pert:
            raise ConfigError("key 'perturbation' needs 'epsilon' and 'coeffs'")
        return PerturbedGauge(tuple(axes), pert["epsilon"], tuple(pert["coeffs"]))
    raise ConfigError(f"unknown surface kind {kind!r}")


def surface_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
