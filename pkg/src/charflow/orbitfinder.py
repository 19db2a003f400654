"""Closed characteristics: analytic ellipsoid orbits, shooting and surveys."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np
from scipy import optimize
from scipy.spatial import cKDTree

from .dynamics import FlowResult, default_sample_count, flow
from .errors import PreconditionError, SectionError, ShootingError
from .surface import (ON_SURFACE_TOL, Ellipsoid, SurfaceModel, metrics,
                      sphere_points, symplectic_j)

CLOSURE_TOL = 1e-9
MAX_NEWTON = 25
MAX_DIVISOR = 12
FAMILY_COUNT = 3
RATIONAL_DENOMINATOR = 1000


@dataclass
class ClosedCharacteristic:
    """A periodic solution of the characteristic flow, with its sampled trajectory."""

    y0: np.ndarray
    period_tau: float
    action_A: float
    samples: FlowResult
    multiplicity_m: int = 1
    prime_id: str = ""
    residual: float = 0.0
    newton_steps: int = 0

    @property
    def prime_period(self) -> float:
        return self.period_tau / self.multiplicity_m

    def to_record(self) -> dict:
        return {
            "prime_id": self.prime_id,
            "y0": [float(v) for v in self.y0],
            "tau": float(self.period_tau),
            "action": float(self.action_A),
            "residual": float(self.residual),
        }


@dataclass
class OrbitSet:
    """Analytic orbit list with a flag for resonant (rational-ratio) axes."""

    orbits: list[ClosedCharacteristic]
    rational_ratio: bool

    def __iter__(self) -> Iterator[ClosedCharacteristic]:
        return iter(self.orbits)

    def __len__(self) -> int:
        return len(self.orbits)

    def __getitem__(self, k):
        return self.orbits[k]


@dataclass
class SurveyResult:
    orbits: list[ClosedCharacteristic]
    seeds_tried: int
    shots: int
    converged: int
    failures: int
    families: list[dict] = field(default_factory=list)
    window: tuple[float, float] = (0.0, 0.0)
    # True only when every prime orbit of the surface is known to be in ``orbits``
    exhaustive: bool = False

    @property
    def family(self) -> bool:
        return bool(self.families)

    def coverage(self) -> dict:
        return {
            "seeds": self.seeds_tried,
            "shots": self.shots,
            "converged": self.converged,
            "failures": self.failures,
            "distinct": len(self.orbits),
            "window": list(self.window),
            "exhaustive": self.exhaustive,
        }


def _name(k: int) -> str:
    return f"y{k + 1}"


def _sampled_velocity(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Velocities from samples: spectral for closed uniformly sampled loops, else finite differences."""
    dt = np.diff(t)
    closed = np.linalg.norm(y[-1] - y[0]) < 1e-8 * max(1.0, float(np.linalg.norm(y[0])))
    if closed and len(t) > 4 and np.allclose(dt, dt[0], rtol=1e-9, atol=0.0):
        k = len(t) - 1
        freq = 2j * np.pi * np.fft.fftfreq(k, d=dt[0])
        if k % 2 == 0:
            freq[k // 2] = 0.0
        v = np.fft.ifft(freq[:, None] * np.fft.fft(y[:-1], axis=0), axis=0).real
        return np.vstack([v, v[:1]])
    return np.gradient(y, t, axis=0, edge_order=2)


def action(orbit: ClosedCharacteristic | FlowResult, surface: SurfaceModel | None = None) -> float:
    """Trapezoid quadrature of ``1/2 int (J y) . y' dt`` over the sampled trajectory.

    Velocities come from the vector field when ``surface`` is given, otherwise
    from central differences of the samples.
    """
    res = orbit.samples if isinstance(orbit, ClosedCharacteristic) else orbit
    t, y = res.times, res.points
    n = y.shape[1] // 2
    J = symplectic_j(n)
    if surface is not None:
        v = np.array([J @ surface.hamiltonian_grad(p) for p in y])
    else:
        v = _sampled_velocity(t, y)
    integrand = np.einsum("ij,ij->i", y @ J.T, v)
    return 0.5 * float(np.trapezoid(integrand, t))


def has_rational_ratio(axes: Sequence[float], max_denominator: int = RATIONAL_DENOMINATOR,
                       tol: float = 1e-12) -> bool:
    a2 = np.asarray(axes, dtype=float) ** 2
    for i in range(len(a2)):
        for k in range(i + 1, len(a2)):
            ratio = a2[k] / a2[i]
            approx = Fraction(ratio).limit_denominator(max_denominator)
            if abs(ratio - float(approx)) < tol * max(1.0, ratio):
                return True
    return False


def _planar_orbit(surface: SurfaceModel, k: int, radius: float, tol: float) -> ClosedCharacteristic:
    y0 = np.zeros(surface.dim)
    y0[k] = radius
    tau = 2.0 * np.pi * radius**2
    res = flow(surface, y0, tau, tol=tol, variational=True)
    resid = float(np.linalg.norm(res.end_point - y0))
    return ClosedCharacteristic(y0, tau, np.pi * radius**2, res, 1, _name(k), resid)


def analytic_ellipsoid_orbits(axes: Sequence[float], tol: float = 1e-11) -> OrbitSet:
    """The n planar circles of an ellipsoid, sorted by action.

    ``rational_ratio`` flags axes with a rational ``r_j^2 / r_k^2``, in which
    case further (non-planar) orbit tori exist and are not enumerated.
    """
    surface = Ellipsoid(tuple(axes))
    order = np.argsort(surface.axes, kind="stable")
    orbits = [_planar_orbit(surface, int(k), surface.axes[k], tol) for k in order]
    for idx, orb in enumerate(orbits):
        orb.prime_id = _name(idx)
    return OrbitSet(orbits, has_rational_ratio(surface.axes))


# -- shooting -------------------------------------------------------------------

def _closure(surface, y, T, tol):
    res = flow(surface, y, T, tol=tol, n_samples=2, variational=True)
    return res.end_point, res.matrices[-1]


def _newton(surface, y, T, tol, max_iter, closure_tol):
    J = symplectic_j(surface.dim_n)
    history = []
    dim = surface.dim
    for _ in range(max_iter):
        end, M = _closure(surface, y, T, tol)
        r = end - y
        err = float(np.linalg.norm(r))
        history.append(err)
        if err < closure_tol:
            return y, T, history
        f_end = J @ surface.hamiltonian_grad(end)
        f0 = J @ surface.hamiltonian_grad(y)
        if np.linalg.norm(f0) < 1e-12:
            raise SectionError("flow vector vanishes at the section point", history)
        A = np.zeros((dim + 2, dim + 1))
        A[:dim, :dim] = M - np.eye(dim)
        A[:dim, dim] = f_end
        A[dim, :dim] = f0 / np.linalg.norm(f0)
        A[dim + 1, :dim] = surface.gauge_grad(y)
        rhs = np.concatenate([-r, [0.0, 0.0]])
        sv = np.linalg.svd(A, compute_uv=False)
        if sv[-1] < 1e-13 * sv[0] and err > 1e3 * closure_tol:
            raise SectionError("shooting Jacobian is singular (flow tangent to the section)", history)
        step, *_ = np.linalg.lstsq(A, rhs, rcond=None)
        dy, dT = step[:dim], step[dim]
        # damp large steps so Newton stays on the surface's scale
        scale = max(np.linalg.norm(dy) / (0.25 * np.linalg.norm(y)), abs(dT) / (0.25 * T), 1.0)
        y = surface.project(y + dy / scale)
        T = T + dT / scale
        if T <= 0:
            raise ShootingError("period became non-positive", history)
    raise ShootingError(f"Newton did not converge in {max_iter} iterations", history)


def shoot(surface: SurfaceModel, seed, period_guess: float, tol: float = 1e-11,
          max_iter: int = MAX_NEWTON, closure_tol: float = CLOSURE_TOL,
          max_divisor: int = MAX_DIVISOR) -> ClosedCharacteristic:
    """Newton shooting for a closed characteristic near ``(seed, period_guess)``.

    Each step solves the closure equations together with the section through
    the current point normal to the flow and the energy constraint.  The
    returned orbit is prime: closure at ``tau / k`` for ``k <= max_divisor``
    replaces the period by the smallest closing one.
    """
    seed = np.asarray(seed, dtype=float)
    if abs(surface.gauge(seed) - 1.0) > 1e3 * ON_SURFACE_TOL:
        raise PreconditionError("seed is not on the surface")
    if period_guess <= 0:
        raise PreconditionError("period guess must be positive")
    y, T, history = _newton(surface, seed, float(period_guess), tol, max_iter, closure_tol)

    for k in range(max_divisor, 1, -1):
        end = flow(surface, y, T / k, tol=tol, n_samples=2).end_point
        if np.linalg.norm(end - y) < 1e-5 * np.linalg.norm(y):
            y, T, more = _newton(surface, y, T / k, tol, max_iter, closure_tol)
            history += more
            break

    res = flow(surface, y, T, tol=tol, variational=True)
    resid = float(np.linalg.norm(res.end_point - y))
    orbit = ClosedCharacteristic(y, T, 0.0, res, 1, "", resid, len(history) - 1)
    orbit.action_A = action(orbit, surface)
    return orbit


# -- distinctness ------------------------------------------------------------------

def _hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    da, _ = cKDTree(b).query(a)
    db, _ = cKDTree(a).query(b)
    return float(max(da.max(), db.max()))


def _distance_to_orbit(surface: SurfaceModel, point: np.ndarray, orbit: ClosedCharacteristic) -> float:
    t, pts = orbit.samples.times, orbit.samples.points
    last = len(t) - 1
    k = int(np.argmin(np.linalg.norm(pts - point, axis=1)))
    best = float(np.linalg.norm(pts[k] - point))
    # segments on either side of the nearest sample; the orbit is closed, so wrap
    segments = {(k - 1) % last, k % last}
    for i in segments:
        span = t[i + 1] - t[i]
        if span <= 0:
            continue
        start = pts[i]

        def dist(s, start=start):
            if s <= 0:
                return float(np.linalg.norm(start - point))
            return float(np.linalg.norm(flow(surface, start, s, n_samples=2).end_point - point))

        res = optimize.minimize_scalar(dist, bounds=(0.0, span), method="bounded",
                                       options={"xatol": 1e-12 * max(1.0, t[-1])})
        best = min(best, float(res.fun))
    return best


def distinct(a: ClosedCharacteristic, b: ClosedCharacteristic, surface: SurfaceModel | None = None,
             tol: float | None = None) -> bool:
    """True iff the two orbits have different images.

    A coarse Hausdorff distance between the sampled images decides clear cases;
    otherwise, when the surface is known, the distance from ``a``'s base point
    to ``b``'s trajectory is refined by re-integration.
    """
    pa, pb = a.samples.points, b.samples.points
    size = float(max(np.max(np.linalg.norm(pa, axis=1)), np.max(np.linalg.norm(pb, axis=1))))
    if tol is None:
        tol = 1e-6 * size
    spacing = max(float(np.max(np.linalg.norm(np.diff(p, axis=0), axis=1))) for p in (pa, pb))
    h = _hausdorff(pa, pb)
    if h > tol + spacing:
        return True
    if surface is None:
        return h > tol
    return max(_distance_to_orbit(surface, a.y0, b), _distance_to_orbit(surface, b.y0, a)) > tol


# -- survey ----------------------------------------------------------------------

def _period_guesses(surface: SurfaceModel, y: np.ndarray, window: tuple[float, float],
                    tol: float, count: int = 2) -> list[float]:
    """Times of the closest near-returns of the trajectory through ``y`` inside the window."""
    t_min, t_max = window
    res = flow(surface, y, 1.1 * t_max, tol=max(tol, 1e-9),
               n_samples=default_sample_count(surface, y, 1.1 * t_max))
    d = np.linalg.norm(res.points - y, axis=1)
    t = res.times
    mins = [k for k in range(1, len(d) - 1)
            if d[k] <= d[k - 1] and d[k] <= d[k + 1] and 0.9 * t_min <= t[k] <= 1.1 * t_max]
    mins.sort(key=lambda k: d[k])
    return [float(t[k]) for k in mins[:count]]


def _shoot_seed(args):
    surface, y, window, tol = args
    found, failures, shots = [], 0, 0
    for guess in _period_guesses(surface, y, window, tol):
        shots += 1
        try:
            found.append(shoot(surface, y, guess, tol=tol))
        except ShootingError:
            failures += 1
    return found, failures, shots


def _workers() -> int:
    raw = os.environ.get("CHARFLOW_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def default_window(surface: SurfaceModel, surface_metrics=None) -> tuple[float, float]:
    m = surface_metrics or metrics(surface)
    return 2.0 * np.pi * m.support_dist_d**2, 2.0 * np.pi * m.outer_radius_R**2


def survey(surface: SurfaceModel, seeds: int = 32, window: tuple[float, float] | None = None,
           seed: int = 0, tol: float = 1e-11, family_count: int = FAMILY_COUNT,
           workers: int | None = None) -> SurveyResult:
    """Shoot from deterministic seeds and collect geometrically distinct prime orbits.

    Orbits are sorted by action.  More than ``family_count`` distinct orbits
    sharing one action are reported as an orbit family and collapsed to a
    single representative.
    """
    if seeds < 1:
        raise PreconditionError("need at least one seed")
    if window is None:
        window = default_window(surface)
    if window[0] <= 0 or window[1] < window[0]:
        raise PreconditionError("period window must satisfy 0 < t_min <= t_max")
    pts = sphere_points(surface.dim, seeds, seed)
    starts = [surface.project(u) for u in pts]
    jobs = [(surface, y, window, tol) for y in starts]
    workers = workers or _workers()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_shoot_seed, jobs))
    else:
        results = [_shoot_seed(job) for job in jobs]

    candidates: list[ClosedCharacteristic] = []
    failures = shots = 0
    for found, fail, sh in results:
        candidates += found
        failures += fail
        shots += sh
    converged = len(candidates)
    candidates = [c for c in candidates if window[0] * (1 - 1e-6) <= c.period_tau <= window[1] * (1 + 1e-6)]
    candidates.sort(key=lambda c: (round(c.action_A, 9), tuple(np.round(c.y0, 6))))

    kept: list[ClosedCharacteristic] = []
    for c in candidates:
        if all(abs(c.action_A - k.action_A) > 1e-8 * max(1.0, k.action_A) or distinct(c, k, surface)
               for k in kept):
            kept.append(c)

    families = []
    groups: dict[int, list[ClosedCharacteristic]] = {}
    for c in kept:
        match = next((g for g, mem in groups.items()
                      if abs(mem[0].action_A - c.action_A) <= 1e-8 * max(1.0, c.action_A)), None)
        groups.setdefault(len(groups) if match is None else match, []).append(c)
    out = []
    for members in groups.values():
        if len(members) > family_count:
            families.append({"action": members[0].action_A, "count": len(members)})
            out.append(members[0])
        else:
            out += members
    out.sort(key=lambda c: c.action_A)
    for k, c in enumerate(out):
        c.prime_id = _name(k)
    # an ellipsoid with pairwise irrational axis ratios has exactly n prime orbits
    exhaustive = (isinstance(surface, Ellipsoid) and not has_rational_ratio(surface.axes)
                  and len(out) == surface.dim_n and not families and failures == 0)
    return SurveyResult(out, seeds, shots, converged, failures, families, tuple(window), exhaustive)


def iterate(orbit: ClosedCharacteristic, surface: SurfaceModel, m: int,
            tol: float = 1e-11) -> ClosedCharacteristic:
    """The m-th iterate, re-integrated over ``m`` prime periods."""
    if m < 1:
        raise PreconditionError("iterate count must be positive")
    T = m * orbit.prime_period
    res = flow(surface, orbit.y0, T, tol=tol)
    it = ClosedCharacteristic(orbit.y0.copy(), T, 0.0, res, m, orbit.prime_id,
                              float(np.linalg.norm(res.end_point - orbit.y0)))
    it.action_A = action(it, surface)
    return it


def orbit_from_record(surface: SurfaceModel, rec: dict, tol: float = 1e-11) -> ClosedCharacteristic:
    """Rebuild an orbit (with its linearisation) from a database record."""
    y0 = np.asarray(rec["y0"], dtype=float)
    tau = float(rec["tau"])
    res = flow(surface, y0, tau, tol=tol, variational=True)
    return ClosedCharacteristic(y0, tau, float(rec["action"]), res, 1, rec["prime_id"],
                                float(rec.get("residual", 0.0)))


def prime_period_scan(surface: SurfaceModel, orbit: ClosedCharacteristic, steps: int = 2000,
                      tol: float = 1e-11) -> float:
    """Smallest closure time of the trajectory found on a dense scan up to the period."""
    res = flow(surface, orbit.y0, orbit.period_tau, tol=tol, n_samples=steps + 1)
    d = np.linalg.norm(res.points - orbit.y0, axis=1)
    size = np.linalg.norm(orbit.y0)
    for k in range(1, len(d)):
        if d[k] < 1e-3 * size and k + 1 < len(d) and d[k] <= d[k + 1] and d[k] <= d[k - 1]:
            t0 = res.times[k]
            out = optimize.minimize_scalar(
                lambda s: float(np.linalg.norm(flow(surface, orbit.y0, s, n_samples=2).end_point - orbit.y0)),
                bounds=(res.times[k - 1], res.times[k + 1]), method="bounded")
            return float(out.x) if out.fun < 1e-6 * size else float(t0)
    return float(orbit.period_tau)
