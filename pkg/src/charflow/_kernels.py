"""Compiled right-hand sides and the projected DOP853 loop for built-in surfaces.

Surfaces are described by ``(kind, w, a, eps)``: ``kind`` 0 is an ellipsoid
with weights ``w``; ``kind`` 1 multiplies its gauge by
``1 + eps * sum(a * u**4)``, ``u = x / |x|``.
"""

from __future__ import annotations

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_MAX_STEPS = 1
STATUS_UNDERFLOW = 2


@njit(cache=True)
def gauge_parts(x, kind, w, a, eps):
    """Gauge value, gradient and Hessian at a nonzero point."""
    d = x.shape[0]
    wx = w * x
    j0 = np.sqrt(np.dot(wx, x))
    g0 = wx / j0
    H0 = -np.outer(wx, wx) / j0**3
    for i in range(d):
        H0[i, i] += w[i] / j0
    if kind == 0:
        return j0, g0, H0
    r2 = np.dot(x, x)
    x3 = x**3
    q = np.dot(a, x3 * x)
    s = 1.0 + eps * q / r2**2
    dq = 4.0 * a * x3
    ds = eps * (dq / r2**2 - 4.0 * q * x / r2**3)
    d2s = eps * (-4.0 * (np.outer(dq, x) + np.outer(x, dq)) / r2**3
                 + 24.0 * q * np.outer(x, x) / r2**4)
    for i in range(d):
        d2s[i, i] += eps * (12.0 * a[i] * x[i] ** 2 / r2**2 - 4.0 * q / r2**3)
    j = j0 * s
    g = s * g0 + j0 * ds
    H = s * H0 + np.outer(g0, ds) + np.outer(ds, g0) + j0 * d2s
    H = 0.5 * (H + H.T)
    return j, g, H


@njit(cache=True)
def gauge_value(x, kind, w, a, eps):
    j0 = np.sqrt(np.dot(w * x, x))
    if kind == 0:
        return j0
    r2 = np.dot(x, x)
    return j0 * (1.0 + eps * np.dot(a, x**4) / r2**2)


@njit(cache=True)
def _rhs(state, dim, variational, kind, w, a, eps, alpha):
    n = dim // 2
    x = state[:dim].copy()
    j, g, H = gauge_parts(x, kind, w, a, eps)
    if alpha < 0.0:
        grad = j * g
        hess = np.outer(g, g) + j * H
    else:
        c1 = alpha * j ** (alpha - 1.0)
        grad = c1 * g
        hess = alpha * (alpha - 1.0) * j ** (alpha - 2.0) * np.outer(g, g) + c1 * H
    out = np.empty_like(state)
    out[:n] = -grad[n:]
    out[n:dim] = grad[:n]
    if variational:
        phi = state[dim:].copy().reshape((dim, dim))
        hp = hess @ phi
        jhp = np.empty_like(hp)
        jhp[:n] = -hp[n:]
        jhp[n:] = hp[:n]
        out[dim:] = jhp.ravel()
    return out


@njit(cache=True)
def integrate(y0, times, variational, kind, w, a, eps, alpha, rtol, atol,
              A, B, E3, E5, stages, max_steps):
    """Adaptive DOP853 with radial projection, sampled exactly at ``times``.

    Returns ``(samples, pre-projection drift, status)``.
    """
    dim = y0.shape[0]
    size = dim + dim * dim if variational else dim
    state = np.zeros(size)
    state[:dim] = y0
    if variational:
        for i in range(dim):
            state[dim + i * dim + i] = 1.0
    out = np.empty((times.shape[0], size))
    out[0] = state
    drift = 0.0
    t = times[0]
    f = _rhs(state, dim, variational, kind, w, a, eps, alpha)
    span = times[-1] - times[0]
    direction = 1.0 if span >= 0 else -1.0
    speed = max(np.linalg.norm(f[:dim]), 1e-12)
    h0 = 0.05 * np.linalg.norm(y0) / speed
    h = direction * (min(abs(span), h0) if span != 0 else 1.0)
    K = np.empty((stages + 1, size))
    steps = 0
    for k in range(1, times.shape[0]):
        target = times[k]
        while direction * (target - t) > 0:
            if steps > max_steps:
                return out, drift, STATUS_MAX_STEPS
            clipped = direction * (t + h - target) >= 0
            step = target - t if clipped else h
            if abs(step) < 1e-14 * max(1.0, abs(t)) and not clipped:
                return out, drift, STATUS_UNDERFLOW
            K[0] = f
            for s in range(1, stages):
                acc = state.copy()
                for r in range(s):
                    if A[s, r] != 0.0:
                        acc += step * A[s, r] * K[r]
                K[s] = _rhs(acc, dim, variational, kind, w, a, eps, alpha)
            new = state.copy()
            for r in range(stages):
                if B[r] != 0.0:
                    new += step * B[r] * K[r]
            K[stages] = _rhs(new, dim, variational, kind, w, a, eps, alpha)
            scale = atol + np.maximum(np.abs(state), np.abs(new)) * rtol
            err5 = np.zeros(size)
            err3 = np.zeros(size)
            for r in range(stages + 1):
                err5 += E5[r] * K[r]
                err3 += E3[r] * K[r]
            err5 /= scale
            err3 /= scale
            e5 = np.dot(err5, err5)
            e3 = np.dot(err3, err3)
            if e5 == 0.0 and e3 == 0.0:
                err = 0.0
            else:
                err = abs(step) * e5 / np.sqrt((e5 + 0.01 * e3) * size)
            steps += 1
            fac = 10.0 if err == 0.0 else 0.9 * err ** (-1.0 / 8.0)
            if err <= 1.0:
                t = target if clipped else t + step
                jn = gauge_value(new[:dim], kind, w, a, eps)
                drift = max(drift, abs(jn - 1.0))
                new[:dim] /= jn
                state = new
                f = _rhs(state, dim, variational, kind, w, a, eps, alpha)
                if not clipped:
                    h = step * min(10.0, fac)
            else:
                h = step * max(0.2, fac)
        out[k] = state
    return out, drift, STATUS_OK
