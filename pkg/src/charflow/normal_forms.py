"""Basic normal forms in Sp(2n) and sampled paths ending at them.

Blocks use the conventions ``N1(lam, b) = [[lam, b], [0, lam]]`` and
``R(theta) = [[cos, -sin], [sin, cos]]``.  The symplectic direct sum ``diamond``
places the k-th 2x2 block on the conjugate pair ``(k, n + k)``.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .dynamics import SymplecticPath

Block = Callable[[float], np.ndarray]


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def n1(lam: float, b: float) -> np.ndarray:
    return np.array([[lam, b], [0.0, lam]])


def diamond(*blocks: np.ndarray) -> np.ndarray:
    """Symplectic direct sum of 2x2 blocks."""
    n = len(blocks)
    out = np.zeros((2 * n, 2 * n))
    for k, blk in enumerate(blocks):
        idx = np.ix_([k, n + k], [k, n + k])
        out[idx] = blk
    return out


def _shear(t: float) -> np.ndarray:
    return np.array([[1.0, t], [0.0, 1.0]])


# Block paths on [0, 1] starting at the identity.  Each name records the
# endpoint: e.g. ``"N1(-1,1)"`` ends at [[-1, 1], [0, -1]].
def block_path(kind: str, param: float | None = None, turns: int = 0) -> Block:
    """A 2x2 symplectic path on [0, 1] from I to a basic normal form.

    ``turns`` adds full rotations so that paths with the same endpoint but
    different indices can be generated.
    """
    extra = 2.0 * np.pi * turns

    if kind == "forced":
        return lambda s: rotation((2.0 * np.pi + extra) * s) @ _shear(s)
    if kind == "N1(-1,b)":
        b = float(param)
        return lambda s: rotation((np.pi + extra) * s) @ _shear(-b * s)
    if kind == "N1(1,b)":
        b = float(param)
        if b == 0:
            return lambda s: rotation((2.0 * np.pi + extra) * s)
        return lambda s: rotation((2.0 * np.pi + extra) * s) @ _shear(b * s)
    if kind == "R":
        theta = float(param)
        return lambda s: rotation((theta + extra) * s)
    if kind == "hyperbolic":
        mu = float(param)
        return lambda s: rotation((2.0 * np.pi + extra) * s) @ np.diag([np.exp(mu * s), np.exp(-mu * s)])
    raise ValueError(f"unknown block kind {kind!r}")


def direct_sum_path(blocks: Sequence[Block], samples: int = 200,
                    kind: str = "generic") -> SymplecticPath:
    times = np.linspace(0.0, 1.0, samples)
    mats = np.array([diamond(*(f(t) for f in blocks)) for t in times])
    return SymplecticPath(times, mats, kind)
