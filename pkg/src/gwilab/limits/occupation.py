"""Window estimator of local time for step paths.

For a path piecewise constant on a mesh of width delta, the estimator
eps^{-1} * int_0^t 1{a < H_s <= a + eps} ds is a finite Riemann sum. On a
lattice path (values in scale^{-1} Z) the window endpoints are snapped to the
lattice before comparing, so the estimate is exactly delta/eps times an
integer occupation count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["DegenerateEpsilon", "OccupationEstimate", "occupation_estimator"]

SNAP = 1e-9


class DegenerateEpsilon(ValueError):
    """The window is narrower than the lattice spacing of the path."""


@dataclass(frozen=True)
class OccupationEstimate:
    value: float | np.ndarray
    count: int | np.ndarray  # mesh cells whose value lies in the window
    delta: float
    eps: float


def _snap(x: np.ndarray) -> np.ndarray:
    r = np.rint(x)
    return np.where(np.abs(x - r) <= SNAP * np.maximum(1.0, np.abs(x)), r, x)


def occupation_estimator(
    path,
    delta: float,
    a,
    eps: float,
    t: float | None = None,
    scale: float | None = None,
) -> OccupationEstimate:
    """eps^{-1} * delta * #{k : k*delta < t, a < path[k] <= a + eps}.

    ``path[k]`` is the value on [k*delta, (k+1)*delta). With ``scale`` the
    path is read as integers ``path*scale`` and the window as
    (a*scale, (a+eps)*scale] with snapped endpoints. ``a`` may be an array
    of levels, in which case value and count are arrays.
    """
    if not eps > 0 or not delta > 0:
        raise ValueError("eps and delta must be positive")
    values = np.asarray(path, dtype=float)
    if t is not None:
        values = values[: max(0, math.ceil(t / delta - SNAP))]
    levels = np.asarray(a, dtype=float)
    if scale is None:
        ordered = np.sort(values)
        lo, hi = levels, levels + eps
    else:
        if eps * scale < 1 - SNAP:
            raise DegenerateEpsilon(f"eps={eps} is below the lattice spacing 1/{scale}")
        ints = np.rint(values * scale)
        if np.any(np.abs(ints - values * scale) > SNAP * np.maximum(1.0, np.abs(ints))):
            raise ValueError("path is not on the lattice scale^{-1} Z")
        ordered = np.sort(ints)
        lo, hi = _snap(levels * scale), _snap((levels + eps) * scale)
    count = np.searchsorted(ordered, hi, side="right") - np.searchsorted(ordered, lo, side="right")
    if count.ndim == 0:
        count = int(count)
    return OccupationEstimate(count * delta / eps, count, delta, eps)
