"""Hot-loop kernels for generator evaluation along simulated paths.

The stable family admits the closed tail integral ``C/e * (b**e - a**e)``,
so the piecewise-linear generator sum reduces to a per-level suffix over
knots. The jitted kernels keep a fixed summation order, so results are
reproducible; when numba is unavailable the callers fall back to the
vectorized numpy path.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:                                      # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def deco(fn):
            return fn
        return deco if not (args and callable(args[0])) else args[0]


@njit(cache=True)
def stable_pwlinear_levels(zs, knot_times, slope_drops, last_slope, horizon,
                           expo, coeff, out):
    """``coeff * [last_slope*(H-z)+^e + sum_{u_j > z} drop_j*(u_j-z)^e]``.

    This is the Abel-summed form of ``sum_j s_j * (T(u_{j+1}-z) - T(u_j-z))``
    with ``T(v) = (v+)^e``; ``slope_drops[j] = s_{j-1} - s_j`` (``s_0`` enters
    through knot 0 whose time is 0, skipped for positive levels).
    """
    n_knots = knot_times.size
    for i in range(zs.size):
        z = zs[i]
        acc = 0.0
        if horizon > z:
            acc = last_slope * (horizon - z) ** expo
        lo, hi = 0, n_knots
        while lo < hi:
            mid = (lo + hi) // 2
            if knot_times[mid] > z:
                hi = mid
            else:
                lo = mid + 1
        for j in range(lo, n_knots):
            acc += slope_drops[j] * (knot_times[j] - z) ** expo
        out[i] = coeff * acc


@njit(cache=True)
def stable_pwlinear_gap(zs, knot_times, slopes, horizon, eps, expo, coeff,
                        tail_eps, out):
    """Small-jump part ``sum_j s_j * [C/e*(b^e - a^e) - tail(eps)*(b - a)]``
    with ``a, b`` the segment offsets clamped into ``[0, eps]``; only the
    few segments within ``eps`` of the level contribute."""
    n_knots = knot_times.size
    for i in range(zs.size):
        z = zs[i]
        acc = 0.0
        # first segment whose right end lies above z
        lo, hi = 0, n_knots
        while lo < hi:
            mid = (lo + hi) // 2
            if knot_times[mid] > z:
                hi = mid
            else:
                lo = mid + 1
        j = lo - 1 if lo > 0 else 0
        while j < n_knots:
            u0 = knot_times[j]
            u1 = knot_times[j + 1] if j + 1 < n_knots else horizon
            if u0 - z >= eps:
                break
            a = u0 - z
            if a < 0.0:
                a = 0.0
            b = u1 - z
            if b > eps:
                b = eps
            if b > a:
                acc += slopes[j] * (coeff * (b ** expo - a ** expo)
                                    - tail_eps * (b - a))
            j += 1
        out[i] = acc
