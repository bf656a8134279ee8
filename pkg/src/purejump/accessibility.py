"""Left-accessibility of levels on monotone paths.

A level ``x`` is left-accessible for a path when the path takes values
strictly below ``x`` that come arbitrarily close to it, i.e. the left
limit at the last passage time equals ``x``. Finite representations
(step functions, truncated simulations) never satisfy the exact
criterion, so the detection takes a tolerance: ``x`` counts as
tol-accessible when the left limit at the last passage reaches
``x - tol``. The tolerance is always carried alongside results; with
``tol = 0`` the exact criterion is recovered.

The ensemble estimate measures, per level, the fraction of simulated
paths for which the level is tol-accessible. For driftless
infinite-measure models this fraction decays as the tolerance shrinks,
the finite-resolution signature of single points being polar (which this
module treats as a hypothesis justifying the test design, not something
it proves).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PreconditionError
from .levy import LevyModel, iter_paths, small_jump_bias
from .monotone import FiniteVariationFn, MonotoneFn, last_passage

REFINE_MIN_DEPTH = 6
REFINE_MAX_DEPTH = 20


def is_left_accessible(a: MonotoneFn, x: float, tol: float = 0.0) -> bool:
    """Whether the path approaches ``x`` from below within ``tol``."""
    if x <= 0.0:
        raise DomainError(f"level must be > 0, got {x}")
    if tol < 0.0:
        raise DomainError(f"tolerance must be >= 0, got {tol}")
    lp = last_passage(a, x)
    if math.isinf(lp):
        return False
    return a.eval_left(lp) >= x - tol


def _indicator_measure(pred, lo: float, hi: float, depth: int = 0) -> float:
    """Adaptive dyadic measure of ``{x in [lo, hi] : pred(x)}``.

    Cells where the predicate agrees at both ends and the midpoint are
    taken as constant once past the minimum depth; refinement stops at
    depth 20.
    """
    if hi <= lo:
        return 0.0
    mid = 0.5 * (lo + hi)
    if depth >= REFINE_MAX_DEPTH:
        return (hi - lo) if pred(mid) else 0.0
    if depth >= REFINE_MIN_DEPTH and pred(lo) == pred(mid) == pred(hi):
        return (hi - lo) if pred(mid) else 0.0
    return (_indicator_measure(pred, lo, mid, depth + 1)
            + _indicator_measure(pred, mid, hi, depth + 1))


def accessible_mass(f, a: MonotoneFn, tol: float = 0.0) -> float:
    """Stieltjes ``df``-mass of the tol-accessible levels of ``a``.

    Atoms of ``f`` are probed exactly; the continuous part is measured on
    an adaptive dyadic grid. A :class:`FiniteVariationFn` contributes the
    mass of both of its parts (total-variation convention).
    """
    if isinstance(f, FiniteVariationFn):
        return accessible_mass(f.pos, a, tol) + accessible_mass(f.neg, a, tol)

    def accessible(x: float) -> bool:
        return x > 0.0 and is_left_accessible(a, x, tol)

    mass = 0.0
    for x, w in f.jumps:
        if accessible(x):
            mass += w
    for (u0, slope), u1 in zip(f.knots, [t for t, _ in f.knots[1:]] + [f.horizon]):
        if slope > 0.0 and u1 > u0:
            mass += slope * _indicator_measure(accessible, u0, u1)
    return mass


@dataclass(frozen=True)
class AccessibilityReport:
    model: str
    levels: tuple
    tol: float
    eps: float
    n_paths: int
    seed: int
    probabilities: tuple
    stderrs: tuple

    def as_rows(self):
        for x, p, se in zip(self.levels, self.probabilities, self.stderrs):
            yield (x, self.tol, self.n_paths, p, se)


def estimate_accessibility_prob(model: LevyModel, levels, n_paths: int,
                                tol: float, eps: float, seed: int,
                                horizon: float = 1.0,
                                start_stream: int = 0) -> AccessibilityReport:
    """Per-level fraction of simulated paths that make the level
    tol-accessible.

    The tolerance must dominate the truncation bias at the horizon,
    otherwise the estimate is vacuous and a precondition error is raised.
    """
    levels = tuple(float(x) for x in levels)
    if any(x <= 0 for x in levels):
        raise DomainError("levels must be positive")
    if n_paths < 1:
        raise PreconditionError("need at least one path")
    resolution = small_jump_bias(model, horizon, eps) if eps > 0.0 else 0.0
    if tol < resolution:
        raise PreconditionError(
            f"tol={tol} is below the truncation bias {resolution}; "
            "the accessibility estimate would be vacuous")

    hits = np.zeros(len(levels), dtype=np.int64)
    for path in iter_paths(model, horizon, eps, seed, n_paths, start_stream):
        a = path.to_monotone()
        for j, x in enumerate(levels):
            if is_left_accessible(a, x, tol):
                hits[j] += 1
    probs = hits / float(n_paths)
    stderrs = np.sqrt(probs * (1.0 - probs) / float(n_paths))
    return AccessibilityReport(model=model.descriptor(), levels=levels,
                               tol=float(tol), eps=float(eps),
                               n_paths=int(n_paths), seed=int(seed),
                               probabilities=tuple(probs.tolist()),
                               stderrs=tuple(stderrs.tolist()))
