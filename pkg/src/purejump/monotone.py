"""Exact Stieltjes calculus for right-continuous non-decreasing paths.

A :class:`MonotoneFn` is a non-decreasing right-continuous function on
``[0, horizon]`` stored as a piecewise-linear continuous part (sorted
``(time, slope)`` knots) plus a finite sorted list of positive jumps.
Every identity of interest (canonical decomposition, composition, jump
sums, range gaps) is exact on this class up to floating round-off, so the
residual quantities computed here are genuinely zero / nonzero rather than
discretization artifacts.

Conventions:
  * ``f(0-) = f(0)``, so time 0 never carries a jump.
  * Left inverses use the infimum convention ``inf{y > 0 : a(y) > x}`` and
    return ``math.inf`` as an exhaustion sentinel, never an error.
  * Internal cumulative sums run in extended precision so that evaluation
    drifts by only a few ulp even for 10**7-term jump lists.

Values are immutable after construction; all operations are pure, so
instances can be shared freely across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError

#: absolute tolerance for identities that are exact in real arithmetic
TOL_ABS = 1e-12

INF_TIME = math.inf


def _cumsum_exact(values: np.ndarray) -> np.ndarray:
    # extended-precision accumulation keeps long jump lists at a few ulp
    return np.cumsum(values, dtype=np.longdouble).astype(np.float64)


@dataclass(frozen=True)
class MonotoneFn:
    """Right-continuous non-decreasing function on ``[0, horizon]``.

    ``knots`` are ``(time, slope)`` pairs: the continuous part has slope
    ``s_i`` on ``[t_i, t_{i+1})`` and the last slope extends to the
    horizon. ``jumps`` are ``(time, size)`` with strictly increasing times
    in ``(0, horizon]`` and strictly positive sizes.
    """

    origin_value: float = 0.0
    knots: tuple = ()
    jumps: tuple = ()
    horizon: float = 1.0

    def __post_init__(self):
        horizon = float(self.horizon)
        if not (horizon > 0.0 and math.isfinite(horizon)):
            raise DomainError(f"horizon must be finite and positive, got {horizon}")
        origin = float(self.origin_value)
        if not (origin >= 0.0 and math.isfinite(origin)):
            raise DomainError(f"origin_value must be finite and >= 0, got {origin}")

        knots = sorted((float(t), float(s)) for t, s in self.knots)
        if not knots or knots[0][0] > 0.0:
            knots.insert(0, (0.0, 0.0))
        times = [t for t, _ in knots]
        if len(set(times)) != len(times):
            raise DomainError("knot times must be distinct")
        if knots[0][0] < 0.0 or knots[-1][0] > horizon:
            raise DomainError("knot times must lie in [0, horizon]")
        if any(s < 0.0 or not math.isfinite(s) for _, s in knots):
            raise DomainError("slopes must be finite and >= 0")

        if len(self.jumps) > 512:
            arr = np.asarray(self.jumps, dtype=float)
            arr = arr[np.argsort(arr[:, 0], kind="stable")]
            times, sizes = arr[:, 0], arr[:, 1]
            if np.any(times[1:] == times[:-1]):
                raise DomainError("jump times must be strictly increasing")
            if times[0] <= 0.0 or times[-1] > horizon:
                raise DomainError("jump times must lie in (0, horizon]")
            if not np.all((sizes > 0.0) & np.isfinite(sizes)):
                raise DomainError("jump sizes must be finite and > 0")
            jumps = list(map(tuple, arr.tolist()))
        else:
            jumps = sorted((float(t), float(w)) for t, w in self.jumps)
            for (t1, w1), (t2, _) in zip(jumps, jumps[1:]):
                if t1 == t2:
                    raise DomainError(
                        f"jump times must be strictly increasing (dup {t1})")
            for t, w in jumps:
                if not (0.0 < t <= horizon):
                    raise DomainError(f"jump time {t} outside (0, horizon]")
                if not (w > 0.0 and math.isfinite(w)):
                    raise DomainError(f"jump size {w} must be finite and > 0")

        object.__setattr__(self, "origin_value", origin)
        object.__setattr__(self, "knots", tuple(knots))
        object.__setattr__(self, "jumps", tuple(jumps))
        object.__setattr__(self, "horizon", horizon)

    # -- constructors ------------------------------------------------------

    @classmethod
    def step(cls, atoms: Iterable[tuple], horizon: float, origin: float = 0.0) -> "MonotoneFn":
        """Pure step function with the given (position, size) atoms."""
        return cls(origin_value=origin, knots=(), jumps=tuple(atoms), horizon=horizon)

    @classmethod
    def linear(cls, slope: float, horizon: float, origin: float = 0.0) -> "MonotoneFn":
        return cls(origin_value=origin, knots=((0.0, slope),), jumps=(), horizon=horizon)

    @classmethod
    def identity(cls, horizon: float = 1.0) -> "MonotoneFn":
        return cls.linear(1.0, horizon)

    @classmethod
    def constant(cls, value: float, horizon: float) -> "MonotoneFn":
        return cls(origin_value=value, knots=(), jumps=(), horizon=horizon)

    @classmethod
    def from_samples(cls, ts: Sequence[float], vs: Sequence[float]) -> "MonotoneFn":
        """Continuous piecewise-linear interpolant of sampled values.

        ``ts`` must start at 0 and increase strictly; ``vs`` must be
        non-decreasing. The last sample time becomes the horizon.
        """
        ts = np.asarray(ts, dtype=float)
        vs = np.asarray(vs, dtype=float)
        if ts.ndim != 1 or ts.shape != vs.shape or ts.size < 2:
            raise DomainError("need matching 1-d sample arrays with >= 2 points")
        if ts[0] != 0.0 or np.any(np.diff(ts) <= 0.0):
            raise DomainError("sample times must start at 0 and increase strictly")
        if np.any(np.diff(vs) < 0.0):
            raise DomainError("sample values must be non-decreasing")
        slopes = np.diff(vs) / np.diff(ts)
        knots = tuple(zip(ts[:-1].tolist(), slopes.tolist()))
        return cls(origin_value=float(vs[0]), knots=knots, jumps=(),
                   horizon=float(ts[-1]))

    # -- cached internal arrays -------------------------------------------

    @cached_property
    def _kt(self) -> np.ndarray:
        return np.array([t for t, _ in self.knots], dtype=float)

    @cached_property
    def _ks(self) -> np.ndarray:
        return np.array([s for _, s in self.knots], dtype=float)

    @cached_property
    def _kbase(self) -> np.ndarray:
        # continuous-part value accumulated at each knot time
        if len(self.knots) == 1:
            return np.zeros(1)
        seg = self._ks[:-1] * np.diff(self._kt)
        return np.concatenate(([0.0], _cumsum_exact(seg)))

    @cached_property
    def _jt(self) -> np.ndarray:
        return np.array([t for t, _ in self.jumps], dtype=float)

    @cached_property
    def _js(self) -> np.ndarray:
        return np.array([w for _, w in self.jumps], dtype=float)

    @cached_property
    def _jcum(self) -> np.ndarray:
        return _cumsum_exact(self._js)

    @cached_property
    def _events(self) -> np.ndarray:
        # all breakpoints, horizon included; values between are linear
        ev = np.unique(np.concatenate((self._kt, self._jt, [0.0, self.horizon])))
        return ev

    @cached_property
    def _event_right(self) -> np.ndarray:
        return self.eval(self._events)

    @cached_property
    def _event_left(self) -> np.ndarray:
        return self.eval_left(self._events)

    # -- evaluation --------------------------------------------------------

    def _check_domain(self, t: np.ndarray):
        if t.size and (float(t.min()) < 0.0 or float(t.max()) > self.horizon):
            raise DomainError(
                f"time outside [0, {self.horizon}]: range [{t.min()}, {t.max()}]")

    def _continuous(self, t: np.ndarray) -> np.ndarray:
        i = np.searchsorted(self._kt, t, side="right") - 1
        return self._kbase[i] + self._ks[i] * (t - self._kt[i])

    def _jump_part(self, t: np.ndarray, inclusive: bool) -> np.ndarray:
        if self._jt.size == 0:
            return np.zeros_like(t)
        side = "right" if inclusive else "left"
        idx = np.searchsorted(self._jt, t, side=side)
        out = np.zeros_like(t)
        mask = idx > 0
        out[mask] = self._jcum[idx[mask] - 1]
        return out

    def eval(self, t):
        """Value ``f(t)`` (right-continuous); scalar or array argument."""
        arr = np.atleast_1d(np.asarray(t, dtype=float))
        self._check_domain(arr)
        out = self.origin_value + self._continuous(arr) + self._jump_part(arr, True)
        return float(out[0]) if np.isscalar(t) or np.ndim(t) == 0 else out

    def eval_left(self, t):
        """Left limit ``f(t-)``, with ``f(0-) = f(0)``."""
        arr = np.atleast_1d(np.asarray(t, dtype=float))
        self._check_domain(arr)
        out = self.origin_value + self._continuous(arr) + self._jump_part(arr, False)
        return float(out[0]) if np.isscalar(t) or np.ndim(t) == 0 else out

    def slope_at(self, t: float) -> float:
        """Slope of the continuous part on the segment containing ``t``."""
        i = int(np.searchsorted(self._kt, t, side="right")) - 1
        return float(self._ks[max(i, 0)])

    def slope_before(self, t: float) -> float:
        """Slope immediately to the left of ``t`` (t > 0)."""
        i = int(np.searchsorted(self._kt, t, side="left")) - 1
        return float(self._ks[max(i, 0)])

    def slopes_at(self, ts: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self._kt, ts, side="right") - 1
        return self._ks[np.maximum(idx, 0)]

    def slopes_before(self, ts: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self._kt, ts, side="left") - 1
        return self._ks[np.maximum(idx, 0)]

    def continuous_increment(self, t: float) -> float:
        """Increase of the continuous part over ``[0, t]``; exact 0 for steps."""
        arr = np.atleast_1d(np.asarray(t, dtype=float))
        self._check_domain(arr)
        return float(self._continuous(arr)[0])

    @property
    def total_slope_mass(self) -> float:
        return self.continuous_increment(self.horizon)

    def is_pure_step(self) -> bool:
        return bool(np.all(self._ks == 0.0))

    # -- passage times -----------------------------------------------------

    def first_passage(self, x: float, strict: bool) -> float:
        """First time the value reaches ``>= x`` (or ``> x`` if strict).

        Returns ``math.inf`` when the level is never reached on the domain.
        """
        v0 = self.eval(0.0)
        if v0 > x or (not strict and v0 >= x):
            return 0.0
        rv = self._event_right
        ev = self._events
        hit = rv > x if strict else rv >= x
        idx = int(np.argmax(hit)) if hit.any() else -1
        if idx < 0:
            return INF_TIME
        lv = float(self._event_left[idx])
        if lv > x:
            # continuous crossing strictly inside the previous segment
            t0, v_prev = float(ev[idx - 1]), float(rv[idx - 1])
            m = (lv - v_prev) / (float(ev[idx]) - t0)
            return t0 + (x - v_prev) / m
        return float(ev[idx])

    def scaled(self, c: float) -> "MonotoneFn":
        """Pointwise multiple ``c * f`` for ``c > 0``."""
        if not c > 0:
            raise DomainError(f"scale factor must be positive, got {c}")
        return MonotoneFn(origin_value=c * self.origin_value,
                          knots=tuple((t, c * s) for t, s in self.knots),
                          jumps=tuple((t, c * w) for t, w in self.jumps),
                          horizon=self.horizon)

    # -- serialization -----------------------------------------------------

    def to_lines(self) -> list:
        """Plain-text dump: ``kind,time,value`` rows sorted by time."""
        rows = [("origin", 0.0, self.origin_value)]
        rows += [("knot", t, s) for t, s in self.knots]
        rows += [("jump", t, w) for t, w in self.jumps]
        rows.append(("horizon", self.horizon, 0.0))
        rows.sort(key=lambda r: (r[1], r[0]))
        return [f"{kind},{t!r},{v!r}" for kind, t, v in rows]

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "MonotoneFn":
        origin, horizon = 0.0, None
        knots, jumps = [], []
        for line in lines:
            line = line.strip()
            if not line:
                continue
            kind, t, v = line.split(",")
            t, v = float(t), float(v)
            if kind == "origin":
                origin = v
            elif kind == "knot":
                knots.append((t, v))
            elif kind == "jump":
                jumps.append((t, v))
            elif kind == "horizon":
                horizon = t
            else:
                raise DomainError(f"unknown row kind {kind!r}")
        if horizon is None:
            raise DomainError("missing horizon row")
        return cls(origin_value=origin, knots=tuple(knots), jumps=tuple(jumps),
                   horizon=horizon)


@dataclass(frozen=True)
class FiniteVariationFn:
    """Difference ``pos - neg`` of two MonotoneFns sharing a horizon."""

    pos: MonotoneFn
    neg: MonotoneFn

    def __post_init__(self):
        if self.pos.horizon != self.neg.horizon:
            raise DomainError("pos and neg parts must share the same horizon")

    @property
    def horizon(self) -> float:
        return self.pos.horizon

    @classmethod
    def from_signed_atoms(cls, atoms: Iterable[tuple], horizon: float) -> "FiniteVariationFn":
        pos = [(x, w) for x, w in atoms if w > 0]
        neg = [(x, -w) for x, w in atoms if w < 0]
        return cls(MonotoneFn.step(pos, horizon), MonotoneFn.step(neg, horizon))

    @classmethod
    def from_monotone(cls, f: MonotoneFn) -> "FiniteVariationFn":
        return cls(f, MonotoneFn.constant(0.0, f.horizon))

    def eval(self, t):
        return self.pos.eval(t) - self.neg.eval(t)

    def eval_left(self, t):
        return self.pos.eval_left(t) - self.neg.eval_left(t)

    def total_variation_mass(self, x: float, y: float) -> float:
        """|dk|-mass of the interval (x, y]."""
        return stieltjes_mass(self.pos, x, y) + stieltjes_mass(self.neg, x, y)

    def scaled(self, c: float) -> "FiniteVariationFn":
        if c == 0:
            raise DomainError("scale factor must be nonzero")
        if c > 0:
            return FiniteVariationFn(self.pos.scaled(c), self.neg.scaled(c))
        return FiniteVariationFn(self.neg.scaled(-c), self.pos.scaled(-c))


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def eval_with_left_limit(f: MonotoneFn, t: float) -> tuple:
    """Return ``(f(t), f(t-), jump)`` with the convention ``f(0-) = f(0)``."""
    value = f.eval(t)
    left = f.eval_left(t)
    return value, left, value - left


def decompose(f: MonotoneFn) -> tuple:
    """Split into continuous and pure-jump parts.

    Both parts keep the origin value, so
    ``f(t) = cont(t) + pure_jump(t) - f(0)`` pointwise.
    """
    cont = MonotoneFn(origin_value=f.origin_value, knots=f.knots, jumps=(),
                      horizon=f.horizon)
    pure = MonotoneFn(origin_value=f.origin_value, knots=(), jumps=f.jumps,
                      horizon=f.horizon)
    return cont, pure


def stieltjes_mass(f: MonotoneFn, x: float, y: float) -> float:
    """df-mass of the half-open interval ``(x, y]``, i.e. ``f(y) - f(x)``."""
    if not 0.0 <= x <= y:
        raise DomainError(f"need 0 <= x <= y, got x={x}, y={y}")
    if y > f.horizon:
        raise DomainError(f"right endpoint {y} beyond horizon {f.horizon}")
    return f.eval(y) - f.eval(x)


def left_inverse_eval(a: MonotoneFn, x: float) -> float:
    """``inf{y > 0 : a(y) > x}``; ``math.inf`` when the level is never exceeded."""
    if x < 0.0:
        raise DomainError(f"level must be >= 0, got {x}")
    return a.first_passage(x, strict=True)


def last_passage(a: MonotoneFn, x: float) -> float:
    """``sup{t >= 0 : a(t) < x}`` for ``x > 0``.

    Returns 0 when ``a(0) >= x`` and ``math.inf`` when ``a`` stays below
    ``x`` on the whole domain; this equals the left limit of the
    right-continuous inverse at ``x``.
    """
    if x <= 0.0:
        raise DomainError(f"level must be > 0, got {x}")
    if a.eval(a.horizon) < x:
        return INF_TIME
    return a.first_passage(x, strict=False)


@dataclass(frozen=True)
class RangeReport:
    gaps: tuple            # (left_value, right_value) per jump, open intervals
    range_measure: float   # Lebesgue measure of the closed range over [0, t]
    pure_jump_flag: bool


def range_report(a: MonotoneFn, t: float) -> RangeReport:
    """Gap structure of the closed range of ``a`` restricted to ``[0, t]``.

    The range measure equals the continuous increment; it is computed from
    the slope representation (not via cancellation of two large sums), so a
    pure step function reports exactly 0.
    """
    if not 0.0 < t <= a.horizon:
        raise DomainError(f"need 0 < t <= horizon, got t={t}")
    jt = a._jt
    n = int(np.searchsorted(jt, t, side="right"))
    left = a.eval_left(jt[:n]) if n else np.empty(0)
    right = a.eval(jt[:n]) if n else np.empty(0)
    gaps = tuple(zip(left.tolist(), right.tolist()))
    measure = a.continuous_increment(t)
    return RangeReport(gaps=gaps, range_measure=measure,
                       pure_jump_flag=measure <= TOL_ABS)


def compose(f: MonotoneFn, a: MonotoneFn) -> MonotoneFn:
    """Exact representation of ``t -> f(a(t))``.

    Jumps of the result occur at jump times of ``a`` and at times where the
    continuous part of ``a`` first reaches a jump location of ``f``; knot
    events are added wherever the flow of ``a`` crosses a slope change of
    ``f``. Ties (a level hit exactly at a knot of ``a``) resolve to the
    earliest time.
    """
    a_max = a.eval(a.horizon)
    if a_max > f.horizon:
        raise DomainError(
            f"range of a (max {a_max}) exceeds domain of f (horizon {f.horizon})")

    events = [np.array([0.0, a.horizon]), a._kt, a._jt]
    crossing_level: dict = {}          # crossing time -> lowest f-jump level hit
    if not a.is_pure_step():
        a0 = a.eval(0.0)
        # x-space breakpoints of f that the continuous flow can cross
        for theta, is_jump in [(x, True) for x in f._jt.tolist()] + \
                              [(x, False) for x in f._kt.tolist()]:
            if not a0 < theta <= a_max:
                continue
            tstar = a.first_passage(theta, strict=False)
            if not (0.0 < tstar <= a.horizon and math.isfinite(tstar)):
                continue
            # an interior linear solve can land one ulp short of the level;
            # nudge forward so the composed value picks up f's atom at theta
            for _ in range(8):
                if a.eval(tstar) >= theta or tstar >= a.horizon:
                    break
                tstar = np.nextafter(tstar, np.inf)
            events.append(np.array([tstar]))
            if is_jump:
                crossing_level[tstar] = min(theta, crossing_level.get(tstar, theta))
    ev = np.unique(np.concatenate(events))
    ev = ev[(ev >= 0.0) & (ev <= a.horizon)]

    va = a.eval(ev)
    va_left = a.eval_left(ev)
    comp_right = f.eval(va)

    # left limit of f(a(.)) at each event: when a climbs strictly into its
    # left limit the f-value approaches f(x-), otherwise f(x)
    slopes_before = a.slopes_before(ev)
    slopes_before[ev <= 0.0] = 0.0
    f_at_left = f.eval(va_left)
    f_left_of_left = f.eval_left(va_left)
    comp_left = np.where(slopes_before > 0.0, f_left_of_left, f_at_left)
    comp_left[0] = comp_right[0]

    candidate = np.isin(ev, a._jt)
    for i, t in enumerate(ev.tolist()):
        theta = crossing_level.get(t)
        if theta is None:
            continue
        candidate[i] = True
        # the flow reaches the exact level theta here; float placement of the
        # event time must not lose or double-count f's atom at theta
        comp_right[i] = max(comp_right[i], f.eval(theta))
        if slopes_before[i] > 0.0 and va_left[i] >= theta:
            # continuous climb into theta: the left limit is f(theta-), even
            # though the stored left value may sit one ulp past theta
            comp_left[i] = f.eval_left(theta)
    jump_sizes = comp_right - comp_left
    take = candidate & (jump_sizes > 0.0)
    jumps = tuple(zip(ev[take].tolist(), jump_sizes[take].tolist()))

    # segment slopes: between consecutive events both a and the image
    # interval of f are linear, so the midpoint slopes are exact
    if a.is_pure_step():
        knots = ((0.0, 0.0),)
    else:
        mids = 0.5 * (ev[:-1] + ev[1:])
        ma = a.slopes_at(mids)
        slopes = np.where(ma > 0.0, ma * f.slopes_at(a.eval(mids)), 0.0)
        knots = tuple(zip(ev[:-1].tolist(), slopes.tolist()))

    return MonotoneFn(origin_value=float(comp_right[0]), knots=knots,
                      jumps=jumps, horizon=a.horizon)


@dataclass(frozen=True)
class CovResidual:
    lhs: float
    jump_sum: float
    deficit: float


def change_of_variables_residual(f: MonotoneFn, a: MonotoneFn, t: float) -> CovResidual:
    """Report ``f(a(t)) - f(a(0))`` against the jump sum of the composition.

    The jump sum adds ``f(a(s)) - f(a(s-))`` over the jump times of
    ``f o a`` (enumerated via :func:`compose`); note the summand evaluates
    ``f`` at the left limit of ``a``, so jumps of the composition occurring
    at continuity times of ``a`` contribute nothing. The deficit is
    reported, never asserted to vanish.
    """
    if not 0.0 <= t <= a.horizon:
        raise DomainError(f"t={t} outside [0, horizon]")
    comp = compose(f, a)
    jt = comp._jt
    n = int(np.searchsorted(jt, t, side="right"))
    s = jt[:n]
    if s.size:
        summands = f.eval(a.eval(s)) - f.eval(a.eval_left(s))
        jump_sum = float(np.sum(summands, dtype=np.longdouble))
    else:
        jump_sum = 0.0
    lhs = f.eval(a.eval(t)) - f.eval(a.eval(0.0))
    return CovResidual(lhs=lhs, jump_sum=jump_sum, deficit=lhs - jump_sum)
