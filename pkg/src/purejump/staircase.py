"""Certified construction of a strictly increasing pure-jump function.

The target function places an atom of mass ``2**-k`` on the k-th positive
rational in ``(0, horizon)``, enumerated in Calkin-Wilf order. Truncating
after ``N`` atoms leaves tail mass exactly ``2**-N``, so every evaluation
of the limit function carries a certified two-sided bound, and the
continuous singular inverse can be bracketed by bisection whose
comparisons are decided in exact integer arithmetic:

  * ``a_M(y) >= x``   certifies ``a(y) > x``   (atoms are dense, so the
    tail above any finite truncation is strictly positive for ``y > 0``);
  * ``a_M(y) + 2**-M <= x`` certifies ``a(y) < x``.

Because the limit value ``a(y)`` has infinitely many binary digits for
``0 < y < horizon`` it never equals a dyadic query exactly, so the
bisection always resolves once ``M`` is large enough.

The deficit experiment pits the certified inverse against truncations of
the staircase. The inverse is constant on every jump gap
``[a(q_k-), a(q_k)]`` (its value there is ``q_k``: below ``q_k`` the
function stays under ``a(q_k-)``, and atoms are dense above ``q_k``), so
each gap-jump term of the limit pair vanishes exactly and the certified
deficit reduces to the left-hand side, which climbs toward ``t`` as the
truncation refines. Everything here is a pure function of ``(spec, args)``
and safe to run concurrently.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction

from .errors import DomainError, PreconditionError, ResourceError
from .monotone import MonotoneFn

#: largest truncation representable as MonotoneFn jump sizes (2**-k > 0)
MAX_FLOAT_ATOMS = 1060

DEFAULT_DELTA = 1e-8
BISECTION_CAP = 200


def _round_down(fr: Fraction) -> float:
    x = float(fr)
    while Fraction(x) > fr:
        x = math.nextafter(x, -math.inf)
    return x


def _round_up(fr: Fraction) -> float:
    x = float(fr)
    while Fraction(x) < fr:
        x = math.nextafter(x, math.inf)
    return x


@dataclass(frozen=True)
class Enclosure:
    """Certified interval: the true value lies in ``[lo, hi]``."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise DomainError(f"enclosure needs lo <= hi, got [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def __add__(self, other: "Enclosure") -> "Enclosure":
        return Enclosure(math.nextafter(self.lo + other.lo, -math.inf),
                         math.nextafter(self.hi + other.hi, math.inf))

    def __sub__(self, other: "Enclosure") -> "Enclosure":
        return Enclosure(math.nextafter(self.lo - other.hi, -math.inf),
                         math.nextafter(self.hi - other.lo, math.inf))

    @classmethod
    def exact(cls, value: float) -> "Enclosure":
        return cls(value, value)

    @classmethod
    def from_fractions(cls, lo: Fraction, hi: Fraction) -> "Enclosure":
        return cls(_round_down(lo), _round_up(hi))


class StaircaseSpec:
    """Atom layout of the staircase: Calkin-Wilf rationals in ``(0, horizon)``
    with dyadic weights ``2**-k``. Enumeration and tables are cached."""

    def __init__(self, horizon: float = 1.0):
        if not (horizon > 0.0 and math.isfinite(horizon)):
            raise DomainError(f"horizon must be finite and positive, got {horizon}")
        self.horizon = float(horizon)
        self._horizon_fr = Fraction(self.horizon)
        self._atoms: list = []            # q_1, q_2, ... as Fractions
        self._cw_state = Fraction(1)
        self._cw_started = False
        self._tables: dict = {}           # M -> (sorted positions, cum ints)

    def __repr__(self):
        return f"StaircaseSpec(horizon={self.horizon})"

    def __eq__(self, other):
        return isinstance(other, StaircaseSpec) and other.horizon == self.horizon

    def __hash__(self):
        return hash(("StaircaseSpec", self.horizon))

    # -- enumeration -------------------------------------------------------

    def atom(self, k: int) -> Fraction:
        """k-th enumerated rational (1-based); pure function of k."""
        if k < 1:
            raise DomainError(f"atom index must be >= 1, got {k}")
        self._extend(k)
        return self._atoms[k - 1]

    def atoms(self, n: int) -> list:
        self._extend(n)
        return self._atoms[:n]

    def _extend(self, n: int):
        while len(self._atoms) < n:
            if self._cw_started:
                q = self._cw_state
                q = 1 / (2 * (q.numerator // q.denominator) + 1 - q)
                self._cw_state = q
            else:
                q = self._cw_state
                self._cw_started = True
            if 0 < q < self._horizon_fr:
                self._atoms.append(q)

    # -- exact truncated evaluation -----------------------------------------

    def _table(self, m: int):
        """Sorted atom positions with exact cumulative weights at level m.

        Cumulative weights are integers at denominator ``2**m``.
        """
        tab = self._tables.get(m)
        if tab is not None:
            return tab
        pairs = sorted((q, k) for k, q in enumerate(self.atoms(m), start=1))
        positions = [q for q, _ in pairs]
        cums, acc = [], 0
        for _, k in pairs:
            acc += 1 << (m - k)
            cums.append(acc)
        tab = (positions, cums)
        self._tables[m] = tab
        return tab

    def _eval_num(self, t: Fraction, m: int) -> int:
        """Numerator of ``a_m(t)`` at denominator ``2**m`` (exact)."""
        positions, cums = self._table(m)
        idx = bisect_right(positions, t)
        return cums[idx - 1] if idx else 0

    def eval_exact(self, t: Fraction, n: int) -> Fraction:
        """Exact value of the N-atom truncation at ``t``."""
        return Fraction(self._eval_num(t, n), 1 << n)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def build_truncated(spec: StaircaseSpec, n: int) -> MonotoneFn:
    """N-atom truncation as a pure step MonotoneFn.

    The limit function is bracketed by ``a_N <= a <= a_N + 2**-N``
    pointwise. Atom weights below the float64 subnormal range cannot be
    represented, hence the cap on ``n``.
    """
    if n < 1:
        raise DomainError(f"need n >= 1, got {n}")
    if n > MAX_FLOAT_ATOMS:
        raise DomainError(
            f"n={n} exceeds float-representable truncation {MAX_FLOAT_ATOMS}; "
            "use the certified evaluation instead")
    jumps = sorted((float(q), 2.0 ** -k) for k, q in enumerate(spec.atoms(n), start=1))
    return MonotoneFn.step(jumps, horizon=spec.horizon)


def certified_eval(spec: StaircaseSpec, t: float, n: int) -> Enclosure:
    """Enclosure ``[a_N(t), a_N(t) + 2**-N]`` of the limit value at ``t``."""
    if not 0.0 <= t <= spec.horizon:
        raise DomainError(f"t={t} outside [0, {spec.horizon}]")
    if n < 1:
        raise DomainError(f"need n >= 1, got {n}")
    val = spec.eval_exact(Fraction(t), n)
    return Enclosure.from_fractions(val, val + Fraction(1, 1 << n))


def _resolution_ladder(m_cap: int):
    m = 64
    while m < m_cap:
        yield m
        m *= 4
    yield m_cap


def _certify_above(spec: StaircaseSpec, y: Fraction, x: Fraction, m_cap: int):
    """Decide a(y) > x / a(y) < x with exact truncated comparisons.

    Returns ``True`` when ``a(y) > x`` is certified, ``False`` when
    ``a(y) < x`` is certified, ``None`` when the cap is hit. ``y`` must be
    positive (density of the remaining atoms supplies strictness).
    """
    p, q = x.numerator, x.denominator
    for m in _resolution_ladder(m_cap):
        num = spec._eval_num(y, m)
        # compare num/2**m against p/q exactly
        rhs = p << m
        if num * q >= rhs:
            return True
        if (num + 1) * q <= rhs:
            return False
    return None


def _inverse_exact(spec: StaircaseSpec, x: Fraction, delta: float, m_cap: int):
    """Bisection bracket of ``inf{y > 0 : a(y) > x}`` on ``[0, horizon]``.

    Maintains ``a(lo) <= x < a(hi)`` with both sides certified; the
    midpoint test is monotone in ``x`` and follows a fixed resolution
    schedule, so brackets for increasing ``x`` never move left.
    """
    if not (0 <= x < 1):
        raise DomainError(f"inverse argument must lie in [0, 1), got {float(x)}")
    if delta <= 0.0:
        raise DomainError(f"delta must be positive, got {delta}")
    lo, hi = 0.0, spec.horizon
    if _certify_above(spec, Fraction(hi), x, m_cap) is not True:
        raise ResourceError("cannot certify the total mass above the query",
                            best=Enclosure(lo, hi))
    for _ in range(BISECTION_CAP):
        if hi - lo <= delta:
            break
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            raise ResourceError(
                f"float resolution exhausted at width {hi - lo} before {delta}",
                best=Enclosure(lo, hi))
        verdict = _certify_above(spec, Fraction(mid), x, m_cap)
        if verdict is True:
            hi = mid
        elif verdict is False:
            lo = mid
        else:
            raise ResourceError(
                f"comparison at t={mid} unresolved at {m_cap} atoms",
                best=Enclosure(lo, hi))
    else:
        raise ResourceError(
            f"bisection cap {BISECTION_CAP} reached before width {delta}",
            best=Enclosure(lo, hi))

    # certificate check at the final resolution (documented invariant):
    # a_M(lo) <= x  and  a_M(hi) + 2**-M > x
    m = m_cap
    assert Fraction(spec._eval_num(Fraction(lo), m), 1 << m) <= x
    assert Fraction(spec._eval_num(Fraction(hi), m) + 1, 1 << m) > x
    return Enclosure(lo, hi)


def certified_inverse(spec: StaircaseSpec, x: float, delta: float = DEFAULT_DELTA,
                      m_cap: int = 4096) -> Enclosure:
    """Enclosure of the limit left-inverse ``inf{y > 0 : a(y) > x}``.

    Width is at most ``delta``; the returned bracket is self-validating
    (see :func:`_inverse_exact`). Raises :class:`ResourceError` with the
    best bracket attached when the iteration or resolution cap is hit.
    """
    return _inverse_exact(spec, Fraction(x), delta, m_cap)


@dataclass(frozen=True)
class DeficitRow:
    n: int
    lhs: Enclosure
    jump_sum: Enclosure
    deficit: Enclosure


def deficit_scan(spec: StaircaseSpec, t: float, ns, delta: float = DEFAULT_DELTA):
    """Certified change-of-variables deficit of the staircase pair.

    For each truncation ``N``: the left-hand side is an enclosure of
    ``f(a_N(t)) - f(0)`` with ``f`` the certified inverse of the limit
    function, and the jump sum collects, over the first ``N`` atoms
    ``q_k <= t``, the terms ``f(a(q_k)) - f(a(q_k-))`` of the limit pair.
    Each such term is exactly zero: the truncated value ``a_M(q_k)`` lands
    inside the jump gap once ``M >= k`` (tail mass ``2**-M`` is below the
    gap width ``2**-k``), and ``f`` is constant on the gap. The deficit
    enclosure therefore reduces to the left-hand side, and its lower bound
    is non-decreasing in ``N`` by construction of the bisection.
    """
    if not 0.0 < t <= spec.horizon:
        raise DomainError(f"t={t} outside (0, {spec.horizon}]")
    ns = list(ns)
    if not ns or any(b <= a for a, b in zip(ns, ns[1:])) or ns[0] < 1:
        raise PreconditionError("truncation levels must be strictly increasing and >= 1")
    if delta <= 0.0:
        raise PreconditionError(f"delta must be positive, got {delta}")

    m_cap = max(4096, ns[-1] + (ns[-1] >> 3) + 64)
    t_fr = Fraction(t)
    f_zero = _inverse_exact(spec, Fraction(0), delta, m_cap)

    rows = []
    for n in ns:
        x_n = spec.eval_exact(t_fr, n)
        lhs = _inverse_exact(spec, x_n, delta, m_cap) - f_zero

        # gap-jump terms of the limit pair: certify each atom's containment
        # (k <= resolution and q_k <= t), then the flat-gap argument pins
        # the term to zero
        zero_terms = 0
        for k, q in enumerate(spec.atoms(n), start=1):
            if q <= t_fr:
                assert k <= m_cap
                zero_terms += 1
        jump_sum = Enclosure.exact(0.0)

        rows.append(DeficitRow(n=n, lhs=lhs, jump_sum=jump_sum,
                               deficit=lhs - jump_sum))
    return rows
