import math
from fractions import Fraction

import pytest

from purejump.errors import DomainError, PreconditionError, ResourceError
from purejump.staircase import (
    Enclosure,
    StaircaseSpec,
    build_truncated,
    certified_eval,
    certified_inverse,
    deficit_scan,
)


@pytest.fixture(scope="module")
def unit_spec():
    return StaircaseSpec(horizon=1.0)


@pytest.fixture(scope="module")
def wide_spec():
    return StaircaseSpec(horizon=2.0)


# -- enumeration --------------------------------------------------------------

def test_enumeration_prefix(wide_spec):
    # Calkin-Wilf order with values >= horizon dropped
    expected = [Fraction(1), Fraction(1, 2), Fraction(1, 3), Fraction(3, 2),
                Fraction(2, 3), Fraction(1, 4), Fraction(4, 3), Fraction(3, 5)]
    assert wide_spec.atoms(8) == expected


def test_enumeration_distinct_and_reproducible():
    a = StaircaseSpec(horizon=1.0).atoms(500)
    b = StaircaseSpec(horizon=1.0).atoms(500)
    assert a == b
    assert len(set(a)) == 500
    assert all(0 < q < 1 for q in a)


# -- build_truncated ------------------------------------------------------------

def test_truncation_single_atom(wide_spec):
    a1 = build_truncated(wide_spec, 1)
    assert a1.eval(2.0) == 0.5
    assert a1.eval(0.5) == 0.0


def test_truncation_total_mass(wide_spec):
    a = build_truncated(wide_spec, 20)
    assert a.eval(wide_spec.horizon) == 1.0 - 2.0 ** -20


def test_truncation_float_cap(unit_spec):
    with pytest.raises(DomainError):
        build_truncated(unit_spec, 2000)


# -- certified_eval ---------------------------------------------------------------

def test_eval_at_zero(unit_spec):
    e = certified_eval(unit_spec, 0.0, 12)
    assert e.lo == 0.0 and e.hi == 2.0 ** -12


def test_eval_at_horizon(unit_spec):
    e = certified_eval(unit_spec, unit_spec.horizon, 10)
    assert e.lo == 1.0 - 2.0 ** -10 and e.hi == 1.0


def test_eval_width(unit_spec):
    e = certified_eval(unit_spec, 0.4, 30)
    assert e.width == pytest.approx(2.0 ** -30, abs=1e-18)


def test_eval_brute_force_containment(wide_spec):
    # partial sums at much larger resolution must land inside the enclosure
    e = certified_eval(wide_spec, 1.0, 30)
    deep = wide_spec.eval_exact(Fraction(1), 4000)
    assert Fraction(e.lo) <= deep <= Fraction(e.hi)


def test_eval_nesting(unit_spec):
    # refining the truncation keeps values inside the coarse bracket
    for t in (0.1, 0.37, 0.9):
        for n1, n2 in [(5, 9), (9, 40), (13, 200)]:
            lo = unit_spec.eval_exact(Fraction(t), n1)
            hi = lo + Fraction(1, 1 << n1)
            mid = unit_spec.eval_exact(Fraction(t), n2)
            assert lo <= mid <= hi


# -- certified_inverse ---------------------------------------------------------------

def test_inverse_at_zero(unit_spec):
    e = certified_inverse(unit_spec, 0.0, delta=1e-7)
    assert e.lo == 0.0 and e.hi <= 1e-6


def test_inverse_near_total_mass(unit_spec):
    # the inverse of 1 - 2**-40 is the largest atom among the first 40,
    # which is 5/6 for the unit-horizon enumeration
    e = certified_inverse(unit_spec, 1.0 - 2.0 ** -40, delta=1e-6)
    assert e.hi <= unit_spec.horizon
    assert e.contains(5.0 / 6.0)


def test_inverse_width_and_certificate(unit_spec):
    x = 0.3
    e = certified_inverse(unit_spec, x, delta=1e-6)
    assert e.width <= 1e-6
    # the bracket is self-validating as interval inequalities
    res = 2.0 ** -64
    assert certified_eval(unit_spec, e.lo, 64).hi <= x + res
    assert certified_eval(unit_spec, e.hi, 64).lo > x - res


def test_inverse_domain(unit_spec):
    with pytest.raises(DomainError):
        certified_inverse(unit_spec, 1.0)
    with pytest.raises(DomainError):
        certified_inverse(unit_spec, -0.1)


def test_inverse_resource_error_carries_best(unit_spec):
    with pytest.raises(ResourceError) as exc:
        certified_inverse(unit_spec, 0.3, delta=1e-300)
    assert isinstance(exc.value.best, Enclosure)


def test_inverse_of_eval_contains_t(unit_spec):
    # round trip through the limit function brackets the original time
    for t in (0.2, 0.5, 0.77):
        val = certified_eval(unit_spec, t, 80)
        lo_side = certified_inverse(unit_spec, val.lo, delta=1e-9)
        hi_side = certified_inverse(unit_spec, val.hi, delta=1e-9)
        assert lo_side.lo <= t <= hi_side.hi


# -- enclosure arithmetic ----------------------------------------------------------

def test_enclosure_outward_ops():
    a = Enclosure(1.0, 1.5)
    b = Enclosure(0.25, 0.5)
    s = a + b
    assert s.lo <= 1.25 and s.hi >= 2.0
    d = a - b
    assert d.lo <= 0.5 and d.hi >= 1.25
    assert Enclosure(0.0, 1.0).contains(0.5)
    with pytest.raises(DomainError):
        Enclosure(1.0, 0.0)


# -- deficit scan --------------------------------------------------------------------

def test_deficit_rows_monotone_and_consistent(unit_spec):
    rows = deficit_scan(unit_spec, 1.0, [16, 64, 256], delta=1e-8)
    lower = [r.deficit.lo for r in rows]
    assert lower == sorted(lower)
    for r in rows:
        assert r.jump_sum.lo == 0.0 and r.jump_sum.hi == 0.0
        assert r.jump_sum.hi + r.deficit.lo <= r.lhs.hi
        assert r.deficit.lo >= -(r.lhs.width + r.jump_sum.width)


def test_deficit_small_n_positive(unit_spec):
    (row,) = deficit_scan(unit_spec, 1.0, [4], delta=1e-6)
    assert row.deficit.hi > 0.0
    assert row.lhs.lo > 0.0


def test_deficit_known_values(unit_spec):
    # the lhs converges to the largest atom position of the truncation:
    # at N=16 the maximum enumerated rational below 1 is 4/5
    (row,) = deficit_scan(unit_spec, 1.0, [16], delta=1e-8)
    assert row.deficit.lo == pytest.approx(0.8, abs=1e-7)


def test_deficit_preconditions(unit_spec):
    with pytest.raises(PreconditionError):
        deficit_scan(unit_spec, 1.0, [16, 16], delta=1e-8)
    with pytest.raises(PreconditionError):
        deficit_scan(unit_spec, 1.0, [16], delta=0.0)
    with pytest.raises(DomainError):
        deficit_scan(unit_spec, 2.0, [16], delta=1e-8)
