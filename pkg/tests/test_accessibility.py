import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from purejump.accessibility import (
    accessible_mass,
    estimate_accessibility_prob,
    is_left_accessible,
)
from purejump.errors import DomainError, PreconditionError
from purejump.levy import CompoundPoissonModel, DiracJumps, StableModel
from purejump.monotone import MonotoneFn, change_of_variables_residual

STABLE_HALF = StableModel(0.5)


# -- is_left_accessible ----------------------------------------------------------

def test_identity_every_reached_level_accessible():
    a = MonotoneFn.identity(1.0)
    assert is_left_accessible(a, 0.5, 0.0)
    assert is_left_accessible(a, 1.0, 0.0)
    assert not is_left_accessible(a, 1.5, 0.0)


def test_single_step_never_accessible():
    a = MonotoneFn.step([(0.5, 2.0)], horizon=1.0)
    assert not is_left_accessible(a, 1.0, 0.0)
    assert not is_left_accessible(a, 2.0, 0.0)


def test_staircase_truncation_with_tail_tolerance():
    # values of the truncated staircase come within the tail bound of the
    # limit, so a level just above a partial sum is tol-accessible at the
    # tail resolution
    from purejump.staircase import StaircaseSpec, build_truncated
    spec = StaircaseSpec(horizon=1.0)
    n = 12
    a = build_truncated(spec, n)
    t0 = 0.45   # continuity point
    x = a.eval(t0) + 2.0 ** -(n + 1)
    assert is_left_accessible(a, x, tol=2.0 ** -n)
    assert not is_left_accessible(a, x, tol=0.0)


def test_domain_checks():
    a = MonotoneFn.identity(1.0)
    with pytest.raises(DomainError):
        is_left_accessible(a, 0.0, 0.0)
    with pytest.raises(DomainError):
        is_left_accessible(a, 0.5, -1.0)


@st.composite
def step_fns(draw):
    n = draw(st.integers(1, 10))
    times = sorted(draw(st.lists(st.floats(0.01, 3.99), min_size=n, max_size=n,
                                 unique=True)))
    sizes = draw(st.lists(st.floats(0.01, 2.0), min_size=n, max_size=n))
    return MonotoneFn.step(list(zip(times, sizes)), horizon=4.0)


@given(step_fns(), st.floats(0.01, 10.0))
@settings(max_examples=200, deadline=None)
def test_exact_criterion_false_on_steps(a, x):
    assert not is_left_accessible(a, x, 0.0)


@given(step_fns(), st.floats(0.01, 10.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
@settings(max_examples=100, deadline=None)
def test_monotone_in_tolerance(a, x, tol1, tol2):
    tol1, tol2 = min(tol1, tol2), max(tol1, tol2)
    if is_left_accessible(a, x, tol1):
        assert is_left_accessible(a, x, tol2)


# -- accessible_mass ------------------------------------------------------------------

def test_mass_zero_for_step_pairs():
    f = MonotoneFn.step([(0.5, 1.0), (1.5, 2.0)], horizon=4.0)
    a = MonotoneFn.step([(0.2, 0.9), (0.8, 1.1)], horizon=4.0)
    assert accessible_mass(f, a, 0.0) == 0.0


def test_mass_atom_on_identity_range():
    f = MonotoneFn.step([(0.5, 2.0)], horizon=6.0)
    assert accessible_mass(f, MonotoneFn.identity(1.0), 0.0) == 2.0


def test_mass_atom_beyond_range():
    f = MonotoneFn.step([(5.0, 2.0)], horizon=6.0)
    assert accessible_mass(f, MonotoneFn.identity(1.0), 0.0) == 0.0


def test_mass_continuous_part_against_identity():
    # identity path makes (0, 1] accessible; a unit-slope f on [0, 2]
    # should report mass close to 1 from the accessible band
    f = MonotoneFn.identity(2.0)
    a = MonotoneFn.identity(1.0)
    mass = accessible_mass(f, a, 0.0)
    assert mass == pytest.approx(1.0, abs=2e-3)


# -- dichotomy harness ------------------------------------------------------------------

def test_dichotomy_zero_mass_implies_zero_deficit():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(1, 20))
        f = MonotoneFn.step(
            [(float(x), float(w)) for x, w in
             zip(np.sort(rng.uniform(0.05, 20.0, n)), rng.uniform(0.05, 2.0, n))],
            horizon=25.0)
        m = int(rng.integers(1, 30))
        a = MonotoneFn.step(
            [(float(x), float(w)) for x, w in
             zip(np.sort(rng.uniform(0.01, 3.99, m)), rng.uniform(0.01, 1.0, m))],
            horizon=4.0)
        assert accessible_mass(f, a, 0.0) == 0.0
        res = change_of_variables_residual(f, a, 4.0)
        assert abs(res.deficit) <= 1e-12


def test_dichotomy_identity_with_atoms_in_range():
    f = MonotoneFn.step([(0.25, 1.0), (0.75, 3.0)], horizon=2.0)
    a = MonotoneFn.identity(1.0)
    assert accessible_mass(f, a, 0.0) == 4.0
    res = change_of_variables_residual(f, a, 1.0)
    assert res.deficit >= 3.0 - 1e-12


# -- ensemble estimation -------------------------------------------------------------------

def test_cpois_probability_zero():
    model = CompoundPoissonModel(1.0, DiracJumps(1.0))
    rep = estimate_accessibility_prob(model, [0.5], n_paths=200, tol=0.0,
                                      eps=0.0, seed=3)
    assert rep.probabilities == (0.0,)
    assert rep.stderrs == (0.0,)


def test_levels_beyond_all_paths_probability_zero():
    rep = estimate_accessibility_prob(STABLE_HALF, [1e12], n_paths=100,
                                      tol=1e-2, eps=1e-4, seed=5)
    assert rep.probabilities == (0.0,)


def test_tolerance_sweep_non_increasing():
    probs = []
    for tol in (1e-1, 1e-2, 1e-3):
        rep = estimate_accessibility_prob(STABLE_HALF, [1.0], n_paths=400,
                                          tol=tol, eps=1e-6, seed=11)
        probs.append(rep.probabilities[0])
    assert probs == sorted(probs, reverse=True)
    assert probs[0] > 0.0


def test_tol_below_resolution_rejected():
    with pytest.raises(PreconditionError):
        estimate_accessibility_prob(STABLE_HALF, [1.0], n_paths=10,
                                    tol=1e-12, eps=1e-2, seed=1)


def test_report_reproducible():
    r1 = estimate_accessibility_prob(STABLE_HALF, [0.5, 1.0], n_paths=50,
                                     tol=1e-2, eps=1e-4, seed=9)
    r2 = estimate_accessibility_prob(STABLE_HALF, [0.5, 1.0], n_paths=50,
                                     tol=1e-2, eps=1e-4, seed=9)
    assert r1 == r2
    assert list(r1.as_rows())[0][0] == 0.5
