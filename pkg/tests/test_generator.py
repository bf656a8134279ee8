import math

import numpy as np
import pytest

from purejump.errors import DomainError, PreconditionError
from purejump.generator import (
    GeneratorValue,
    SmoothTestFn,
    bounded_exp_fn,
    classical_generator,
    compensator_residual,
    eval_extended,
    exp_decay,
    extended_generator,
    extended_generator_levels,
    martingale_test,
    small_jump_generator_gap,
)
from purejump.levy import (
    CompoundPoissonModel,
    DiracJumps,
    GammaModel,
    StableModel,
    iter_paths,
    simulate_path,
)
from purejump.monotone import FiniteVariationFn, MonotoneFn

STABLE_HALF = StableModel(0.5)
GAMMA_11 = GammaModel(1.0, 1.0)


def shift_fn(f: MonotoneFn, x: float) -> MonotoneFn:
    """z -> f(x + z): atoms/knots shifted left, absorbed mass at origin."""
    horizon = f.horizon - x
    jumps = [(th - x, w) for th, w in f.jumps if th > x]
    knots = [(max(u - x, 0.0), s) for u, s in f.knots if True]
    merged = {}
    for u, s in knots:
        merged[u] = s
    return MonotoneFn(origin_value=f.eval(x), knots=tuple(sorted(merged.items())),
                      jumps=tuple(jumps), horizon=horizon)


# -- classical generator --------------------------------------------------------

def test_classical_stable_exp():
    g = exp_decay(1.0)
    res = classical_generator(STABLE_HALF, g, 0.0)
    assert res.value == pytest.approx(-1.0, abs=1e-8)
    assert res.error_bound <= 1e-7


def test_classical_constant_is_zero():
    g = SmoothTestFn(fn=lambda z: 2.0, deriv=lambda z: 0.0, sup_deriv=0.0)
    for model in (STABLE_HALF, GAMMA_11, CompoundPoissonModel(1.0, DiracJumps(1.0))):
        assert classical_generator(model, g, 1.0).value == pytest.approx(0.0, abs=1e-12)


def test_classical_gamma_exp():
    res = classical_generator(GAMMA_11, exp_decay(1.0), 0.0)
    assert res.value == pytest.approx(-math.log(2.0), abs=1e-8)


def test_classical_translation_times_decay():
    # for g = exp(-z) the generator inherits the e^{-x} factor
    res0 = classical_generator(STABLE_HALF, exp_decay(1.0), 0.0)
    res1 = classical_generator(STABLE_HALF, exp_decay(1.0), 1.3)
    assert res1.value == pytest.approx(math.exp(-1.3) * res0.value, rel=1e-7)


def test_classical_cpois_unit():
    model = CompoundPoissonModel(2.0, DiracJumps(1.0))
    res = classical_generator(model, exp_decay(1.0), 0.0)
    assert res.value == pytest.approx(2.0 * (math.exp(-1.0) - 1.0), rel=1e-12)


# -- extended generator -----------------------------------------------------------

def test_extended_step_closed_form():
    f = MonotoneFn.step([(1.0, 1.0)], horizon=5.0)
    res = extended_generator(STABLE_HALF, f, 0.0)
    assert res.value == pytest.approx(1.0 / math.sqrt(math.pi), abs=1e-9)
    assert not res.diverged


def test_extended_constant_zero():
    f = MonotoneFn.constant(3.0, horizon=5.0)
    assert extended_generator(STABLE_HALF, f, 0.0).value == 0.0


def test_extended_smoothish_matches_laplace():
    f = bounded_exp_fn(1.0)
    res = extended_generator(STABLE_HALF, f, 0.0)
    assert res.value == pytest.approx(1.0, abs=2e-4)
    res_x = extended_generator(STABLE_HALF, f, 0.7)
    assert res_x.value == pytest.approx(math.exp(-0.7), abs=2e-4)


def test_extended_positivity_random_fns():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = rng.integers(1, 6)
        atoms = sorted(rng.uniform(0.1, 4.0, n).tolist())
        f = MonotoneFn.step([(a, rng.uniform(0.1, 2.0)) for a in atoms], horizon=5.0)
        for x in rng.uniform(0.0, 5.0, 3):
            assert extended_generator(GAMMA_11, f, float(x)).value >= 0.0


def test_extended_translation_structure():
    f = MonotoneFn.step([(1.0, 1.0), (2.5, 0.5)], horizon=5.0)
    for x in (0.3, 1.0, 2.0):
        direct = extended_generator(STABLE_HALF, f, x).value
        shifted = extended_generator(STABLE_HALF, shift_fn(f, x), 0.0).value
        assert direct == pytest.approx(shifted, abs=1e-12)


def test_extended_beyond_horizon_plateau():
    f = MonotoneFn.step([(1.0, 1.0)], horizon=2.0)
    assert extended_generator(STABLE_HALF, f, 3.0).value == 0.0


def test_extended_agrees_with_classical_dynkin():
    # 1 - exp(-z) is both a C^1 function (via -exp(-z) + 1) and a bounded
    # monotone function; the two routes must agree to the combined bound
    f = bounded_exp_fn(1.0, n_knots=2049)
    g = SmoothTestFn(fn=lambda z: 1.0 - math.exp(-z),
                     deriv=lambda z: math.exp(-z), sup_deriv=1.0)
    for model in (STABLE_HALF, GAMMA_11):
        for x in (0.0, 0.9):
            ext = extended_generator(model, f, x).value
            cla = classical_generator(model, g, x).value
            assert ext == pytest.approx(cla, abs=5e-5)


def test_extended_fv_linearity():
    pos = MonotoneFn.step([(1.0, 2.0)], horizon=5.0)
    neg = MonotoneFn.step([(2.0, 1.0)], horizon=5.0)
    k = FiniteVariationFn(pos, neg)
    val = extended_generator(STABLE_HALF, k, 0.0)
    expect = (extended_generator(STABLE_HALF, pos, 0.0).value
              - extended_generator(STABLE_HALF, neg, 0.0).value)
    assert val.value == pytest.approx(expect, rel=1e-12)
    assert not val.diverged


def test_extended_domain_error():
    with pytest.raises(DomainError):
        extended_generator(STABLE_HALF, MonotoneFn.identity(1.0), -1.0)


def test_generator_value_guard():
    with pytest.raises(DomainError):
        GeneratorValue(1.0, -1.0)


def test_gap_plus_truncated_equals_full():
    # the small-jump gap is exactly the full generator minus the
    # eps-truncated one, cross-checked against a quadrature of the band
    from scipy import integrate
    f = MonotoneFn.step([(0.5, 1.0)], horizon=4.0)
    eps = 0.3
    zs = np.array([0.25, 0.4, 0.45])
    gap = small_jump_generator_gap(STABLE_HALF, f, zs, eps)
    for z, gval in zip(zs, gap):
        d = 0.5 - z
        band, _ = integrate.quad(lambda y: float(STABLE_HALF.levy_density(y)),
                                 d, eps)
        expect = band if d <= eps else 0.0
        assert gval == pytest.approx(expect, rel=1e-9, abs=1e-12)


# -- compensator residual -----------------------------------------------------------

def test_compensator_zero_jump_path():
    f = MonotoneFn.step([(1.0, 1.0)], horizon=4.0)
    path = simulate_path(CompoundPoissonModel(1e-6, DiracJumps(1.0)), 1.0, 0.0, seed=3)
    assert path.count == 0
    assert compensator_residual(CompoundPoissonModel(1e-6), f, 0.0, path) == 0.0


def test_compensator_step_paths():
    f = MonotoneFn.step([(0.7, 1.0), (2.3, 0.5)], horizon=6.0)
    for i, p in enumerate(iter_paths(STABLE_HALF, 1.0, 1e-3, seed=8, n_paths=50)):
        res = compensator_residual(STABLE_HALF, f, 0.2, p)
        assert abs(res) <= 1e-12


def test_compensator_random_sweep():
    rng = np.random.default_rng(11)
    worst = 0.0
    for i in range(200):
        n = int(rng.integers(1, 8))
        atoms = sorted(set(rng.uniform(0.05, 6.0, n).tolist()))
        f = MonotoneFn.step([(a, float(rng.uniform(0.05, 1.5))) for a in atoms],
                            horizon=8.0)
        p = simulate_path(STABLE_HALF, 1.0, 1e-2, seed=12, stream=i)
        worst = max(worst, abs(compensator_residual(STABLE_HALF, f, 0.0, p)))
    assert worst <= 1e-11


# -- martingale test -------------------------------------------------------------------

def test_martingale_smoothish_small():
    f = bounded_exp_fn(1.0)
    rep = martingale_test(STABLE_HALF, f, x=0.0, t=1.0, n_paths=4000, eps=1e-6,
                          seed=101, target_stderr=6e-3, f_label="1-exp(-z)")
    oracle = 1.0 - math.exp(-1.0)
    assert rep.passed
    assert abs(rep.lhs - oracle) <= 3.0 * rep.lhs_stderr + 1e-3
    assert abs(rep.rhs - oracle) <= 3.0 * rep.rhs_stderr + 1e-3


def test_martingale_constant_f():
    f = MonotoneFn.constant(1.0, horizon=5.0)
    rep = martingale_test(GAMMA_11, f, x=0.0, t=1.0, n_paths=500, eps=1e-6,
                          seed=5, target_stderr=1e-2)
    assert rep.lhs == 0.0 and rep.rhs == 0.0 and rep.passed


def test_martingale_step_f_cross_estimators():
    f = MonotoneFn.step([(2.0, 1.0)], horizon=8.0)
    rep = martingale_test(STABLE_HALF, f, x=0.0, t=1.0, n_paths=8000, eps=1e-5,
                          seed=7, target_stderr=2e-2, f_label="step@2")
    assert rep.passed
    # terminal law of the stable(1/2) subordinator is Levy with
    # P(S_1 <= y) = erfc(1/(2 sqrt(y)))
    oracle = math.erf(1.0 / (2.0 * math.sqrt(2.0)))
    assert abs(rep.lhs - oracle) <= 4.0 * rep.lhs_stderr + 2e-3


def test_martingale_eps_precondition():
    f = bounded_exp_fn(1.0)
    with pytest.raises(PreconditionError):
        martingale_test(STABLE_HALF, f, 0.0, 1.0, 100, eps=1e-2, seed=1,
                        target_stderr=1e-4)


def test_martingale_report_text():
    f = MonotoneFn.constant(1.0, horizon=5.0)
    rep = martingale_test(GAMMA_11, f, 0.0, 1.0, 100, eps=1e-6, seed=5,
                          target_stderr=1e-1)
    text = "\n".join(rep.as_text_lines())
    for key in ("lhs=", "rhs=", "z_score=", "truncation_allowance=", "passed="):
        assert key in text


def test_eval_extended_clamps():
    f = MonotoneFn.step([(1.0, 1.0)], horizon=2.0)
    assert eval_extended(f, np.array([5.0]))[0] == f.eval(2.0)
