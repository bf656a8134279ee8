"""Pathwise Stieltjes integration and the integration-by-parts check.

Integrators are either finite-variation paths (a difference of two
monotone representations, integrated exactly on the merged breakpoint
grid) or smooth deterministic paths (a value/derivative pair, integrated
by adaptive quadrature split at the integrand's breakpoints). The
integrand is always taken through its left limits at jump times.

``integration_by_parts_residual`` verifies the product identity

    X_t k(A_t) - X_0 k(A_0) = int_0^t k(A_{s-}) dX_s
                              + sum_{s <= t} X_s (k(A_s) - k(A_{s-}))

for purely discontinuous ``A``, where the sum runs over jump times of the
composition and the factor is the post-jump value of ``X``. The
precondition that the total-variation measure of ``k`` puts no mass on
the exactly-accessible levels of the realized path is checked through the
accessibility machinery (with tolerance zero this is a per-path
strengthening of the ensemble condition, and it holds automatically for
finite-step paths).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy import integrate

from .accessibility import accessible_mass
from .errors import DomainError, PreconditionError, ResourceError
from .monotone import FiniteVariationFn, MonotoneFn, compose, range_report

SMOOTH_REL_TOL = 1e-10
FV_RESIDUAL_BUDGET = 1e-10


@dataclass(frozen=True)
class SmoothPath:
    """Deterministic continuously differentiable integrator."""

    fn: Callable[[float], float]
    deriv: Callable[[float], float]
    horizon: float
    label: str = "smooth"

    def eval(self, t: float) -> float:
        return self.fn(t)


IntegratorPath = Union[FiniteVariationFn, MonotoneFn, SmoothPath]


def _as_fv(h) -> FiniteVariationFn:
    if isinstance(h, FiniteVariationFn):
        return h
    if isinstance(h, MonotoneFn):
        return FiniteVariationFn.from_monotone(h)
    raise DomainError(f"integrand must be monotone or finite-variation, got {type(h)}")


def _breakpoints(fv: FiniteVariationFn, upto: float) -> np.ndarray:
    parts = [fv.pos._kt, fv.pos._jt, fv.neg._kt, fv.neg._jt]
    ev = np.unique(np.concatenate(parts + [np.array([0.0, upto])]))
    return ev[(ev >= 0.0) & (ev <= upto)]


@dataclass(frozen=True)
class PathwiseIntegral:
    value: float
    error_bound: float


def pathwise_integral(h, X: IntegratorPath, t: float) -> PathwiseIntegral:
    """``int_0^t h(s-) dX_s`` for an integrand with left limits.

    Exact (round-off only) for finite-variation ``X``; adaptive quadrature
    with relative target 1e-10 for smooth deterministic ``X``.
    """
    hf = _as_fv(h)
    if t < 0.0 or t > hf.horizon:
        raise DomainError(f"t={t} outside the integrand domain")

    if isinstance(X, SmoothPath):
        if t > X.horizon:
            raise DomainError(f"t={t} beyond integrator horizon")
        pieces = _breakpoints(hf, t)
        total, bound = 0.0, 0.0
        for a, b in zip(pieces[:-1], pieces[1:]):
            if b <= a:
                continue
            val, err = integrate.quad(lambda s: hf.eval(s) * X.deriv(s), a, b,
                                      epsabs=1e-13, epsrel=SMOOTH_REL_TOL,
                                      limit=200)
            total += val
            bound += err
        scale = max(abs(total), 1e-8)
        if bound > 1e-8 * scale:
            raise ResourceError("quadrature failed the relative target",
                                best=PathwiseIntegral(total, bound))
        return PathwiseIntegral(total, bound)

    Xf = _as_fv(X)
    if t > Xf.horizon:
        raise DomainError(f"t={t} beyond integrator horizon")

    # atoms of dX against left limits of the integrand
    total = np.longdouble(0.0)
    for part, sign in ((Xf.pos, 1.0), (Xf.neg, -1.0)):
        jt = part._jt
        n = int(np.searchsorted(jt, t, side="right"))
        if n:
            s = jt[:n]
            total += sign * np.sum(
                np.asarray(hf.eval_left(s), dtype=np.longdouble)
                * np.asarray(part._js[:n], dtype=np.longdouble))

    # absolutely continuous part on the merged grid: the integrand is
    # linear between breakpoints, so the trapezoid value is exact
    ev = np.unique(np.concatenate((_breakpoints(hf, t), _breakpoints(Xf, t))))
    for a, b in zip(ev[:-1], ev[1:]):
        if b <= a:
            continue
        slope = Xf.pos.slope_at(0.5 * (a + b)) - Xf.neg.slope_at(0.5 * (a + b))
        if slope == 0.0:
            continue
        h_right = hf.eval(a)
        h_leftlim = hf.eval_left(b)
        total += np.longdouble(slope) * 0.5 * (np.longdouble(h_right)
                                               + np.longdouble(h_leftlim)) * (b - a)
    return PathwiseIntegral(float(total), FV_RESIDUAL_BUDGET)


@dataclass(frozen=True)
class IbpResult:
    residual: float
    tolerance_budget: float


def integration_by_parts_residual(X: IntegratorPath, A: MonotoneFn,
                                  k: FiniteVariationFn, t: float) -> IbpResult:
    """Residual of the product formula; near zero when the preconditions hold.

    Raises :class:`PreconditionError` (not a numeric residual) when ``A``
    is not purely discontinuous or when ``dk`` charges the exactly
    accessible levels of ``A``.
    """
    if not 0.0 < t <= A.horizon:
        raise DomainError(f"t={t} outside (0, horizon]")
    if not range_report(A, t).pure_jump_flag:
        raise PreconditionError("integrand path must be purely discontinuous")
    if accessible_mass(k, A, 0.0) != 0.0:
        raise PreconditionError(
            "total variation of k charges left-accessible levels of the path")

    comp = FiniteVariationFn(compose(k.pos, A), compose(k.neg, A))

    # product endpoints
    if isinstance(X, SmoothPath):
        x_t, x_0 = X.eval(t), X.eval(0.0)
    else:
        Xf = _as_fv(X)
        x_t, x_0 = Xf.eval(t), Xf.eval(0.0)
    lhs = x_t * comp.eval(t) - x_0 * comp.eval(0.0)

    integral = pathwise_integral(comp, X, t)

    # jump-sum with the post-jump integrator value; composition jumps sit
    # at jump times of A because A is a pure step path
    jt = np.unique(np.concatenate((comp.pos._jt, comp.neg._jt)))
    jt = jt[jt <= t]
    jump_sum = np.longdouble(0.0)
    if jt.size:
        va = A.eval(jt)
        vl = A.eval_left(jt)
        dk = (np.asarray(k.eval(va), dtype=np.longdouble)
              - np.asarray(k.eval(vl), dtype=np.longdouble))
        if isinstance(X, SmoothPath):
            xs = np.array([X.eval(float(s)) for s in jt], dtype=np.longdouble)
        else:
            xs = np.asarray(_as_fv(X).eval(jt), dtype=np.longdouble)
        jump_sum = np.sum(xs * dk)

    residual = float(np.longdouble(lhs) - np.longdouble(integral.value) - jump_sum)
    budget = (integral.error_bound if isinstance(X, SmoothPath)
              else FV_RESIDUAL_BUDGET)
    return IbpResult(residual=residual, tolerance_budget=budget)
