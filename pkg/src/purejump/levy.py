"""Driftless subordinator models and Poisson point process simulation.

Three parametric families are provided. The stable family is normalized
so its Laplace exponent is exactly ``lam**alpha`` (jump intensity
``alpha/gamma(1-alpha) * y**(-1-alpha)``), the gamma family has intensity
``shape * y**-1 * exp(-rate*y)``, and the compound Poisson family wraps a
named jump law. Stable and gamma carry infinite jump measure and no
drift; compound Poisson is finite-measure and is excluded from the test
suites that rely on the polarity of single points.

Simulation truncates jumps below ``eps`` and samples the remaining
Poisson point process exactly: the jump count is Poisson with mean
``T * tail(eps)``, times are uniform on ``(0, T]`` and sizes follow the
normalized tail via inverse-CDF sampling. The expected mass discarded by
the truncation is ``small_jump_bias``, which gives a certified
first-moment error bound.

Randomness is counter-based: each path owns the Philox stream keyed by
``(seed, stream index)``, so serial and parallel ensembles are
byte-identical and independent workers can draw disjoint paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy import integrate
from scipy.special import exp1, gamma as gamma_fn

from .errors import DomainError, PreconditionError
from .monotone import MonotoneFn

_EULER = 0.5772156649015329
_MASK64 = (1 << 64) - 1


def path_rng(seed: int, stream: int) -> np.random.Generator:
    """Philox generator keyed by (seed, stream); pure function of its args."""
    key = np.array([seed & _MASK64, stream & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _quad_one_minus_exp(density, lam: float, eps: float) -> float:
    """``int_eps^inf (1 - exp(-lam y)) density(y) dy`` split at a breakpoint
    so the wide dynamic range near a small ``eps`` does not defeat the
    extrapolation."""
    if lam == 0.0:
        return 0.0

    def f(y):
        return -math.expm1(-lam * y) * float(density(y))

    split = max(1.0 / lam, 16.0 * eps)
    v1, _ = integrate.quad(f, eps, split, epsabs=1e-13, epsrel=1e-11, limit=400)
    v2, _ = integrate.quad(f, split, np.inf, epsabs=1e-13, epsrel=1e-11, limit=400)
    return v1 + v2


# ---------------------------------------------------------------------------
# jump laws for the compound Poisson family
# ---------------------------------------------------------------------------

class JumpLaw:
    """Named distribution with an inverse-CDF; see the concrete laws."""

    name = "abstract"

    def tail(self, y):            # P(J > y)
        raise NotImplementedError

    def tail_closed(self, y):     # P(J >= y)
        raise NotImplementedError

    def tail_inverse(self, u):    # inf{y : P(J > y) < u}, u in (0, 1]
        raise NotImplementedError

    def mean_below(self, eps: float) -> float:   # E[J ; J <= eps]
        raise NotImplementedError

    def laplace(self, lam: float) -> float:      # E[exp(-lam J)]
        raise NotImplementedError

    def tail_integral(self, a: float, b: float) -> float:  # int_a^b P(J >= v) dv
        raise NotImplementedError


@dataclass(frozen=True)
class DiracJumps(JumpLaw):
    size: float = 1.0
    name = "dirac"

    def __post_init__(self):
        if not self.size > 0:
            raise DomainError("dirac jump size must be positive")

    def tail(self, y):
        return np.where(np.asarray(y, dtype=float) < self.size, 1.0, 0.0)

    def tail_closed(self, y):
        return np.where(np.asarray(y, dtype=float) <= self.size, 1.0, 0.0)

    def tail_inverse(self, u):
        return np.full_like(np.asarray(u, dtype=float), self.size)

    def mean_below(self, eps):
        return self.size if self.size <= eps else 0.0

    def laplace(self, lam):
        return math.exp(-lam * self.size)

    def tail_integral(self, a, b):
        return max(0.0, min(b, self.size) - min(a, self.size))

    def __str__(self):
        return f"dirac({self.size:g})"


@dataclass(frozen=True)
class ExponentialJumps(JumpLaw):
    scale: float = 1.0
    name = "exponential"

    def __post_init__(self):
        if not self.scale > 0:
            raise DomainError("exponential scale must be positive")

    def tail(self, y):
        return np.exp(-np.maximum(np.asarray(y, dtype=float), 0.0) / self.scale)

    tail_closed = tail

    def tail_inverse(self, u):
        return -self.scale * np.log(np.asarray(u, dtype=float))

    def mean_below(self, eps):
        z = eps / self.scale
        return self.scale * (1.0 - math.exp(-z) * (1.0 + z))

    def laplace(self, lam):
        return 1.0 / (1.0 + lam * self.scale)

    def tail_integral(self, a, b):
        if math.isinf(b):
            return self.scale * math.exp(-a / self.scale)
        return self.scale * (math.exp(-a / self.scale) - math.exp(-b / self.scale))

    def __str__(self):
        return f"exponential({self.scale:g})"


def unit_jumps() -> DiracJumps:
    return DiracJumps(1.0)


# ---------------------------------------------------------------------------
# subordinator models
# ---------------------------------------------------------------------------

class LevyModel:
    """Common surface of the parametric families; values are immutable."""

    infinite_measure: bool

    def tail(self, y):
        """Jump-intensity mass of ``(y, inf)`` for ``y > 0``."""
        raise NotImplementedError

    def tail_closed(self, y):
        """Mass of the closed interval ``[y, inf)``; differs from
        :meth:`tail` only for atomic jump laws."""
        return self.tail(y)

    def laplace_exponent(self, lam: float) -> float:
        raise NotImplementedError

    def small_jump_mass(self, eps: float) -> float:
        """First moment ``int_0^eps y PI(dy)`` of the discarded jumps."""
        raise NotImplementedError

    def truncated_intensity(self, eps: float) -> float:
        """Total rate ``PI((eps, inf))`` of the simulated jumps."""
        if eps <= 0.0:
            raise DomainError(
                f"{self}: truncation eps must be positive for an infinite measure")
        return float(self.tail(eps))

    def tail_inverse(self, w):
        """Size with ``PI([size, inf)) = w``; inverse-CDF sampling kernel."""
        raise NotImplementedError

    def sample_sizes(self, rng: np.random.Generator, n: int, eps: float) -> np.ndarray:
        lam_total = self.truncated_intensity(eps)
        return self.tail_inverse((1.0 - rng.random(n)) * lam_total)

    def sample_sizes_band(self, rng, n, lo: float, hi: float) -> np.ndarray:
        """Sizes conditioned to ``(lo, hi]``; used by coupled truncations."""
        w_hi = 0.0 if math.isinf(hi) else float(self.tail(hi))
        w_lo = self.truncated_intensity(lo)
        u = rng.random(n)
        return self.tail_inverse(w_hi + (1.0 - u) * (w_lo - w_hi))

    def tail_integral(self, a, b):
        """``int_a^b PI([v, inf)) dv`` with ``0 <= a <= b`` (closed form)."""
        raise NotImplementedError

    def truncated_laplace_exponent(self, lam: float, eps: float) -> float:
        """``int_(eps,inf) (1 - exp(-lam y)) PI(dy)`` by adaptive quadrature."""
        raise NotImplementedError

    def descriptor(self) -> str:
        raise NotImplementedError

    def __str__(self):
        return self.descriptor()


@dataclass(frozen=True)
class StableModel(LevyModel):
    """Stable subordinator with ``laplace_exponent(lam) = lam**alpha``."""

    alpha: float
    infinite_measure = True

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"stable index must lie in (0, 1), got {self.alpha}")

    @property
    def _c(self) -> float:
        # tail(y) = y**-alpha / gamma(1 - alpha)
        return 1.0 / gamma_fn(1.0 - self.alpha)

    def tail(self, y):
        y = np.asarray(y, dtype=float)
        return self._c * y ** (-self.alpha)

    def levy_density(self, y):
        y = np.asarray(y, dtype=float)
        return self._c * self.alpha * y ** (-1.0 - self.alpha)

    def laplace_exponent(self, lam):
        if lam < 0:
            raise DomainError("laplace argument must be >= 0")
        return float(lam) ** self.alpha

    def small_jump_mass(self, eps):
        if eps <= 0:
            raise DomainError("eps must be positive")
        a = self.alpha
        return self._c * a / (1.0 - a) * eps ** (1.0 - a)

    def tail_inverse(self, w):
        w = np.asarray(w, dtype=float)
        return (w / self._c) ** (-1.0 / self.alpha)

    def tail_integral(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        e = 1.0 - self.alpha
        if e == 0.5:
            return self._c / e * (np.sqrt(b) - np.sqrt(a))
        return self._c / e * (b ** e - a ** e)

    def truncated_laplace_exponent(self, lam, eps):
        return _quad_one_minus_exp(self.levy_density, lam, eps)

    def descriptor(self):
        return f"stable(alpha={self.alpha:g})"


@dataclass(frozen=True)
class GammaModel(LevyModel):
    """Gamma subordinator: intensity ``shape * y**-1 * exp(-rate*y)``."""

    shape: float
    rate: float
    infinite_measure = True

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise DomainError("gamma shape and rate must be positive")

    def tail(self, y):
        y = np.asarray(y, dtype=float)
        return self.shape * exp1(self.rate * y)

    def levy_density(self, y):
        y = np.asarray(y, dtype=float)
        return self.shape / y * np.exp(-self.rate * y)

    def laplace_exponent(self, lam):
        if lam < 0:
            raise DomainError("laplace argument must be >= 0")
        return self.shape * math.log1p(lam / self.rate)

    def small_jump_mass(self, eps):
        if eps <= 0:
            raise DomainError("eps must be positive")
        return self.shape / self.rate * -math.expm1(-self.rate * eps)

    def tail_inverse(self, w):
        """Invert ``shape * E1(rate*y) = w`` by safeguarded Newton.

        Converges to 1e-12 relative accuracy in the argument; the residual
        check at the end enforces the contract.
        """
        w = np.atleast_1d(np.asarray(w, dtype=float))
        target = w / self.shape
        # E1(z) ~ -log z - euler for small z, ~ exp(-z)/z for large z
        small = target > 1.0
        z = np.empty_like(target)
        z[small] = np.exp(-(target[small] + _EULER))
        big = ~small
        if np.any(big):
            ell = -np.log(np.minimum(target[big], 0.999))
            z0 = np.maximum(ell, 1.0)
            for _ in range(3):
                z0 = np.maximum(ell - np.log(z0), 1e-8)
            z[big] = z0
        for _ in range(80):
            resid = exp1(z) - target
            step = resid * z * np.exp(np.minimum(z, 700.0))
            step = np.clip(step, -0.9 * z, 9.0 * z)
            z_new = z + step
            if np.allclose(z_new, z, rtol=1e-14, atol=0.0):
                z = z_new
                break
            z = z_new
        if not np.allclose(exp1(z), target, rtol=1e-12, atol=1e-300):
            raise PreconditionError("gamma tail inversion failed to converge")
        return z / self.rate

    def tail_integral(self, a, b):
        # antiderivative of E1 is z*E1(z) - exp(-z); the limits at 0 and
        # infinity are -1 and 0
        def anti(v):
            z = self.rate * np.asarray(v, dtype=float)
            safe = np.where((z == 0.0) | np.isinf(z), 1.0, z)
            out = safe * exp1(safe) - np.exp(-safe)
            out = np.where(z == 0.0, -1.0, out)
            return np.where(np.isinf(z), 0.0, out)
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        return self.shape / self.rate * (anti(b) - anti(a))

    def truncated_laplace_exponent(self, lam, eps):
        return _quad_one_minus_exp(self.levy_density, lam, eps)

    def descriptor(self):
        return f"gamma(shape={self.shape:g},rate={self.rate:g})"


@dataclass(frozen=True)
class CompoundPoissonModel(LevyModel):
    """Finite-intensity subordinator; excluded from polarity-based suites."""

    rate: float
    law: JumpLaw = field(default_factory=unit_jumps)
    infinite_measure = False

    def __post_init__(self):
        if not self.rate > 0:
            raise DomainError("compound Poisson rate must be positive")

    def tail(self, y):
        return self.rate * self.law.tail(y)

    def tail_closed(self, y):
        return self.rate * self.law.tail_closed(y)

    def laplace_exponent(self, lam):
        if lam < 0:
            raise DomainError("laplace argument must be >= 0")
        return self.rate * (1.0 - self.law.laplace(lam))

    def small_jump_mass(self, eps):
        if eps <= 0:
            raise DomainError("eps must be positive")
        return self.rate * self.law.mean_below(eps)

    def truncated_intensity(self, eps):
        if eps < 0:
            raise DomainError("eps must be >= 0")
        return self.rate if eps == 0.0 else float(self.tail(eps))

    def tail_inverse(self, w):
        return self.law.tail_inverse(np.asarray(w, dtype=float) / self.rate)

    def tail_integral(self, a, b):
        return self.rate * self.law.tail_integral(float(a), float(b))

    def truncated_laplace_exponent(self, lam, eps):
        if eps == 0.0:
            return self.laplace_exponent(lam)
        if self.truncated_intensity(eps) == 0.0:
            return 0.0
        if isinstance(self.law, DiracJumps):
            kept = self.rate if self.law.size > eps else 0.0
            return kept * (1.0 - math.exp(-lam * self.law.size))
        if isinstance(self.law, ExponentialJumps):
            th = self.law.scale
            return self.rate * (math.exp(-eps / th)
                                - math.exp(-(lam + 1.0 / th) * eps) / (1.0 + lam * th))
        raise PreconditionError(
            f"no truncated laplace exponent for jump law {self.law}")

    def descriptor(self):
        return f"cpois(rate={self.rate:g},law={self.law})"


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PathRealization:
    """One simulated trajectory: sorted jump times and sizes on (0, T]."""

    model: str
    horizon: float
    eps: float
    seed: int
    stream: int
    times: np.ndarray
    sizes: np.ndarray

    def __post_init__(self):
        self.times.setflags(write=False)
        self.sizes.setflags(write=False)

    @property
    def count(self) -> int:
        return int(self.times.size)

    def terminal_value(self) -> float:
        return float(np.sum(self.sizes, dtype=np.longdouble))

    def levels(self) -> np.ndarray:
        """Cumulative values right after each jump."""
        return np.cumsum(self.sizes, dtype=np.longdouble).astype(np.float64)

    def to_monotone(self) -> MonotoneFn:
        return MonotoneFn.step(list(zip(self.times.tolist(), self.sizes.tolist())),
                               horizon=self.horizon)

    def same_jumps(self, other: "PathRealization") -> bool:
        return (np.array_equal(self.times, other.times)
                and np.array_equal(self.sizes, other.sizes))


def _draw_path_arrays(model, T, eps, rng):
    lam_total = model.truncated_intensity(eps)
    count = int(rng.poisson(T * lam_total))
    times = T * (1.0 - rng.random(count))          # lands in (0, T]
    sizes = model.sample_sizes(rng, count, eps)
    order = np.argsort(times, kind="stable")
    times, sizes = times[order], sizes[order]
    if count > 1:
        dup = np.flatnonzero(times[1:] == times[:-1])
        if dup.size:
            # two uniforms colliding in float: merge into one jump
            keep = np.ones(count, dtype=bool)
            for i in dup:
                sizes[i + 1] += sizes[i]
                keep[i] = False
            times, sizes = times[keep], sizes[keep]
    return times, sizes


def simulate_path(model: LevyModel, T: float, eps: float, seed: int,
                  stream: int = 0) -> PathRealization:
    """Draw one truncated path; deterministic given ``(seed, stream)``.

    The stream draws, in order: the Poisson count, the uniform times, the
    uniform size variables. ``eps`` must be positive for infinite-measure
    models and may be 0 for compound Poisson.
    """
    if not T > 0:
        raise DomainError(f"horizon must be positive, got {T}")
    rng = path_rng(seed, stream)
    times, sizes = _draw_path_arrays(model, T, eps, rng)
    return PathRealization(model=model.descriptor(), horizon=float(T),
                           eps=float(eps), seed=int(seed), stream=int(stream),
                           times=times, sizes=sizes)


def iter_paths(model: LevyModel, T: float, eps: float, seed: int, n_paths: int,
               start_stream: int = 0) -> Iterator[PathRealization]:
    for i in range(n_paths):
        yield simulate_path(model, T, eps, seed, start_stream + i)


def couple_paths(model: LevyModel, T: float, eps_list, seed: int,
                 stream: int = 0):
    """Coupled truncations by superposition of disjoint size bands.

    Returns one path per requested ``eps``, all built from the same band
    draws, so the path at a finer truncation dominates every coarser one
    pointwise.
    """
    eps_sorted = sorted(set(float(e) for e in eps_list))
    if not eps_sorted or eps_sorted[0] <= 0.0 and model.infinite_measure:
        raise DomainError("all eps must be positive for infinite-measure models")
    bounds = eps_sorted + [math.inf]
    band_jumps = []
    for b, (lo, hi) in enumerate(zip(bounds[:-1], bounds[1:])):
        rng = path_rng(seed, (stream << 20) | b)
        w_lo = model.truncated_intensity(lo)
        w_hi = 0.0 if math.isinf(hi) else float(model.tail(hi))
        count = int(rng.poisson(T * (w_lo - w_hi)))
        times = T * (1.0 - rng.random(count))
        sizes = model.sample_sizes_band(rng, count, lo, hi)
        band_jumps.append((times, sizes))
    out = []
    for i, eps in enumerate(eps_sorted):
        times = np.concatenate([t for t, _ in band_jumps[i:]])
        sizes = np.concatenate([s for _, s in band_jumps[i:]])
        order = np.argsort(times, kind="stable")
        out.append(PathRealization(model=model.descriptor(), horizon=float(T),
                                   eps=eps, seed=int(seed), stream=int(stream),
                                   times=times[order], sizes=sizes[order]))
    return out


# ---------------------------------------------------------------------------
# module-level operation surface
# ---------------------------------------------------------------------------

def levy_tail(model: LevyModel, y: float) -> float:
    """``PI((y, inf))`` for ``y > 0``."""
    if y <= 0:
        raise DomainError(f"tail argument must be positive, got {y}")
    return float(model.tail(y))


def laplace_exponent(model: LevyModel, lam: float) -> float:
    return model.laplace_exponent(lam)


def small_jump_bias(model: LevyModel, T: float, eps: float) -> float:
    """Expected total mass ``T * int_0^eps y PI(dy)`` lost to truncation."""
    if not T >= 0:
        raise DomainError(f"horizon must be >= 0, got {T}")
    return T * model.small_jump_mass(eps)


def truncated_laplace_exponent(model: LevyModel, lam: float, eps: float) -> float:
    """Quadrature value of ``int_(eps,inf) (1 - exp(-lam y)) PI(dy)``."""
    if lam < 0:
        raise DomainError("laplace argument must be >= 0")
    return model.truncated_laplace_exponent(lam, eps)
