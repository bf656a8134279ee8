"""Compact text descriptors for models and test functions.

Used by the CLI and the experiment fixtures so a flat key=value config
fully determines the run. Grammar (colon-separated fields, commas inside
atom lists):

  models:     stable:ALPHA | gamma:SHAPE:RATE
              cpois:RATE:unit | cpois:RATE:dirac:SIZE | cpois:RATE:exp:SCALE
  monotone:   identity:H | linear:SLOPE:H | const:VALUE:H
              step:H:x1:w1,x2:w2,...    (positive atom weights)
              oneminusexp:RATE          (bounded, piecewise-linear)
              cap:C:H                   (z -> min(z, C))
  signed:     fvstep:H:x1:w1,x2:w2,...  (weights may be negative)
              or any monotone descriptor (taken as its positive part)
"""

from __future__ import annotations

from .errors import UsageError
from .generator import bounded_exp_fn
from .levy import (
    CompoundPoissonModel,
    DiracJumps,
    ExponentialJumps,
    GammaModel,
    LevyModel,
    StableModel,
)
from .monotone import FiniteVariationFn, MonotoneFn


def _floats(parts, what):
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise UsageError(f"bad number in {what}: {parts}") from exc


def parse_model(text: str) -> LevyModel:
    parts = text.strip().split(":")
    kind = parts[0]
    if kind == "stable" and len(parts) == 2:
        (alpha,) = _floats(parts[1:], "stable model")
        return StableModel(alpha=alpha)
    if kind == "gamma" and len(parts) == 3:
        shape, rate = _floats(parts[1:], "gamma model")
        return GammaModel(shape=shape, rate=rate)
    if kind == "cpois" and len(parts) >= 3:
        (rate,) = _floats(parts[1:2], "cpois rate")
        law_kind = parts[2]
        if law_kind == "unit" and len(parts) == 3:
            return CompoundPoissonModel(rate=rate, law=DiracJumps(1.0))
        if law_kind == "dirac" and len(parts) == 4:
            (size,) = _floats(parts[3:], "dirac size")
            return CompoundPoissonModel(rate=rate, law=DiracJumps(size))
        if law_kind == "exp" and len(parts) == 4:
            (scale,) = _floats(parts[3:], "exp scale")
            return CompoundPoissonModel(rate=rate, law=ExponentialJumps(scale))
    raise UsageError(f"unrecognized model descriptor: {text!r}")


def _parse_atoms(text: str, what: str):
    atoms = []
    for item in text.split(","):
        if not item:
            continue
        bits = item.split(":")
        if len(bits) != 2:
            raise UsageError(f"bad atom {item!r} in {what}; expected x:w")
        x, w = _floats(bits, what)
        atoms.append((x, w))
    if not atoms:
        raise UsageError(f"empty atom list in {what}")
    return atoms


def parse_monotone(text: str) -> MonotoneFn:
    parts = text.strip().split(":", 1)
    kind = parts[0]
    rest = parts[1] if len(parts) > 1 else ""
    if kind == "identity":
        (h,) = _floats([rest or "1.0"], "identity horizon")
        return MonotoneFn.identity(h)
    if kind == "linear":
        slope, h = _floats(rest.split(":"), "linear")
        return MonotoneFn.linear(slope, h)
    if kind == "const":
        v, h = _floats(rest.split(":"), "const")
        return MonotoneFn.constant(v, h)
    if kind == "step":
        h_text, atoms_text = rest.split(":", 1)
        (h,) = _floats([h_text], "step horizon")
        return MonotoneFn.step(_parse_atoms(atoms_text, "step"), horizon=h)
    if kind == "oneminusexp":
        (rate,) = _floats([rest or "1.0"], "oneminusexp rate")
        return bounded_exp_fn(rate)
    if kind == "cap":
        c, h = _floats(rest.split(":"), "cap")
        if not 0 < c <= h:
            raise UsageError(f"cap level must lie in (0, horizon], got {text!r}")
        return MonotoneFn(knots=((0.0, 1.0), (c, 0.0)), horizon=h)
    raise UsageError(f"unrecognized function descriptor: {text!r}")


def parse_signed(text: str) -> FiniteVariationFn:
    parts = text.strip().split(":", 1)
    if parts[0] == "fvstep":
        h_text, atoms_text = parts[1].split(":", 1)
        (h,) = _floats([h_text], "fvstep horizon")
        return FiniteVariationFn.from_signed_atoms(
            _parse_atoms(atoms_text, "fvstep"), horizon=h)
    return FiniteVariationFn.from_monotone(parse_monotone(text))
