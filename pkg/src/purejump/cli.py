"""Reproducible experiment driver.

Every verification harness is a subcommand taking a flat key=value config
(``--config`` file plus command-line overrides). Seeds are explicit for
every randomized subcommand; there is no entropy default, so identical
configs produce byte-identical outputs. Exit status is 0 exactly when all
asserted invariants of the subcommand pass, 1 on a failed numeric check,
and 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .accessibility import accessible_mass, estimate_accessibility_prob
from .descriptors import parse_model, parse_monotone, parse_signed
from .errors import PureJumpError, UsageError
from .generator import (
    classical_generator,
    exp_decay,
    extended_generator,
    martingale_test,
)
from .levy import simulate_path
from .monotone import (
    FiniteVariationFn,
    MonotoneFn,
    change_of_variables_residual,
    range_report,
)
from .reporting import ensure_outdir, fmt_raw, fmt_summary, write_csv, write_text
from .staircase import StaircaseSpec, deficit_scan
from .stochcalc import SmoothPath, integration_by_parts_residual

TOL_ABS = 1e-12


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _to_int(v):
    return int(v, 0) if isinstance(v, str) else int(v)


def _to_float(v):
    return float(v)


def _to_intlist(v):
    return [int(p) for p in str(v).split(",") if p]


def _to_floatlist(v):
    return [float(p) for p in str(v).split(",") if p]


_SCHEMAS = {
    "cov-check": {
        "f": (str, True, None), "a": (str, True, None),
        "t": (_to_float, True, None),
    },
    "staircase-deficit": {
        "t": (_to_float, False, 1.0),
        "ns": (_to_intlist, False, [16, 64, 256, 1024, 4096, 16384]),
        "delta": (_to_float, False, 1e-8),
        "horizon": (_to_float, False, 1.0),
        "threshold": (_to_float, False, 0.0),
    },
    "simulate": {
        "model": (str, True, None), "t": (_to_float, False, 1.0),
        "eps": (_to_float, True, None), "seed": (_to_int, True, None),
        "paths": (_to_int, False, 1),
    },
    "accessibility-scan": {
        "model": (str, True, None), "levels": (_to_floatlist, True, None),
        "tol": (_to_float, True, None), "eps": (_to_float, True, None),
        "seed": (_to_int, True, None), "paths": (_to_int, False, 1000),
        "t": (_to_float, False, 1.0),
    },
    "generator-eval": {
        "model": (str, True, None), "kind": (str, False, "extended"),
        "f": (str, False, ""), "g_rate": (_to_float, False, 1.0),
        "xs": (_to_floatlist, False, [0.0]),
    },
    "martingale-test": {
        "model": (str, True, None), "f": (str, True, None),
        "x": (_to_float, False, 0.0), "t": (_to_float, False, 1.0),
        "paths": (_to_int, True, None), "eps": (_to_float, True, None),
        "seed": (_to_int, True, None),
        "target_stderr": (_to_float, True, None),
        "verbose": (_to_int, False, 0),
    },
    "ibp-check": {
        "trials": (_to_int, False, 100), "seed": (_to_int, True, None),
        "t": (_to_float, False, 1.0), "eps": (_to_float, False, 1e-4),
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    subcommand: str
    values: tuple   # sorted (key, raw string) pairs; lossless round trip

    def typed(self) -> dict:
        schema = _SCHEMAS[self.subcommand]
        raw = dict(self.values)
        out = {}
        for key, (conv, required, default) in schema.items():
            if key in raw:
                try:
                    out[key] = conv(raw[key])
                except (TypeError, ValueError) as exc:
                    raise UsageError(f"{self.subcommand}.{key}: bad value "
                                     f"{raw[key]!r} ({exc})") from exc
            elif required:
                raise UsageError(f"{self.subcommand}.{key}: required key missing")
            else:
                out[key] = default
        unknown = set(raw) - set(schema) - {"out"}
        if unknown:
            raise UsageError(
                f"{self.subcommand}: unknown keys {sorted(unknown)}")
        return out

    def to_lines(self):
        return [f"subcommand={self.subcommand}"] + \
               [f"{k}={v}" for k, v in self.values]

    @classmethod
    def assemble(cls, subcommand: str, file_pairs, overrides) -> "ExperimentConfig":
        merged = dict(file_pairs)
        merged.update({k: v for k, v in overrides.items() if v is not None})
        return cls(subcommand=subcommand,
                   values=tuple(sorted((k, str(v)) for k, v in merged.items())))


def read_config_file(path: str):
    pairs = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"config line without '=': {line!r}")
        key, value = line.split("=", 1)
        pairs.append((key.strip(), value.strip()))
    return pairs


@dataclass
class ExperimentReport:
    subcommand: str
    passed: bool
    summary: list = field(default_factory=list)
    files: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------

def _run_cov_check(cfg: dict, out: Path) -> ExperimentReport:
    f = parse_monotone(cfg["f"])
    a = parse_monotone(cfg["a"])
    t = cfg["t"]
    res = change_of_variables_residual(f, a, t)
    mass = accessible_mass(f, a, 0.0)
    identity_holds = abs(res.deficit) <= TOL_ABS
    # dichotomy: zero accessible mass forces the identity; positive mass
    # must reappear as the deficit (exactly, for this function class)
    if mass == 0.0:
        passed = identity_holds
    else:
        # atom masses are exact; the dyadic probe of continuous parts is not
        grid_tol = 0.0 if f.is_pure_step() else 0.01 * max(mass, abs(res.deficit))
        passed = abs(res.deficit - mass) <= TOL_ABS + grid_tol
    rows = [(cfg["f"], cfg["a"], t, res.lhs, res.jump_sum, res.deficit, mass)]
    files = [write_csv(out / "cov_check.csv", "cov-check",
                       ("f", "a", "t", "lhs", "jump_sum", "deficit",
                        "accessible_mass"), rows)]
    summary = [f"deficit={fmt_summary(res.deficit)}",
               f"accessible_mass={fmt_summary(mass)}",
               f"identity_holds={str(identity_holds).lower()}"]
    return ExperimentReport("cov-check", passed, summary, files)


def _run_staircase_deficit(cfg: dict, out: Path) -> ExperimentReport:
    spec = StaircaseSpec(horizon=cfg["horizon"])
    rows = deficit_scan(spec, cfg["t"], cfg["ns"], cfg["delta"])
    csv_rows = [(r.n, r.lhs.lo, r.lhs.hi, r.jump_sum.lo, r.jump_sum.hi,
                 r.deficit.lo, r.deficit.hi) for r in rows]
    files = [write_csv(out / "staircase_deficit.csv", "staircase-deficit",
                       ("N", "lhs_lo", "lhs_hi", "jumpsum_lo", "jumpsum_hi",
                        "deficit_lo", "deficit_hi"), csv_rows)]
    lower = [r.deficit.lo for r in rows]
    monotone = all(b >= a for a, b in zip(lower, lower[1:]))
    consistent = all(r.jump_sum.hi + r.deficit.lo <= r.lhs.hi + 1e-15
                     for r in rows)
    passed = monotone and consistent and lower[-1] >= cfg["threshold"]
    summary = [f"final_deficit_lo={fmt_summary(lower[-1])}",
               f"monotone_lower_bounds={str(monotone).lower()}"]
    return ExperimentReport("staircase-deficit", passed, summary, files)


def _run_simulate(cfg: dict, out: Path) -> ExperimentReport:
    model = parse_model(cfg["model"])
    files, ok = [], True
    for i in range(cfg["paths"]):
        p = simulate_path(model, cfg["t"], cfg["eps"], cfg["seed"], stream=i)
        rep = range_report(p.to_monotone(), cfg["t"]) if p.count else None
        if rep is not None and not (rep.pure_jump_flag and rep.range_measure == 0.0):
            ok = False
        header = (f"# model={p.model} T={fmt_raw(p.horizon)} "
                  f"eps={fmt_raw(p.eps)} seed={p.seed} stream={p.stream}")
        lines = [header, "time,size"]
        lines += [f"{fmt_raw(t)},{fmt_raw(s)}"
                  for t, s in zip(p.times.tolist(), p.sizes.tolist())]
        path = out / f"path_{i:05d}.csv"
        path.write_text("\n".join(lines) + "\n", encoding="ascii")
        files.append(path)
    summary = [f"paths={cfg['paths']}", f"pure_jump_ok={str(ok).lower()}"]
    return ExperimentReport("simulate", ok, summary, files)


def _run_accessibility_scan(cfg: dict, out: Path) -> ExperimentReport:
    model = parse_model(cfg["model"])
    rep = estimate_accessibility_prob(model, cfg["levels"], cfg["paths"],
                                      cfg["tol"], cfg["eps"], cfg["seed"],
                                      horizon=cfg["t"])
    files = [write_csv(out / "accessibility.csv", "accessibility-scan",
                       ("level", "tol", "n_paths", "prob", "stderr"),
                       list(rep.as_rows()))]
    ok = all(0.0 <= p <= 1.0 for p in rep.probabilities)
    summary = [f"levels={len(rep.levels)}",
               f"max_prob={fmt_summary(max(rep.probabilities, default=0.0))}"]
    return ExperimentReport("accessibility-scan", ok, summary, files)


def _run_generator_eval(cfg: dict, out: Path) -> ExperimentReport:
    model = parse_model(cfg["model"])
    rows, ok = [], True
    if cfg["kind"] == "classical":
        g = exp_decay(cfg["g_rate"])
        for x in cfg["xs"]:
            val = classical_generator(model, g, x)
            rows.append((x, val.value, val.error_bound, val.diverged))
    elif cfg["kind"] == "extended":
        if not cfg["f"]:
            raise UsageError("generator-eval.f: required for kind=extended")
        f = parse_monotone(cfg["f"])
        for x in cfg["xs"]:
            val = extended_generator(model, f, x)
            rows.append((x, val.value, val.error_bound, val.diverged))
            if val.value < 0.0:
                ok = False
    else:
        raise UsageError(f"generator-eval.kind: unknown kind {cfg['kind']!r}")
    files = [write_csv(out / "generator_eval.csv", "generator-eval",
                       ("x", "value", "error_bound", "diverged"), rows)]
    summary = [f"evaluations={len(rows)}"]
    return ExperimentReport("generator-eval", ok, summary, files)


def _run_martingale_test(cfg: dict, out: Path) -> ExperimentReport:
    model = parse_model(cfg["model"])
    f = parse_monotone(cfg["f"])
    rep = martingale_test(model, f, cfg["x"], cfg["t"], cfg["paths"],
                          cfg["eps"], cfg["seed"], cfg["target_stderr"],
                          f_label=cfg["f"], collect=bool(cfg["verbose"]))
    files = [write_text(out / "martingale_report.txt", rep.as_text_lines())]
    if cfg["verbose"]:
        files.append(write_csv(out / "martingale_paths.csv", "martingale-paths",
                               ("path", "lhs", "rhs"),
                               [(i, l, r) for i, (l, r)
                                in enumerate(rep.per_path)]))
    summary = [f"lhs={fmt_summary(rep.lhs)}", f"rhs={fmt_summary(rep.rhs)}",
               f"z={fmt_summary(rep.z_score)}",
               f"passed={str(rep.passed).lower()}"]
    return ExperimentReport("martingale-test", rep.passed, summary, files)


def _run_ibp_check(cfg: dict, out: Path) -> ExperimentReport:
    from .levy import CompoundPoissonModel, DiracJumps, StableModel

    rng = np.random.default_rng(cfg["seed"])
    stable = StableModel(0.5)
    cpois = CompoundPoissonModel(3.0, DiracJumps(0.5))
    rows, all_ok = [], True
    for trial in range(cfg["trials"]):
        a = simulate_path(stable, cfg["t"], cfg["eps"], cfg["seed"],
                          stream=2 * trial).to_monotone()
        n_atoms = int(rng.integers(1, 21))
        xs = np.sort(rng.uniform(0.05, 10.0, n_atoms))
        ws = rng.uniform(-1.0, 1.0, n_atoms)
        ws[ws == 0.0] = 0.5
        k = FiniteVariationFn.from_signed_atoms(
            [(float(x), float(w)) for x, w in zip(xs, ws)], horizon=1e9)
        if trial % 2 == 0:
            x_path = simulate_path(cpois, cfg["t"], 0.0, cfg["seed"],
                                   stream=2 * trial + 1)
            X = FiniteVariationFn.from_monotone(x_path.to_monotone())
        else:
            X = SmoothPath(fn=lambda s: s, deriv=lambda s: 1.0,
                           horizon=cfg["t"], label="s")
        res = integration_by_parts_residual(X, a, k, cfg["t"])
        ok = abs(res.residual) <= res.tolerance_budget
        all_ok &= ok
        rows.append((trial, res.residual, res.tolerance_budget, ok))
    files = [write_csv(out / "ibp_check.csv", "ibp-check",
                       ("trial", "residual", "tolerance_budget", "pass"), rows)]
    summary = [f"trials={cfg['trials']}",
               f"max_residual={fmt_summary(max(abs(r[1]) for r in rows))}"]
    return ExperimentReport("ibp-check", all_ok, summary, files)


_RUNNERS = {
    "cov-check": _run_cov_check,
    "staircase-deficit": _run_staircase_deficit,
    "simulate": _run_simulate,
    "accessibility-scan": _run_accessibility_scan,
    "generator-eval": _run_generator_eval,
    "martingale-test": _run_martingale_test,
    "ibp-check": _run_ibp_check,
}


def run_experiment(config: ExperimentConfig, out_dir) -> ExperimentReport:
    cfg = config.typed()
    out = ensure_outdir(out_dir)
    write_text(out / "config.txt", config.to_lines())
    report = _RUNNERS[config.subcommand](cfg, out)
    write_text(out / "summary.txt",
               [f"subcommand={report.subcommand}"] + report.summary +
               [f"passed={str(report.passed).lower()}"])
    return report


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="purejump",
        description="verification experiments for pure-jump path calculus")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in _SCHEMAS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="key=value config file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", default=None, help="RNG seed (uint64)")
        p.add_argument("--paths", default=None, help="number of paths")
        p.add_argument("--eps", default=None, help="jump truncation level")
        p.add_argument("--tol", default=None, help="accessibility tolerance")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        file_pairs = read_config_file(args.config) if args.config else []
        overrides = {}
        for key in ("seed", "paths", "eps", "tol"):
            overrides[key] = getattr(args, key)
        for item in args.set:
            if "=" not in item:
                raise UsageError(f"--set needs KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            overrides[k.strip()] = v.strip()
        out_dir = args.out or overrides.get("out") or dict(file_pairs).get("out")
        if not out_dir:
            raise UsageError("out: output directory required (--out)")
        overrides.pop("out", None)
        config = ExperimentConfig.assemble(
            args.subcommand, [p for p in file_pairs if p[0] != "out"], overrides)
        report = run_experiment(config, out_dir)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except PureJumpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for line in report.summary:
        print(line)
    print(f"passed={str(report.passed).lower()}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
