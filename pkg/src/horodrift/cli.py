"""Command-line entry point.

Every command reads one YAML config, writes ``<command>.csv`` and
``<command>.json`` into the output directory, and exits 0 on success, 1 when
a certified invariant is violated, 2 on a configuration error.  Outputs carry
the config hash and seed and are byte-identical for a fixed (config, seed)
regardless of the worker count.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .analysis import (
    boundary_inequality_sweep,
    comparison_bridge_check,
    continuity_sweep,
    furstenberg_drift,
    lazy_family,
    ldt_fit,
    point_measure,
    tilt_family,
)
from .boundary import default_boundary_net, format_boundary_point
from .config import ExperimentConfig, Setup, load_config
from .errors import ConfigError, HorodriftError
from .groups import GroupMetric, power_wasserstein_check
from .markov import (
    ALPHA_GRID,
    all_pairs,
    boundary_discrepancy,
    contraction_search,
    irreducibility_check,
    stationary_estimate,
    submultiplicativity_check,
)
from .spaces import check_hyperbolicity
from .walks import drift_estimate, exact_mean_displacements, hmet_check

COMMANDS = ("validate-space", "drift", "hmet", "stationary", "contraction", "furstenberg", "continuity", "ldt")


# --------------------------------------------------------------------------
# Output
# --------------------------------------------------------------------------

def _clean(x: Any) -> Any:
    """JSON-safe values: non-finite floats become strings, numpy scalars become Python."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x + 0.0 if math.isfinite(x) else str(x)  # + 0.0 folds -0.0
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(rows: Sequence[dict], meta: dict) -> str:
    buf = io.StringIO()
    if not rows:
        rows = [{}]
    columns = list(rows[0])
    for r in rows[1:]:
        columns += [c for c in r if c not in columns]
    writer = csv.DictWriter(buf, fieldnames=columns + ["config_hash", "seed"], lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({**{k: _clean(v) for k, v in r.items()}, **meta})
    return buf.getvalue()


@dataclass
class Result:
    rows: list[dict]
    summary: dict
    violations: list[str] = field(default_factory=list)


def _emit(out: Path, command: str, result: Result, config: ExperimentConfig) -> None:
    meta = {"config_hash": config.config_hash(), "seed": config.seed}
    stem = command.replace("-", "_")
    _atomic_write(out / f"{stem}.csv", _csv_text(result.rows, meta))
    doc = {
        "command": command,
        "config_name": config.name,
        **meta,
        "version": __version__,
        "summary": result.summary,
        "violations": result.violations,
    }
    _atomic_write(out / f"{stem}.json", json.dumps(_clean(doc), sort_keys=True, indent=2, ensure_ascii=False) + "\n")


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Context:
    setup: Setup
    workers: int
    cap: int

    @property
    def config(self) -> ExperimentConfig:
        return self.setup.config

    @property
    def seed(self) -> int:
        return self.setup.config.seed


def _section(ctx: Context, name: str) -> Any:
    spec = getattr(ctx.config.experiments, name)
    if spec is None:
        raise ConfigError(f"config has no experiments.{name} section")
    return spec


def run_validate_space(ctx: Context) -> Result:
    spec = _section(ctx, "validate_space")
    s = ctx.setup
    hyp = check_hyperbolicity(s.space, s.space.delta, spec.quadruples, ctx.seed)
    rows = [{"check": "four_point", "samples": hyp.samples, "delta": hyp.delta,
             "max_violation": hyp.max_violation, "violations": int(not hyp.holds)}]
    violations = [] if hyp.holds else [f"four-point condition fails by {hyp.max_violation:.6g}"]
    summary: dict = {"four_point": {"delta": hyp.delta, "max_violation": hyp.max_violation,
                                    "holds": hyp.holds, "samples": hyp.samples}}
    if spec.boundary_samples:
        chain = s.net(spec.chain_net) if spec.chain_net else default_boundary_net(s.space)
        sw = boundary_inequality_sweep(s.space, s.visual, spec.boundary_samples, ctx.seed + 1, chain)
        rows.append({"check": "visual_ratio", "samples": sw.samples, "delta": s.space.delta,
                     "max_violation": -sw.worst_visual_margin, "violations": sw.visual_violations})
        rows.append({"check": "comparison", "samples": sw.samples, "delta": s.space.delta,
                     "max_violation": -sw.worst_comparison_slack, "violations": sw.comparison_violations})
        summary["boundary"] = {"samples": sw.samples, "C": s.visual.C,
                               "visual_violations": sw.visual_violations,
                               "comparison_violations": sw.comparison_violations,
                               "worst_visual_margin": sw.worst_visual_margin,
                               "worst_comparison_slack": sw.worst_comparison_slack}
        if sw.visual_violations:
            violations.append(f"{sw.visual_violations} certified visual-ratio violations")
        if sw.comparison_violations:
            violations.append(f"{sw.comparison_violations} comparison-bound violations")
    return Result(rows, summary, violations)


def run_drift(ctx: Context) -> Result:
    spec = _section(ctx, "drift")
    mu = ctx.setup.measure(spec.measure)
    ns = spec.n if isinstance(spec.n, list) else [spec.n]
    rows = []
    for i, n in enumerate(ns):
        est = drift_estimate(mu, n, spec.trials, ctx.seed, ctx.workers, spec.fekete_max_m, ctx.cap, stream=i)
        rows.append({"measure": mu.name, "n": n, "trials": est.trials, "mean": est.mean,
                     "half_width": est.half_width, "ci_low": est.mean - est.half_width,
                     "ci_high": est.mean + est.half_width, "fekete_bound": est.fekete_bound})
    fek = [[m, v / m] for m, v in exact_mean_displacements(mu, spec.fekete_max_m, ctx.cap)]
    return Result(rows, {"measure": mu.name, "estimates": rows, "fekete": fek})


def run_hmet(ctx: Context) -> Result:
    spec = _section(ctx, "hmet")
    s = ctx.setup
    mu = s.measure(spec.measure)
    probe = s.boundary_point(spec.probe)
    r = hmet_check(s.space, mu, probe, spec.n, spec.trials, ctx.seed, spec.checkpoint_fraction,
                   spec.depth, ctx.workers)
    rows = [
        {"quantity": "drift", "n": r.n, "mean": r.drift.mean, "half_width": r.drift.half_width},
        {"quantity": "plus", "n": r.n, "mean": r.plus_mean, "half_width": r.plus_half_width},
        {"quantity": "minus", "n": r.checkpoint, "mean": r.minus_mean, "half_width": r.minus_half_width},
    ]
    summary: dict = {"probe": format_boundary_point(probe), "n": r.n, "checkpoint": r.checkpoint,
                     "trials": r.trials, "drift": r.drift.mean, "plus_mean": r.plus_mean,
                     "minus_mean": r.minus_mean, "plus_half_width": r.plus_half_width,
                     "minus_half_width": r.minus_half_width, "lipschitz_ok": r.lipschitz_ok}
    violations = [] if r.lipschitz_ok else ["horofunction exceeded the 1-Lipschitz bound"]
    if spec.bridge is not None:
        xi, eta = s.boundary_point(spec.bridge.xi), s.boundary_point(spec.bridge.eta)
        br = comparison_bridge_check(s.space, mu, xi, eta, spec.bridge.n, spec.bridge.trials, ctx.seed,
                                     ctx.workers)
        summary["bridge"] = {"K": br.K, "max_lower_violation": br.max_lower_violation,
                             "max_upper_violation": br.max_upper_violation, "holds": br.holds,
                             "tolerance": br.tolerance}
        if not br.holds:
            violations.append("horofunction/displacement comparison failed along sampled walks")
    return Result(rows, summary, violations)


def run_stationary(ctx: Context) -> Result:
    spec = _section(ctx, "stationary")
    s = ctx.setup
    mu = s.measure(spec.measure)
    starts = [s.boundary_point(p) for p in spec.starts]
    nus = [stationary_estimate(mu, spec.n, spec.trials, x, ctx.seed, ctx.workers, stream=1 + i)
           for i, x in enumerate(starts)]
    rows = []
    for i, (x, nu) in enumerate(zip(starts, nus)):
        disc = boundary_discrepancy(s.space, s.visual, nus[0], nu, spec.alpha, spec.bins) if i else 0.0
        rows.append({"start": format_boundary_point(x), "n": spec.n, "trials": spec.trials,
                     "distinct_atoms": len(nu), "discrepancy_to_first": disc})
    return Result(rows, {"alpha": spec.alpha, "estimates": rows,
                         "max_discrepancy": max(r["discrepancy_to_first"] for r in rows)})


def run_contraction(ctx: Context) -> Result:
    spec = _section(ctx, "contraction")
    s = ctx.setup
    mu = s.measure(spec.measure)
    nets = ctx.config.nets
    horo = s.net(nets.horofunctions)
    alphas = tuple(spec.alphas) if spec.alphas else ALPHA_GRID
    search = contraction_search(s.space, s.visual, mu, horo, spec.n_max, alphas, spec.samples, ctx.seed, ctx.cap)
    rows = [{"kind": "contraction", "alpha": a, "n": n, "m": "", "value": v, "exact": ex}
            for a, n, v, ex in search.table]
    summary: dict = {"contraction": {"found": search.found, "alpha": search.alpha, "n": search.n,
                                     "value": search.value}}
    violations = []
    if spec.submultiplicativity is not None:
        sm = spec.submultiplicativity
        pairs = all_pairs(s.net(nets.pairs))
        checks = []
        for total in range(2, sm.max_total + 1):
            for m in range(1, total):
                r = submultiplicativity_check(s.space, s.visual, mu, sm.alpha, m, total - m, pairs, ctx.cap)
                checks.append(r)
                rows.append({"kind": "submultiplicativity", "alpha": sm.alpha, "n": r.n, "m": r.m,
                             "value": r.k_sum, "bound": r.k_m * r.k_n_images,
                             "same_net_bound": r.k_m * r.k_n_net, "holds": r.holds})
        ok = all(r.holds for r in checks)
        summary["submultiplicativity"] = {"alpha": sm.alpha, "max_total": sm.max_total,
                                          "checks": len(checks), "holds": ok}
        if not ok:
            violations.append("submultiplicativity failed on an exact enumeration")
    cands = [s.boundary_point(p) for p in spec.irreducibility_candidates]
    irr = irreducibility_check(s.space, mu, cands)
    summary["irreducibility"] = {"irreducible": irr.irreducible, "verdict": irr.verdict,
                                 "fixed": [format_boundary_point(p) for p in irr.fixed]}
    return Result(rows, summary, violations)


def run_furstenberg(ctx: Context) -> Result:
    spec = _section(ctx, "furstenberg")
    s = ctx.setup
    mu = s.measure(spec.measure)
    if spec.stationary_atom is not None:
        nu = point_measure(s.boundary_point(spec.stationary_atom))
        source = "explicit"
    else:
        nu = stationary_estimate(mu, spec.n, spec.trials, s.boundary_point(spec.start), ctx.seed, ctx.workers)
        source = "chain"
    lf = furstenberg_drift(s.space, mu, nu)
    est = drift_estimate(mu, spec.drift_n, spec.drift_trials, ctx.seed, ctx.workers, 1, ctx.cap)
    irr = irreducibility_check(s.space, mu)
    diff = abs(lf - est.mean)
    summary = {"furstenberg_drift": lf, "drift_estimate": est.mean, "drift_half_width": est.half_width,
               "abs_difference": diff, "tolerance": spec.tolerance, "agrees": diff <= spec.tolerance,
               "stationary_source": source, "stationary_atoms": len(nu), "irreducible": irr.irreducible}
    rows = [{"measure": mu.name, "stationary_source": source, "furstenberg_drift": lf,
             "drift_estimate": est.mean, "drift_half_width": est.half_width, "abs_difference": diff}]
    return Result(rows, summary)


def run_continuity(ctx: Context) -> Result:
    spec = _section(ctx, "continuity")
    s = ctx.setup
    mu = s.measure(spec.measure)
    family = (tilt_family(mu, spec.signs, spec.ts) if spec.family == "tilt" else lazy_family(mu, spec.ts))
    metric = GroupMetric(s.space, s.visual, s.net(ctx.config.nets.group))
    rows = []
    bounds = []
    for seed in (ctx.seed, ctx.seed + spec.seed_offset):
        sw = continuity_sweep(s.space, s.visual, mu, family, spec.alpha, metric, spec.n, spec.trials, seed,
                              spec.lam, ctx.workers, spec.exclusion_factor)
        bounds.append(sw.bound)
        for r in sw.records:
            rows.append({"kind": "continuity", "sweep_seed": seed, "label": r.label, "parameter": r.parameter,
                         "wasserstein": r.wasserstein, "delta_drift": r.delta_drift,
                         "delta_half_width": r.delta_half_width, "ratio": r.ratio, "included": r.included})
    violations = []
    worst = -math.inf
    for label, t, nu in family:
        for rep in power_wasserstein_check(s.space, s.visual, mu, nu, spec.alpha, spec.lam, metric,
                                           spec.power_n, ctx.cap):
            worst = max(worst, -rep.slack)
            rows.append({"kind": "convolution", "label": f"{label} {rep.label}", "parameter": t,
                         "lhs": rep.lhs, "rhs": rep.rhs, "violated": rep.violated})
            if rep.violated:
                violations.append(f"{label} {rep.label}: {rep.lhs:.6g} > {rep.rhs:.6g}")
    b1, b2 = bounds
    stable = math.isfinite(b1) and math.isfinite(b2) and b1 > 0 and b2 > 0 and max(b1, b2) <= 2 * min(b1, b2)
    summary = {"family": spec.family, "alpha": spec.alpha, "bound": max(bounds), "bounds_by_seed": bounds,
               "stable_within_factor_2": stable, "convolution_checks_passed": not violations,
               "max_convolution_excess": worst}
    return Result(rows, summary, violations)


def run_ldt(ctx: Context) -> Result:
    spec = _section(ctx, "ldt")
    s = ctx.setup
    mu = s.measure(spec.measure)
    probe = s.boundary_point(spec.probe) if spec.probe is not None else None
    fits = ldt_fit(s.space, s.visual, mu, spec.epsilons, spec.n_grid, spec.trials, ctx.seed, spec.drift, probe,
                   ctx.workers, spec.min_count)
    rows = []
    for f in fits:
        for i, n in enumerate(f.n_grid):
            rows.append({"kind": f.kind, "epsilon": f.epsilon, "n": n, "trials": f.trials, "count": f.counts[i],
                         "frequency": f.frequencies[i], "wilson_low": f.wilson_low[i],
                         "wilson_high": f.wilson_high[i], "censored": f.censored[i]})
    summary = {"fits": [{"kind": f.kind, "epsilon": f.epsilon, "slope": f.slope, "intercept": f.intercept,
                         "k_hat": f.k_hat, "r2": f.r2, "fitted_cells": f.fitted_cells} for f in fits]}
    return Result(rows, summary)


HANDLERS: dict[str, Callable[[Context], Result]] = {
    "validate-space": run_validate_space,
    "drift": run_drift,
    "hmet": run_hmet,
    "stationary": run_stationary,
    "contraction": run_contraction,
    "furstenberg": run_furstenberg,
    "continuity": run_continuity,
    "ldt": run_ldt,
}


def run(
    config_path: str | Path,
    command: str,
    out: str | Path,
    seed: int | None = None,
    workers: int | None = None,
    cap: int | None = None,
) -> int:
    """Run one command (or ``all`` configured ones) and return the exit status."""
    try:
        config = load_config(config_path).with_seed(seed)
        if command != "all" and command not in HANDLERS:
            raise ConfigError(f"unknown command {command!r}")
        setup = config.build()
        ctx = Context(setup, max(1, workers or os.cpu_count() or 1), cap or config.cap)
        if command == "all":
            names = [c for c in COMMANDS if getattr(config.experiments, c.replace("-", "_")) is not None]
        else:
            names = [command]
        failed = False
        for name in names:
            result = HANDLERS[name](ctx)
            _emit(Path(out), name, result, config)
            for v in result.violations:
                print(f"{name}: {v}", file=sys.stderr)
            failed |= bool(result.violations)
        return 1 if failed else 0
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    except HorodriftError as e:
        # domain errors raised while running come from config-declared objects
        print(f"configuration error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="horodrift", description="Random-walk drift experiments on hyperbolic spaces.")
    p.add_argument("command", choices=[*COMMANDS, "all"])
    p.add_argument("--config", required=True, help="YAML experiment config")
    p.add_argument("--out", default="out", help="output directory (default: ./out)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: CPU count)")
    p.add_argument("--cap", type=int, default=None, help="support-size cap for exact convolution powers")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and args.seed < 0:
        print("configuration error: seed must be nonnegative", file=sys.stderr)
        return 2
    return run(args.config, args.command, args.out, args.seed, args.workers, args.cap)


if __name__ == "__main__":
    sys.exit(main())
