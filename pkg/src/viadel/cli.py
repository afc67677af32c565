"""Command-line entry point: ``viadel <subcommand> [flags]``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .control import asymptotics
from .curves import build_gamma_lh, curve_family
from .dde import StepConfig
from .experiments import (ExperimentConfig, cost_surface, fmt, h_sweep,
                          run_scenario, write_curve_csv)
from .model import DEFAULT_PARAMS, DomainError, Params, SolverError, State, ValidationError
from .regions import classify_boundary, contains, invariance_probe, maximality_probe, region_spec

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER = 0, 1, 2

PARAM_KEYS = ("gamma", "beta", "beta_star", "i_max", "delay", "lipschitz")
RUN_KEYS = ("scenario", "ic_file", "variant", "s2_rule", "band", "dt", "t_max", "out",
            "resolution", "h_list", "workers", "seed")
EXTRA_KEYS = ("level", "n_trials", "s", "i", "points")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _h_list(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def _common(sp: argparse.ArgumentParser) -> None:
    g = sp.add_argument_group("model")
    g.add_argument("--gamma", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--beta-star", type=float)
    g.add_argument("--i-max", type=float)
    g.add_argument("--delay", type=float)
    g.add_argument("--lipschitz", type=float)
    r = sp.add_argument_group("run")
    r.add_argument("--dt", type=float)
    r.add_argument("--band", type=float)
    r.add_argument("--t-max", type=float)
    r.add_argument("--variant", choices=("continuous", "lipschitz", "delay_free"))
    r.add_argument("--s2-rule", choices=("current", "i_max"))
    r.add_argument("--scenario", choices=("phi0", "phi1", "phi2", "file"))
    r.add_argument("--ic-file")
    r.add_argument("--out", help="output path stem (extensions are added)")
    r.add_argument("--resolution", type=int)
    r.add_argument("--h-list", type=_h_list, help="comma-separated delays, e.g. 6,3,1")
    r.add_argument("--workers", type=int, help="default: $VIADEL_WORKERS or CPU count")
    r.add_argument("--seed", type=int)
    r.add_argument("--config", help="JSON file with defaults; flags override it")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="viadel", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sp = sub.add_parser("simulate", help="closed-loop greedy run for a scenario")
    _common(sp)
    sp = sub.add_parser("curves", help="tabulate a frontier curve")
    _common(sp)
    sp.add_argument("--level", choices=("beta", "beta_star"))
    sp = sub.add_parser("region", help="membership and boundary class of points")
    _common(sp)
    sp.add_argument("--s", type=float)
    sp.add_argument("--i", type=float)
    sp = sub.add_parser("cost-surface", help="greedy cost over a grid of constant histories")
    _common(sp)
    sp = sub.add_parser("h-sweep", help="frontier convergence as the delay shrinks")
    _common(sp)
    sp = sub.add_parser("selftest", help="invariance and maximality probes")
    _common(sp)
    sp.add_argument("--n-trials", type=int)
    return ap


def merged_options(ns: argparse.Namespace) -> dict:
    """Config-file values overridden by explicitly given flags."""
    opts: dict = {}
    if ns.config:
        try:
            opts = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {ns.config}: {exc}") from None
        if not isinstance(opts, dict):
            raise ValidationError("config file must hold a JSON object")
        unknown = set(opts) - set(PARAM_KEYS + RUN_KEYS + EXTRA_KEYS)
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    for k, v in vars(ns).items():
        if v is not None and k not in ("command", "config"):
            opts[k] = v
    return opts


def make_config(opts: dict) -> ExperimentConfig:
    pd = DEFAULT_PARAMS.to_dict()
    pd.update({k: opts[k] for k in PARAM_KEYS if k in opts})
    params = Params.from_dict(pd)
    run = {k: opts[k] for k in RUN_KEYS if k in opts}
    if "h_list" in run:
        run["h_list"] = tuple(float(h) for h in run["h_list"])
    if run.get("ic_file") and "scenario" not in run:
        run["scenario"] = "file"
    return ExperimentConfig(params=params, **run)


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, allow_nan=False))


def cmd_simulate(cfg: ExperimentConfig, opts: dict) -> int:
    if cfg.variant == "delay_free":
        raise ValidationError("simulate supports the continuous and lipschitz variants")
    if cfg.out is None:
        cfg.out = cfg.scenario if cfg.scenario != "file" else Path(cfg.ic_file).stem
    res, summary = run_scenario(cfg)
    if res.terminated:
        a = asymptotics(res, cfg.params)
        summary["limit_residual"] = a.residual
    _emit(summary)
    print(f"J = {fmt(res.J)}", file=sys.stderr)
    return EXIT_OK


def cmd_curves(cfg: ExperimentConfig, opts: dict) -> int:
    p = cfg.params
    level = opts.get("level", "beta")
    b = p.beta if level == "beta" else p.beta_star
    if cfg.variant == "lipschitz":
        if p.lipschitz is None:
            raise ValidationError("the lipschitz variant needs --lipschitz")
        curve = build_gamma_lh(b, p.lipschitz, p.delay, p)
    else:
        ca, cb = curve_family(p, cfg.variant)
        curve = ca if level == "beta" else cb
    s, i = curve.sample(cfg.resolution if "resolution" in opts else 4096)
    path = Path(cfg.out or f"gamma_{level}").with_suffix(".csv")
    write_curve_csv(path, s, i)
    _emit({"curve": curve.label, "level": level, "s_lo": curve.s_lo, "s_hat": curve.s_hat,
           "file": str(path)})
    return EXIT_OK


def _points(opts: dict) -> list:
    if "s" in opts or "i" in opts:
        if "s" not in opts or "i" not in opts:
            raise ValidationError("region query needs both --s and --i")
        return [(opts["s"], opts["i"])]
    if "points" in opts:
        return [tuple(map(float, pt)) for pt in opts["points"]]
    pts = []
    for line in sys.stdin:
        parts = line.replace(",", " ").split()
        if parts:
            try:
                s, i = map(float, parts)
            except ValueError:
                raise ValidationError(f"expected 's i' per line, got {line.strip()!r}") from None
            pts.append((s, i))
    return pts


def cmd_region(cfg: ExperimentConfig, opts: dict) -> int:
    p = cfg.params
    main = region_spec(p, "lipschitz" if cfg.variant == "lipschitz" else "continuous")
    free = region_spec(p, "delay_free")
    for s, i in _points(opts):
        x = State(s, i)
        _emit({"s": s, "i": i,
               "in_A": contains("A", main, x), "in_B": contains("B", main, x),
               "in_A0": contains("A", free, x), "in_B0": contains("B", free, x),
               "class": classify_boundary(main, x, cfg.band).value})
    return EXIT_OK


def cmd_cost_surface(cfg: ExperimentConfig, opts: dict) -> int:
    if cfg.variant == "delay_free":
        raise ValidationError("cost surface supports the continuous and lipschitz variants")
    cfg.out = cfg.out or "cost_surface"
    surf = cost_surface(cfg)
    inside = ~np.isnan(surf.J)
    _emit({"file": str(Path(cfg.out).with_suffix(".csv")), "cells": int(surf.J.size),
           "cells_in_B": int(inside.sum()), "J_max": float(np.max(surf.J[inside])),
           "failures": len(surf.failures)})
    for s, i, err in surf.failures:
        print(f"cell ({s:.6g}, {i:.6g}) failed: {err}", file=sys.stderr)
    return EXIT_OK


def cmd_h_sweep(cfg: ExperimentConfig, opts: dict) -> int:
    cfg.out = cfg.out or "h_sweep"
    rows, errors = h_sweep(cfg)
    for r in rows:
        print(",".join(fmt(v) for v in r))
    for h, err in errors:
        print(f"h={h}: {err}", file=sys.stderr)
    return EXIT_OK


def cmd_selftest(cfg: ExperimentConfig, opts: dict) -> int:
    p = cfg.params
    spec = region_spec(p, "continuous")
    rep = invariance_probe(spec, int(opts.get("n_trials", 200)), cfg.seed,
                           StepConfig(dt=p.delay / 600), workers=cfg.workers)
    ok_inv = rep.max_violation <= 1e-6
    step = StepConfig(cfg.dt)
    t_hit = maximality_probe(spec, 0.02 * p.i_max, step)
    t_none = maximality_probe(spec, 0.0, step)
    ok_max = t_hit is not None and t_hit < 200.0 and t_none is None
    print(f"{'PASS' if ok_inv else 'FAIL'} invariance: max violation {rep.max_violation:.3e} "
          f"over {rep.n_trials} trials")
    print(f"{'PASS' if ok_max else 'FAIL'} maximality: violation at t={t_hit} "
          f"(offset 0.02*i_max), {t_none} (no offset)")
    return EXIT_OK if ok_inv and ok_max else EXIT_SOLVER


COMMANDS = {
    "simulate": cmd_simulate,
    "curves": cmd_curves,
    "region": cmd_region,
    "cost-surface": cmd_cost_surface,
    "h-sweep": cmd_h_sweep,
    "selftest": cmd_selftest,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_VALIDATION
    try:
        opts = merged_options(ns)
        cfg = make_config(opts)
        return COMMANDS[ns.command](cfg, opts)
    except (ValidationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
