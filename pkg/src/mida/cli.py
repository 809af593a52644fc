"""Command-line entry point.

Subcommands: simulate, estimate, coverage, pr, fdr, rates, wdensity.
Data goes to files under --out; messages go to standard error. Exit codes:
0 success, 1 runtime failure, 2 configuration/usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .errors import ConfigError, MidaError
from .estimator import MidaResult, mida_estimate, sample_w
from .harness import (
    ExperimentConfig,
    run_coverage,
    run_fdr,
    run_pr_fscore,
    run_rate_check,
)
from .lsem import Dataset, generate_random_lsem, sample
from .structure import PcConfig, estimate_cpdag, residualize_on_treatment

_W_STREAM = 4

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mida",
        description="Simulation and inference for individual mediation effects. "
        "Command-line flags take precedence over values from --config files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="write a random model spec and a sampled dataset")
    sim.add_argument("--p", type=int, default=50)
    sim.add_argument("--degree", type=float, default=3.0)
    sim.add_argument("--p-treat", type=float, default=0.2)
    sim.add_argument("--p-resp", type=float, default=0.1)
    sim.add_argument("--n", type=int, default=1000)
    sim.add_argument("--error-family", default="gaussian")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True, help="output directory")

    est = sub.add_parser("estimate", help="run the full pipeline on a dataset CSV")
    est.add_argument("--data", required=True, help="CSV with header; first column "
                     "treatment, last column response")
    est.add_argument("--alpha", type=float, default=0.01)
    est.add_argument("--max-cond-size", type=int, default=3)
    est.add_argument("--pc-stable", action="store_true")
    est.add_argument("--level", type=float, default=0.95)
    est.add_argument("--max-component-size", type=int, default=12)
    est.add_argument("--out", required=True, help="output CSV path")

    for name, help_text in (
        ("coverage", "confidence-interval coverage study"),
        ("pr", "precision-recall and F-score study"),
        ("fdr", "false-discovery-rate study"),
        ("rates", "concentration-rate study"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", help="JSON experiment config")
        cmd.add_argument("--out", help="output directory (overrides config)")
        cmd.add_argument("--seed", type=int, help="master seed (overrides config)")
        cmd.add_argument("--threads", type=int, help="worker threads (overrides config)")
        cmd.add_argument("--alpha", type=float, help="PC significance level")
        cmd.add_argument("--max-cond-size", type=int)
        cmd.add_argument("--pc-stable", action="store_true", default=None)
        cmd.add_argument("--level", type=float)
        cmd.add_argument("--graph-mode", choices=("estimated", "true_cpdag",
                                                  "true_dag", "empty"))
        cmd.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                         help="override any config field")
        if name == "fdr":
            cmd.add_argument("--bh-alpha", type=float, default=0.05)
            cmd.add_argument("--screen-level", type=float, default=0.01)

    wd = sub.add_parser("wdensity", help="sample the degenerate-case W statistic")
    wd.add_argument("--rho", type=float, action="append", required=True,
                    help="correlation value; repeatable")
    wd.add_argument("--m", type=int, default=100000)
    wd.add_argument("--seed", type=int, default=0)
    wd.add_argument("--out", required=True, help="output CSV path")
    return parser


def _coerce(field: dataclasses.Field, raw: str):
    if field.type in ("int", int):
        return int(raw)
    if field.type in ("float", float):
        return float(raw)
    if field.type in ("bool", bool):
        return raw.lower() in ("1", "true", "yes")
    if field.name == "n_list":
        return tuple(int(x) for x in raw.split(";") if x)
    return raw


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    if args.config is not None:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        try:
            config = ExperimentConfig.from_json(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"malformed JSON in {args.config} at line {exc.lineno}, "
                f"column {exc.colno}: {exc.msg}"
            ) from exc
    else:
        config = ExperimentConfig()
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    overrides: dict[str, object] = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form KEY=VALUE")
        key, raw = item.split("=", 1)
        if key not in fields:
            raise ConfigError(f"unknown config key {key!r}")
        overrides[key] = _coerce(fields[key], raw)
    flag_map = {
        "out": "output_dir", "seed": "seed", "threads": "threads",
        "alpha": "alpha_pc", "max_cond_size": "max_cond_size",
        "pc_stable": "pc_stable", "level": "level", "graph_mode": "graph_mode",
    }
    for flag, key in flag_map.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    return config.with_overrides(overrides)


def _cmd_simulate(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    spec = generate_random_lsem(args.p, args.degree, args.p_treat, args.p_resp,
                                rng, error_family=args.error_family)
    data = sample(spec, args.n, rng)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "spec.json"), "w") as fh:
        fh.write(spec.to_json())
    with open(os.path.join(args.out, "data.csv"), "w") as fh:
        fh.write(data.to_csv())
    print(f"wrote spec.json and data.csv under {args.out}", file=sys.stderr)
    return EXIT_OK


def _cmd_estimate(args: argparse.Namespace) -> int:
    try:
        with open(args.data) as fh:
            data = Dataset.from_csv(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read dataset: {exc}") from exc
    residuals = residualize_on_treatment(data)
    pc = PcConfig(alpha=args.alpha, max_cond_size=args.max_cond_size,
                  stable_variant=args.pc_stable)
    cpdag = estimate_cpdag(residuals, pc)
    rows = []
    for j in range(2, data.p):
        res = mida_estimate(data, cpdag, j, level=args.level,
                            max_component_size=args.max_component_size)
        rows.append(res.csv_row())
    out_dir = os.path.dirname(args.out)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    with open(args.out, "w") as fh:
        fh.write(MidaResult.CSV_HEADER + "\n")
        fh.write("\n".join(rows) + "\n")
    print(f"wrote {len(rows)} mediator rows to {args.out}", file=sys.stderr)
    return EXIT_OK


def _cmd_wdensity(args: argparse.Namespace) -> int:
    out_dir = os.path.dirname(args.out)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    lines = ["rho,w"]
    for rho in args.rho:
        # seed entries must be nonnegative; fold the sign into the offset
        rho_tag = int(round(rho * 1e6)) + 10**6
        rng = np.random.default_rng((args.seed, _W_STREAM, rho_tag))
        for w in sample_w(rho, args.m, rng):
            lines.append(f"{rho:.10g},{w:.10g}")
    with open(args.out, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {args.m} samples per rho to {args.out}", file=sys.stderr)
    return EXIT_OK


def _cmd_experiment(args: argparse.Namespace) -> int:
    config = _load_config(args)
    os.makedirs(config.output_dir, exist_ok=True)
    if args.command == "coverage":
        run_coverage(config)
    elif args.command == "pr":
        run_pr_fscore(config)
    elif args.command == "fdr":
        run_fdr(config, bh_alpha=args.bh_alpha, screen_level=args.screen_level)
    elif args.command == "rates":
        run_rate_check(config)
    print(f"{args.command} study written under {config.output_dir}", file=sys.stderr)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "estimate":
            return _cmd_estimate(args)
        if args.command == "wdensity":
            return _cmd_wdensity(args)
        return _cmd_experiment(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MidaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
