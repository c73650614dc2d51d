"""Command-line interface.

Subcommands: ``analyze`` (trim + estimate a CSV), ``simul`` (simultaneous
grid only), ``trim-path`` (estimates along a fraction grid), ``simulate``
(synthetic coverage study).  Exit codes: 0 success, 1 validation error
(bad config, flags, or input data), 2 runtime/numeric failure.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .analysis import (
    AnalysisConfig,
    ValidationError,
    _csv_num,
    emit_report,
    ingest_csv,
    load_config,
    run_analysis,
)
from .estimator import aipw_scores  # noqa: F401  (re-exported for scripting)
from .nuisance import cross_fit_nuisances
from .simharness import DgpConfig, coverage_study, trim_path
from .trimming import compute_khat


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hettrim",
        description="Variance-aware trimming and treatment-effect estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("analyze", "trim and estimate on a CSV dataset"),
        ("simul", "simultaneous intervals over a trimming-fraction grid"),
        ("trim-path", "estimates along a grid of trimming fractions"),
        ("simulate", "synthetic-data coverage study"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="path to a key = value config file")
        p.add_argument("--input", help="CSV input path (overrides config)")
        p.add_argument("--seed", type=int, help="seed override")
        p.add_argument("--output", help="write the report here instead of stdout")
        p.add_argument("--format", choices=("json", "csv"), help="report format")
    return parser


def _resolve_config(args) -> AnalysisConfig:
    cfg = load_config(args.config) if args.config else AnalysisConfig()
    if args.config is None and args.command in ("analyze", "simul", "trim-path"):
        raise ValidationError("--config is required for this command")
    if args.input is not None:
        cfg.input = args.input
    if args.seed is not None:
        if args.seed < 0:
            raise ValidationError("seed must be a nonnegative integer")
        cfg.seed = args.seed
    if args.output is not None:
        cfg.output = args.output
    if args.format is not None:
        cfg.format = args.format
    return cfg


def _write(cfg: AnalysisConfig, text: str) -> None:
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_analyze(cfg: AnalysisConfig) -> str:
    report = run_analysis(cfg)
    return emit_report(report, cfg.format)


def _cmd_simul(cfg: AnalysisConfig) -> str:
    report = run_analysis(cfg, with_rule=False)
    return emit_report(report, cfg.format)


def _cmd_trim_path(cfg: AnalysisConfig) -> str:
    if cfg.input is None:
        raise ValidationError("no input file given (config 'input' or --input)")
    if cfg.response is None or cfg.treatment is None:
        raise ValidationError("config must name the response and treatment columns")
    deltas = cfg.simul_deltas if cfg.simul_deltas is not None else [0.0, 0.1, 0.2, 0.3]
    data, _ = ingest_csv(cfg.input, cfg.response, cfg.treatment, cfg.covariates)
    floor = cfg.variance_floor_rel * float(np.var(data.response, ddof=1))
    if floor <= 0.0:
        raise ValueError("response variance is zero; variance floor is degenerate")
    nuis = cross_fit_nuisances(
        data,
        cfg.regressor_spec(),
        n_folds=cfg.folds,
        clip=(cfg.clip_lo, cfg.clip_hi),
        variance_floor=floor,
    )
    k = compute_khat(nuis, cfg.mode)
    rows = trim_path(data, nuis, k, deltas, cfg.alpha)
    if cfg.format == "csv":
        lines = ["delta,gamma_hat,n_retained,tau_hat,se,objective"]
        for r in rows:
            lines.append(
                ",".join(
                    [
                        _csv_num(r.delta),
                        _csv_num(r.gamma_hat),
                        str(r.n_retained),
                        _csv_num(r.tau_hat),
                        _csv_num(r.se),
                        _csv_num(r.objective),
                    ]
                )
            )
        return "\n".join(lines) + "\n"
    obj = [
        {
            "delta": r.delta,
            "gamma_hat": r.gamma_hat,
            "n_retained": r.n_retained,
            "tau_hat": r.tau_hat,
            "se": r.se,
            "objective": r.objective,
        }
        for r in rows
    ]
    return json.dumps({"rows": obj}, indent=2) + "\n"


def _cmd_simulate(cfg: AnalysisConfig) -> str:
    deltas = cfg.simul_deltas if cfg.simul_deltas is not None else [0.0, 0.05, 0.1]
    report = coverage_study(
        DgpConfig(n=cfg.sim_n, tau=cfg.sim_tau),
        cfg.regressor_spec(),
        deltas=deltas,
        trials=cfg.sim_trials,
        cross_fit=cfg.sim_cross_fit,
        n_folds=cfg.folds,
        alpha=cfg.alpha,
        b_boot=cfg.simul_b,
        clip=(cfg.clip_lo, cfg.clip_hi),
        seed=cfg.seed,
    )
    if cfg.format == "csv":
        lines = ["n,delta_or_simul,cross_fitted,coverage,mean_ci_width,trials"]
        for r in report.rows:
            label = "simul" if r.delta is None else _csv_num(r.delta)
            lines.append(
                ",".join(
                    [
                        str(r.n),
                        label,
                        str(r.cross_fitted).lower(),
                        _csv_num(r.coverage),
                        _csv_num(r.mean_ci_width),
                        str(r.trials),
                    ]
                )
            )
        return "\n".join(lines) + "\n"
    obj = [
        {
            "n": r.n,
            "delta_or_simul": "simul" if r.delta is None else r.delta,
            "cross_fitted": r.cross_fitted,
            "coverage": r.coverage,
            "mean_ci_width": r.mean_ci_width,
            "trials": r.trials,
        }
        for r in report.rows
    ]
    return json.dumps({"rows": obj}, indent=2) + "\n"


_COMMANDS = {
    "analyze": _cmd_analyze,
    "simul": _cmd_simul,
    "trim-path": _cmd_trim_path,
    "simulate": _cmd_simulate,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve_config(args)
        text = _COMMANDS[args.command](cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        _write(cfg, text)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
