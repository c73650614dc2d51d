"""End-to-end analysis of a CSV dataset, driven by a flat config file.

The config format is one ``key = value`` pair per line; blank lines and
``#`` comments are ignored.  ``schema_version = 1`` is required.  Keys
are listed in the README; unknown keys are rejected so typos fail loudly.
Reports serialize to JSON (single object) or CSV (one row per trimming
rule or grid point), with reals printed at full precision so reruns with
the same input, config, and seed are byte-identical.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .estimator import aipw_scores, estimate_effect
from .nuisance import Dataset, NuisanceEstimates, cross_fit_nuisances
from .regressors import RegressorSpec
from .simultaneous import SimulConfig, SimulResult, simultaneous_trim
from .trimming import TrimSpec, apply_trim, compute_khat, select_gamma

SCHEMA_VERSION = 1


class ValidationError(ValueError):
    """Bad configuration or bad input data (CLI exit code 1)."""


# ---------------------------------------------------------------------------
# configuration


@dataclass
class AnalysisConfig:
    input: Optional[str] = None
    response: Optional[str] = None
    treatment: Optional[str] = None
    covariates: Optional[list[str]] = None
    method: str = "knn"
    knn_k: int = 10
    trees: int = 200
    max_depth: int = 8
    min_leaf: int = 5
    mtry: Optional[int] = None
    standardize: bool = False
    folds: int = 5
    clip_lo: float = 0.01
    clip_hi: float = 0.99
    variance_floor_rel: float = 1e-6
    mode: str = "heteroscedastic"
    rule: str = "varmin"
    gamma: Optional[float] = None
    delta: Optional[float] = None
    alpha: float = 0.05
    seed: int = 0
    simul_deltas: Optional[list[float]] = None
    simul_b: int = 1000
    min_effective_fraction: float = 0.95
    output: Optional[str] = None
    format: str = "json"
    sim_n: int = 1000
    sim_trials: int = 100
    sim_tau: float = 1.0
    sim_cross_fit: bool = True

    def regressor_spec(self) -> RegressorSpec:
        return RegressorSpec(
            method=self.method,
            knn_k=self.knn_k,
            trees=self.trees,
            max_depth=self.max_depth,
            min_leaf=self.min_leaf,
            mtry=self.mtry,
            standardize=self.standardize,
            seed=self.seed,
        )

    def trim_spec(self) -> TrimSpec:
        try:
            return TrimSpec(
                mode=self.mode, rule=self.rule, gamma=self.gamma, delta=self.delta
            )
        except ValueError as exc:
            raise ValidationError(str(exc)) from None

    def echo(self) -> dict:
        # presentation-only keys are excluded so that writing the same
        # analysis to two different destinations yields identical reports
        out = {}
        for name in self.__dataclass_fields__:
            if name in ("output", "format"):
                continue
            out[name] = getattr(self, name)
        out["schema_version"] = SCHEMA_VERSION
        return out


def _parse_bool(raw: str, key: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValidationError(f"config key '{key}': expected a boolean, got {raw!r}")


def _parse_typed(key: str, raw: str):
    ints = {"knn_k", "trees", "max_depth", "min_leaf", "mtry", "folds", "seed",
            "simul_b", "sim_n", "sim_trials"}
    floats = {"clip_lo", "clip_hi", "variance_floor_rel", "gamma", "delta",
              "alpha", "min_effective_fraction", "sim_tau"}
    bools = {"standardize", "sim_cross_fit"}
    try:
        if key in ints:
            return int(raw)
        if key in floats:
            return float(raw)
    except ValueError:
        raise ValidationError(
            f"config key '{key}': expected a number, got {raw!r}"
        ) from None
    if key in bools:
        return _parse_bool(raw, key)
    if key == "covariates":
        return [c.strip() for c in raw.split(",") if c.strip()]
    if key == "simul_deltas":
        try:
            return [float(c) for c in raw.split(",") if c.strip()]
        except ValueError:
            raise ValidationError(
                f"config key 'simul_deltas': expected numbers, got {raw!r}"
            ) from None
    return raw


def parse_config(text: str) -> AnalysisConfig:
    """Parse ``key = value`` lines into a validated AnalysisConfig."""
    cfg = AnalysisConfig()
    seen_version = False
    known = set(cfg.__dataclass_fields__)
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValidationError(
                f"config line {lineno}: expected 'key = value', got {line!r}"
            )
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key == "schema_version":
            if raw.strip() != str(SCHEMA_VERSION):
                raise ValidationError(
                    f"unsupported schema_version {raw!r} (this build reads "
                    f"version {SCHEMA_VERSION})"
                )
            seen_version = True
            continue
        if key not in known:
            raise ValidationError(f"config line {lineno}: unknown key '{key}'")
        setattr(cfg, key, _parse_typed(key, raw))
    if not seen_version:
        raise ValidationError("config is missing the required schema_version key")
    _validate_config(cfg)
    return cfg


def _validate_config(cfg: AnalysisConfig) -> None:
    if cfg.format not in ("json", "csv"):
        raise ValidationError(f"format must be 'json' or 'csv', got {cfg.format!r}")
    if not (0.0 < cfg.clip_lo < cfg.clip_hi < 1.0):
        raise ValidationError(
            f"clip bounds must satisfy 0 < clip_lo < clip_hi < 1, got "
            f"({cfg.clip_lo}, {cfg.clip_hi})"
        )
    if not 0.0 < cfg.alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0, 1), got {cfg.alpha}")
    if cfg.variance_floor_rel <= 0.0:
        raise ValidationError("variance_floor_rel must be strictly positive")
    if cfg.folds < 1:
        raise ValidationError("folds must be a positive integer")
    if cfg.seed < 0:
        raise ValidationError("seed must be a nonnegative integer")
    cfg.trim_spec()  # raises ValidationError on a bad rule combination


def load_config(path: str) -> AnalysisConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read config file: {exc}") from None
    return parse_config(text)


# ---------------------------------------------------------------------------
# data ingestion


def ingest_csv(
    path: str,
    response: str,
    treatment: str,
    covariates: Optional[Sequence[str]] = None,
) -> tuple[Dataset, list[str]]:
    """Read a headered CSV into a Dataset.

    Covariates default to every column other than the response and
    treatment, in file order; an explicit list selects columns by name in
    the order given, making the result independent of the file's column
    order.  Errors name the offending data row (1-based) and column.
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            rows = list(reader)
    except OSError as exc:
        raise ValidationError(f"cannot read input file: {exc}") from None
    if not rows:
        raise ValidationError(f"input file {path!r} is empty")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise ValidationError(f"input file {path!r} has a header but no data rows")
    if len(set(header)) != len(header):
        dupes = sorted({h for h in header if header.count(h) > 1})
        raise ValidationError(f"duplicate column names in header: {dupes}")

    def col_index(name: str) -> int:
        try:
            return header.index(name)
        except ValueError:
            raise ValidationError(
                f"column '{name}' not found (header has: {', '.join(header)})"
            ) from None

    yi = col_index(response)
    zi = col_index(treatment)
    if covariates is None:
        xnames = [h for h in header if h not in (response, treatment)]
    else:
        xnames = list(covariates)
        for name in xnames:
            if name in (response, treatment):
                raise ValidationError(
                    f"column '{name}' cannot be both a covariate and the "
                    f"response/treatment"
                )
    if not xnames:
        raise ValidationError("no covariate columns left after selection")
    xi = [col_index(name) for name in xnames]

    n = len(body)
    x = np.empty((n, len(xi)))
    y = np.empty(n)
    z = np.empty(n)

    def cell(row_vals, row_no, idx, name) -> float:
        if idx >= len(row_vals):
            raise ValidationError(
                f"row {row_no} has {len(row_vals)} fields, expected "
                f"{len(header)}"
            )
        raw = row_vals[idx].strip()
        try:
            val = float(raw)
        except ValueError:
            raise ValidationError(
                f"non-numeric value {raw!r} at row {row_no}, column '{name}'"
            ) from None
        if not np.isfinite(val):
            raise ValidationError(
                f"non-finite value {raw!r} at row {row_no}, column '{name}'"
            )
        return val

    for r, row_vals in enumerate(body):
        row_no = r + 1
        y[r] = cell(row_vals, row_no, yi, response)
        zv = cell(row_vals, row_no, zi, treatment)
        if zv not in (0.0, 1.0):
            raise ValidationError(
                f"treatment value {row_vals[zi].strip()!r} at row {row_no}, "
                f"column '{treatment}' is not 0 or 1"
            )
        z[r] = zv
        for c, idx in enumerate(xi):
            x[r, c] = cell(row_vals, row_no, idx, xnames[c])

    try:
        data = Dataset(x, y, z.astype(np.int64))
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    return data, xnames


# ---------------------------------------------------------------------------
# report


@dataclass
class RuleResult:
    rule: str
    mode: str
    delta: Optional[float]
    gamma_hat: float
    n_retained: int
    tau_hat: float
    se: float
    ci_lo: float
    ci_hi: float


@dataclass
class AnalysisReport:
    schema_version: int
    n: int
    d: int
    config: dict
    diagnostics: dict
    results: list[RuleResult]
    simultaneous: Optional[SimulResult] = None
    covariate_names: list[str] = field(default_factory=list)


def _diagnostics_dict(nuis: NuisanceEstimates) -> dict:
    diag = nuis.diagnostics
    return {
        "raw_propensity_min": diag.raw_propensity_min,
        "raw_propensity_max": diag.raw_propensity_max,
        "n_variances_floored": diag.n_variances_floored,
        "fold_sizes": list(diag.fold_sizes),
    }


def run_analysis(cfg: AnalysisConfig, with_rule: bool = True) -> AnalysisReport:
    """Ingest, fit nuisances, trim, estimate, and (optionally) run the
    simultaneous grid.  ``with_rule=False`` skips the single-rule row and
    requires ``simul_deltas`` instead."""
    if cfg.input is None:
        raise ValidationError("no input file given (config 'input' or --input)")
    if cfg.response is None or cfg.treatment is None:
        raise ValidationError("config must name the response and treatment columns")
    if not with_rule and cfg.simul_deltas is None:
        raise ValidationError("this command needs simul_deltas in the config")

    data, xnames = ingest_csv(cfg.input, cfg.response, cfg.treatment, cfg.covariates)
    y_var = float(np.var(data.response, ddof=1))
    floor = cfg.variance_floor_rel * y_var
    if floor <= 0.0:
        raise ValueError(
            "response variance is zero; the relative variance floor is "
            "degenerate"
        )
    nuis = cross_fit_nuisances(
        data,
        cfg.regressor_spec(),
        n_folds=cfg.folds,
        clip=(cfg.clip_lo, cfg.clip_hi),
        variance_floor=floor,
    )

    results = []
    if with_rule:
        tspec = cfg.trim_spec()
        k = compute_khat(nuis, tspec.mode)
        gam = select_gamma(k, tspec)
        trim = apply_trim(k, gam)
        scores = aipw_scores(data, nuis)
        est = estimate_effect(scores, trim.retained, cfg.alpha)
        results.append(
            RuleResult(
                rule=tspec.rule,
                mode=tspec.mode,
                delta=tspec.delta if tspec.rule == "fraction" else None,
                gamma_hat=gam,
                n_retained=trim.n_retained,
                tau_hat=est.tau_hat,
                se=est.se,
                ci_lo=est.ci_lo,
                ci_hi=est.ci_hi,
            )
        )

    simul = None
    if cfg.simul_deltas is not None:
        k = compute_khat(nuis, cfg.mode)
        simul = simultaneous_trim(
            data,
            nuis,
            k,
            SimulConfig(
                deltas=tuple(cfg.simul_deltas),
                alpha=cfg.alpha,
                b_boot=cfg.simul_b,
                seed=cfg.seed,
                min_effective_fraction=cfg.min_effective_fraction,
            ),
        )

    return AnalysisReport(
        schema_version=SCHEMA_VERSION,
        n=data.n,
        d=data.d,
        config=cfg.echo(),
        diagnostics=_diagnostics_dict(nuis),
        results=results,
        simultaneous=simul,
        covariate_names=xnames,
    )


def _csv_num(value) -> str:
    if value is None:
        return ""
    return repr(float(value))  # shortest string that round-trips exactly


def emit_report(report: AnalysisReport, fmt: str = "json") -> str:
    """Serialize a report; identical reports serialize identically."""
    if fmt == "json":
        return _emit_json(report)
    if fmt == "csv":
        return _emit_csv(report)
    raise ValidationError(f"format must be 'json' or 'csv', got {fmt!r}")


def _emit_json(report: AnalysisReport) -> str:
    obj = {
        "schema_version": report.schema_version,
        "n": report.n,
        "d": report.d,
        "covariate_names": report.covariate_names,
        "config": report.config,
        "diagnostics": report.diagnostics,
        "results": [
            {
                "rule": r.rule,
                "mode": r.mode,
                "delta": r.delta,
                "gamma_hat": r.gamma_hat,
                "n_retained": r.n_retained,
                "tau_hat": r.tau_hat,
                "se": r.se,
                "ci_lo": r.ci_lo,
                "ci_hi": r.ci_hi,
            }
            for r in report.results
        ],
        "simultaneous": None,
    }
    if report.simultaneous is not None:
        sim = report.simultaneous
        obj["simultaneous"] = {
            "q": sim.q,
            "b_effective": sim.b_effective,
            "b_skipped": sim.b_skipped,
            "alpha": sim.alpha,
            "rows": [
                {
                    "delta": row.delta,
                    "gamma_hat": row.gamma_hat,
                    "n_retained": row.n_retained,
                    "tau_hat": row.tau_hat,
                    "se": row.se,
                    "ci_lo": row.ci_lo,
                    "ci_hi": row.ci_hi,
                    "simul_lo": row.simul_lo,
                    "simul_hi": row.simul_hi,
                }
                for row in sim.rows
            ],
        }
    return json.dumps(obj, indent=2) + "\n"


CSV_COLUMNS = (
    "rule,mode,delta,gamma_hat,n_retained,tau_hat,se,ci_lo,ci_hi,"
    "simul_lo,simul_hi"
)


def _emit_csv(report: AnalysisReport) -> str:
    lines = [CSV_COLUMNS]
    for r in report.results:
        lines.append(
            ",".join(
                [
                    r.rule,
                    r.mode,
                    _csv_num(r.delta),
                    _csv_num(r.gamma_hat),
                    str(r.n_retained),
                    _csv_num(r.tau_hat),
                    _csv_num(r.se),
                    _csv_num(r.ci_lo),
                    _csv_num(r.ci_hi),
                    "",
                    "",
                ]
            )
        )
    if report.simultaneous is not None:
        mode = report.config.get("mode", "heteroscedastic")
        for row in report.simultaneous.rows:
            lines.append(
                ",".join(
                    [
                        "simultaneous",
                        mode,
                        _csv_num(row.delta),
                        _csv_num(row.gamma_hat),
                        str(row.n_retained),
                        _csv_num(row.tau_hat),
                        _csv_num(row.se),
                        _csv_num(row.ci_lo),
                        _csv_num(row.ci_hi),
                        _csv_num(row.simul_lo),
                        _csv_num(row.simul_hi),
                    ]
                )
            )
    return "\n".join(lines) + "\n"
