"""Synthetic benchmark generator and Monte Carlo studies.

The benchmark design draws two standard-normal covariates, a control
response ``2 x1 - x2 + eps`` whose noise variance ``1 + max(x2, 0)``
grows with the second covariate, a constant additive effect ``tau``, and
a treatment assignment with propensity ``1 / (1 + 2 exp(x2 - x1))``
clipped to [0.05, 0.95].  All draws go through an inverse-CDF transform
of a counter-based uniform stream, so a (seed, n) pair produces the same
dataset on any platform and under any degree of parallelism.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import ndtri

from ._streams import NS_DGP, NS_TRIAL, child_seed, open_uniforms, stream
from .estimator import aipw_scores, estimate_effect
from .nuisance import Dataset, cross_fit_nuisances
from .regressors import RegressorSpec
from .simultaneous import SimulConfig, simultaneous_trim
from .trimming import apply_trim, compute_khat, gamma_fraction, varmin_objective

PROPENSITY_CLIP = (0.05, 0.95)


@dataclass(frozen=True)
class DgpConfig:
    n: int = 1000
    tau: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 10:
            raise ValueError("n must be an integer >= 10")


@dataclass
class DgpTruth:
    """Per-unit generator-side quantities for oracle checks."""

    e: np.ndarray        # clipped true propensity
    mu0: np.ndarray
    mu1: np.ndarray
    var: np.ndarray      # noise variance, identical in both arms
    tau: float


def generate_dgp(cfg: DgpConfig) -> Tuple[Dataset, DgpTruth]:
    """Draw one synthetic dataset together with its generator truth."""
    rng = stream(cfg.seed, NS_DGP)
    u = open_uniforms(rng, (4, cfg.n))
    x1 = ndtri(u[0])
    x2 = ndtri(u[1])
    var = 1.0 + np.maximum(x2, 0.0)
    eps = np.sqrt(var) * ndtri(u[2])
    mu0 = 2.0 * x1 - x2
    y0 = mu0 + eps
    y1 = y0 + cfg.tau
    e = np.clip(1.0 / (1.0 + 2.0 * np.exp(x2 - x1)), *PROPENSITY_CLIP)
    z = (u[3] < e).astype(np.int64)
    y = np.where(z == 1, y1, y0)
    data = Dataset(np.column_stack([x1, x2]), y, z)
    truth = DgpTruth(e=e, mu0=mu0, mu1=mu0 + cfg.tau, var=var, tau=cfg.tau)
    return data, truth


@dataclass
class PathRow:
    delta: float
    gamma_hat: float
    n_retained: int
    tau_hat: float
    se: float
    objective: float


def trim_path(data, nuis, k_hat, deltas: Sequence[float], alpha: float = 0.05):
    """Estimates along a grid of trimming fractions, with the variance
    objective evaluated at each cut-off."""
    scores = aipw_scores(data, nuis)
    rows = []
    for delta in deltas:
        gam = gamma_fraction(k_hat, delta)
        trim = apply_trim(k_hat, gam)
        est = estimate_effect(scores, trim.retained, alpha)
        rows.append(
            PathRow(
                delta=float(delta),
                gamma_hat=gam,
                n_retained=trim.n_retained,
                tau_hat=est.tau_hat,
                se=est.se,
                objective=varmin_objective(k_hat, gam),
            )
        )
    return rows


@dataclass
class CoverageRow:
    n: int
    delta: Optional[float]   # None for the simultaneous row
    cross_fitted: bool
    coverage: float
    mean_ci_width: float
    trials: int


@dataclass
class CoverageReport:
    rows: list[CoverageRow]


def _coverage_trial(args) -> tuple:
    (dgp, spec, deltas, cross_fit, n_folds, alpha, b_boot, clip, seed, t) = args
    data, _ = generate_dgp(replace(dgp, seed=child_seed(seed, NS_TRIAL, t, 0)))
    spec_t = replace(spec, seed=child_seed(seed, NS_TRIAL, t, 1))
    floor = 1e-6 * float(np.var(data.response, ddof=1))
    nuis = cross_fit_nuisances(
        data,
        spec_t,
        n_folds=n_folds if cross_fit else 1,
        clip=clip,
        variance_floor=floor,
    )
    k = compute_khat(nuis, "heteroscedastic")
    sim = simultaneous_trim(
        data,
        nuis,
        k,
        SimulConfig(
            deltas=tuple(deltas),
            alpha=alpha,
            b_boot=b_boot,
            seed=child_seed(seed, NS_TRIAL, t, 2),
        ),
    )
    covered = [row.ci_lo <= dgp.tau <= row.ci_hi for row in sim.rows]
    widths = [row.ci_hi - row.ci_lo for row in sim.rows]
    simul_covered = all(row.simul_lo <= dgp.tau <= row.simul_hi for row in sim.rows)
    simul_width = float(np.mean([row.simul_hi - row.simul_lo for row in sim.rows]))
    return covered, widths, simul_covered, simul_width


def coverage_study(
    dgp: DgpConfig,
    spec: RegressorSpec,
    deltas: Sequence[float] = (0.0, 0.05, 0.1),
    trials: int = 100,
    cross_fit: bool = True,
    n_folds: int = 5,
    alpha: float = 0.05,
    b_boot: int = 1000,
    clip: Tuple[float, float] = (0.01, 0.99),
    seed: int = 0,
    workers: int = 1,
) -> CoverageReport:
    """Empirical interval coverage of the constant effect over many trials.

    Each trial draws a fresh dataset from a trial-specific derived seed,
    fits nuisances (cross-fitted over ``n_folds`` folds, or in-sample when
    ``cross_fit`` is false), and records pointwise coverage per trimming
    fraction plus joint coverage of the simultaneous intervals.  Trials
    are independent and may run in worker processes; aggregation does not
    depend on completion order.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    arglist = [
        (dgp, spec, tuple(deltas), cross_fit, n_folds, alpha, b_boot, clip, seed, t)
        for t in range(trials)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_coverage_trial, arglist, chunksize=4))
    else:
        results = [_coverage_trial(a) for a in arglist]

    covered = np.array([r[0] for r in results], dtype=float)     # (trials, m)
    widths = np.array([r[1] for r in results], dtype=float)
    simul_cov = np.array([r[2] for r in results], dtype=float)   # (trials,)
    simul_width = np.array([r[3] for r in results], dtype=float)

    rows = [
        CoverageRow(
            n=dgp.n,
            delta=float(delta),
            cross_fitted=bool(cross_fit),
            coverage=float(covered[:, j].mean()),
            mean_ci_width=float(widths[:, j].mean()),
            trials=trials,
        )
        for j, delta in enumerate(deltas)
    ]
    rows.append(
        CoverageRow(
            n=dgp.n,
            delta=None,
            cross_fitted=bool(cross_fit),
            coverage=float(simul_cov.mean()),
            mean_ci_width=float(simul_width.mean()),
            trials=trials,
        )
    )
    return CoverageReport(rows=rows)
