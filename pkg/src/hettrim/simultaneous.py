"""Simultaneous confidence intervals across a grid of trimming fractions.

Reporting estimates at several trimming fractions invites a multiplicity
problem.  This module bootstraps the maximum studentized deviation across
the grid: each replicate resamples unit indices with replacement, carries
the *precomputed* per-unit scores and variance contributions (nuisances
are never refit), recomputes the fraction cut-off on the replicate, and
evaluates

    T_b = max_j | tau_j^b - tau_j | / se_j^b .

The (1 - alpha) quantile q of the replicate T values widens every
pointwise interval to ``tau_j +- q * se_j``, giving intervals that cover
all grid effects jointly.

Replicate b draws its indices from a stream derived from (seed, b), so
results do not depend on execution order or worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from ._streams import NS_BOOT, stream
from .estimator import aipw_scores, estimate_effect
from .nuisance import Dataset, NuisanceEstimates
from .trimming import apply_trim, gamma_fraction, _check_khat

_CHUNK = 64


class DegenerateReplicateError(ValueError):
    """A bootstrap replicate where some grid point cannot be studentized."""


@dataclass(frozen=True)
class SimulConfig:
    """Grid and bootstrap settings for simultaneous intervals.

    ``deltas`` is the grid of trimming fractions; ``b_boot`` the number of
    bootstrap replicates (at least 100); ``min_effective_fraction`` the
    smallest acceptable share of non-degenerate replicates.
    """

    deltas: Tuple[float, ...] = (0.0, 0.1, 0.2, 0.3)
    alpha: float = 0.05
    b_boot: int = 1000
    seed: int = 0
    min_effective_fraction: float = 0.95

    def __post_init__(self):
        if len(self.deltas) == 0:
            raise ValueError("deltas grid must be nonempty")
        for d in self.deltas:
            if not 0.0 <= float(d) < 1.0:
                raise ValueError(f"every delta must lie in [0, 1), got {d}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if int(self.b_boot) != self.b_boot or self.b_boot < 100:
            raise ValueError("b_boot must be an integer >= 100")
        if not 0.0 < self.min_effective_fraction <= 1.0:
            raise ValueError("min_effective_fraction must lie in (0, 1]")


@dataclass
class SimulRow:
    """Per-grid-point results: pointwise and simultaneous intervals."""

    delta: float
    gamma_hat: float
    n_retained: int
    tau_hat: float
    se: float
    ci_lo: float
    ci_hi: float
    simul_lo: float
    simul_hi: float


@dataclass
class SimulResult:
    rows: list[SimulRow]
    q: float
    b_effective: int
    b_skipped: int
    alpha: float


def _replicate_estimates(scores: np.ndarray, k_hat: np.ndarray, deltas) -> tuple:
    """Vectorized per-row trimmed means and standard errors.

    ``scores`` and ``k_hat`` are (B, n); returns ``tau`` (B, m), ``se``
    (B, m) and ``valid`` (B,), where a row is valid when every grid point
    retains at least 2 units and has a strictly positive standard error.
    """
    b, n = scores.shape
    m = len(deltas)
    tau = np.empty((b, m))
    se = np.empty((b, m))
    valid = np.ones(b, dtype=bool)
    for j, delta in enumerate(deltas):
        mth = n - int(math.floor(float(delta) * n + 1e-12))
        mth = min(max(mth, 1), n)
        gam = np.partition(k_hat, mth - 1, axis=1)[:, mth - 1]
        mask = k_hat <= gam[:, None]
        cnt = mask.sum(axis=1)
        mean = np.where(mask, scores, 0.0).sum(axis=1) / cnt
        dev = np.where(mask, scores - mean[:, None], 0.0)
        var = (dev * dev).sum(axis=1) / np.maximum(cnt - 1, 1)
        se_j = np.sqrt(var / cnt)
        tau[:, j] = mean
        se[:, j] = se_j
        valid &= (cnt >= 2) & (se_j > 0.0)
    return tau, se, valid


def bootstrap_statistic(
    original_taus: Sequence[float],
    scores: np.ndarray,
    k_hat: np.ndarray,
    deltas: Sequence[float],
) -> float:
    """Max studentized deviation of one replicate from the original estimates.

    ``scores`` and ``k_hat`` are the per-unit values of the replicate
    (already resampled); the fraction cut-offs are recomputed on the
    replicate.  Raises :class:`DegenerateReplicateError` when any grid
    point retains fewer than 2 units or has zero standard error.
    """
    scores = np.asarray(scores, dtype=np.float64)
    k = _check_khat(k_hat)
    if scores.shape != k.shape:
        raise ValueError("scores and k_hat must have equal length")
    orig = np.asarray(original_taus, dtype=np.float64)
    if orig.shape != (len(deltas),):
        raise ValueError("need one original estimate per delta")
    tau, se, valid = _replicate_estimates(scores[None, :], k[None, :], deltas)
    if not valid[0]:
        raise DegenerateReplicateError(
            "replicate has a grid point with fewer than 2 retained units "
            "or zero standard error"
        )
    return float(np.max(np.abs(tau[0] - orig) / se[0]))


def _replicate_indices(seed: int, b: int, n: int) -> np.ndarray:
    return stream(seed, NS_BOOT, b).integers(0, n, size=n)


def simultaneous_trim(
    data: Dataset,
    nuis: NuisanceEstimates,
    k_hat: np.ndarray,
    cfg: SimulConfig,
    workers: int = 1,
) -> SimulResult:
    """Estimates and simultaneous intervals over a trimming-fraction grid.

    Scores and variance contributions are computed once on the original
    sample; bootstrap replicates only resample those per-unit values and
    recompute the cut-offs, never the nuisance fits.

    Raises
    ------
    ValueError
        If an original grid point is degenerate, or with message
        "degenerate bootstrap" when fewer than
        ``min_effective_fraction * b_boot`` replicates are valid.
    """
    k = _check_khat(k_hat)
    if k.shape[0] != data.n:
        raise ValueError("k_hat length does not match the dataset")
    scores = aipw_scores(data, nuis)
    n = data.n

    originals = []
    for delta in cfg.deltas:
        gam = gamma_fraction(k, delta)
        trim = apply_trim(k, gam)
        if trim.n_retained < 2:
            raise ValueError(f"fewer than 2 units retained at delta={delta}")
        est = estimate_effect(scores, trim.retained, cfg.alpha)
        if est.se == 0.0:
            raise ValueError(f"zero standard error at delta={delta}")
        originals.append((gam, trim, est))
    orig_tau = np.array([est.tau_hat for _, _, est in originals])

    t_vals = np.empty(cfg.b_boot)
    valid = np.empty(cfg.b_boot, dtype=bool)
    starts = range(0, cfg.b_boot, _CHUNK)

    def run_chunk(start: int) -> None:
        stop = min(start + _CHUNK, cfg.b_boot)
        idx = np.stack(
            [_replicate_indices(cfg.seed, b, n) for b in range(start, stop)]
        )
        tau_b, se_b, ok = _replicate_estimates(scores[idx], k[idx], cfg.deltas)
        with np.errstate(divide="ignore", invalid="ignore"):
            t_chunk = np.abs(tau_b - orig_tau[None, :]) / se_b
            t_full = np.max(t_chunk, axis=1)
        t_vals[start:stop] = np.where(ok, t_full, np.nan)
        valid[start:stop] = ok

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run_chunk, starts))
    else:
        for start in starts:
            run_chunk(start)

    b_eff = int(valid.sum())
    if b_eff < cfg.min_effective_fraction * cfg.b_boot:
        raise ValueError(
            f"degenerate bootstrap: only {b_eff} of {cfg.b_boot} replicates "
            f"were usable"
        )
    t_sorted = np.sort(t_vals[valid])
    rank = int(math.ceil((1.0 - cfg.alpha) * (b_eff + 1) - 1e-12))
    rank = min(max(rank, 1), b_eff)
    q = float(t_sorted[rank - 1])

    rows = []
    for (gam, trim, est), delta in zip(originals, cfg.deltas):
        rows.append(
            SimulRow(
                delta=float(delta),
                gamma_hat=gam,
                n_retained=trim.n_retained,
                tau_hat=est.tau_hat,
                se=est.se,
                ci_lo=est.ci_lo,
                ci_hi=est.ci_hi,
                simul_lo=est.tau_hat - q * est.se,
                simul_hi=est.tau_hat + q * est.se,
            )
        )
    return SimulResult(
        rows=rows,
        q=q,
        b_effective=b_eff,
        b_skipped=cfg.b_boot - b_eff,
        alpha=cfg.alpha,
    )
