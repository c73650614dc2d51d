"""Doubly-robust effect estimation on a trimmed sub-population.

The per-unit influence-function score

    s_i = mu1(X_i) + Z_i (Y_i - mu1(X_i)) / e(X_i)
        - mu0(X_i) - (1 - Z_i) (Y_i - mu0(X_i)) / (1 - e(X_i))

combines outcome regression and inverse propensity weighting; its mean
over any set of units estimates the average treatment effect on that set,
and remains consistent if either the outcome model or the propensity
model is correct.  Trimmed estimates average the scores over the retained
units only, and normal-theory intervals use the sample standard deviation
of the retained scores.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .nuisance import Dataset, NuisanceEstimates


@dataclass
class EffectEstimate:
    """Point estimate with normal-theory interval on the retained set."""

    tau_hat: float
    se: float
    ci_lo: float
    ci_hi: float
    n_used: int
    alpha: float


def aipw_scores(data: Dataset, nuis: NuisanceEstimates) -> np.ndarray:
    """Per-unit doubly-robust scores from observed data and nuisances."""
    y = data.response
    z = data.treatment.astype(np.float64)
    e = nuis.e_hat
    mu0, mu1 = nuis.mu0_hat, nuis.mu1_hat
    if not (y.shape == e.shape == mu0.shape == mu1.shape):
        raise ValueError("data and nuisance estimates have mismatched lengths")
    return mu1 + z * (y - mu1) / e - mu0 - (1.0 - z) * (y - mu0) / (1.0 - e)


def _check_retained(scores: np.ndarray, retained: np.ndarray) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    retained = np.asarray(retained, dtype=bool)
    if scores.shape != retained.shape or scores.ndim != 1:
        raise ValueError("scores and retained mask must be 1-d with equal length")
    return scores[retained]


def trimmed_estimate(scores: np.ndarray, retained: np.ndarray) -> float:
    """Mean score over the retained units."""
    kept = _check_retained(scores, retained)
    if kept.size == 0:
        raise ValueError("no units retained")
    return float(kept.mean())


def standard_error(scores: np.ndarray, retained: np.ndarray) -> float:
    """Sample standard deviation (n-1 divisor) of retained scores / sqrt(n).

    Requires at least two retained units.
    """
    kept = _check_retained(scores, retained)
    if kept.size < 2:
        raise ValueError(
            f"standard error needs at least 2 retained units, got {kept.size}"
        )
    return float(kept.std(ddof=1) / np.sqrt(kept.size))


def normal_ci(tau_hat: float, se: float, alpha: float = 0.05) -> tuple[float, float]:
    """Two-sided normal interval ``tau_hat +- z_{1-alpha/2} * se``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if se < 0.0:
        raise ValueError("standard error must be nonnegative")
    z = float(ndtri(1.0 - alpha / 2.0))
    return (tau_hat - z * se, tau_hat + z * se)


def estimate_effect(
    scores: np.ndarray, retained: np.ndarray, alpha: float = 0.05
) -> EffectEstimate:
    """Point estimate, standard error, and interval on the retained set."""
    tau = trimmed_estimate(scores, retained)
    se = standard_error(scores, retained)
    lo, hi = normal_ci(tau, se, alpha)
    return EffectEstimate(
        tau_hat=tau,
        se=se,
        ci_lo=lo,
        ci_hi=hi,
        n_used=int(np.asarray(retained, dtype=bool).sum()),
        alpha=alpha,
    )
