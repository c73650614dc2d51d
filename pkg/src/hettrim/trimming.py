"""Variance-aware trimming rules.

The estimated variance-contribution function assigns each unit the value

    k(x) = sigma1^2(x) / e(x) + sigma0^2(x) / (1 - e(x))      (heteroscedastic)
    k(x) = 1 / (e(x) (1 - e(x)))                              (homoscedastic)

which is, up to constants, the contribution of units at x to the variance
of the weighted effect estimator.  Trimming keeps the sub-population where
this contribution is at most a cut-off gamma; the retained-set rule is
always the inclusive comparison ``k_hat <= gamma_hat``.

Three cut-off rules are provided:

* :func:`gamma_constant` — a user-supplied constant.
* :func:`gamma_varmin` — the minimizer of the asymptotic-variance
  objective ``mean(k 1{k<=g}) / mean(1{k<=g})^2`` over the sample values.
* :func:`gamma_fraction` — the order statistic retaining a (1 - delta)
  fraction of the sample.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .nuisance import NuisanceEstimates

MODES = ("heteroscedastic", "homoscedastic")
RULES = ("constant", "varmin", "fraction")


@dataclass(frozen=True)
class TrimSpec:
    """A trimming rule: variance mode plus cut-off selection.

    ``rule == "constant"`` requires ``gamma``; ``rule == "fraction"``
    requires ``delta``; ``rule == "varmin"`` requires neither.
    """

    mode: str = "heteroscedastic"
    rule: str = "varmin"
    gamma: Optional[float] = None
    delta: Optional[float] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.rule not in RULES:
            raise ValueError(f"rule must be one of {RULES}, got {self.rule!r}")
        if self.rule == "constant" and self.gamma is None:
            raise ValueError("rule 'constant' needs a gamma value")
        if self.rule == "fraction" and self.delta is None:
            raise ValueError("rule 'fraction' needs a delta value")


@dataclass
class TrimResult:
    """Outcome of thresholding ``k_hat`` at ``gamma_hat``."""

    gamma_hat: float
    retained: np.ndarray
    n_retained: int


def _check_khat(k_hat: np.ndarray) -> np.ndarray:
    k = np.asarray(k_hat, dtype=np.float64)
    if k.ndim != 1 or k.size == 0:
        raise ValueError("k_hat must be a nonempty 1-d array")
    if not np.isfinite(k).all():
        raise ValueError("k_hat contains non-finite values")
    return k


def compute_khat(nuis: NuisanceEstimates, mode: str = "heteroscedastic") -> np.ndarray:
    """Per-unit variance contribution under the given mode.

    The propensity estimates are already clipped away from 0 and 1 and the
    variance estimates are floored at a positive value, so the result is
    finite and strictly positive.
    """
    e = nuis.e_hat
    if mode == "heteroscedastic":
        return nuis.var1_hat / e + nuis.var0_hat / (1.0 - e)
    if mode == "homoscedastic":
        return 1.0 / (e * (1.0 - e))
    raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def varmin_objective(k_hat: np.ndarray, gamma: float) -> float:
    """Asymptotic-variance objective ``mean(k 1{k<=g}) / mean(1{k<=g})^2``.

    Raises if no sample value is below the threshold.
    """
    k = _check_khat(k_hat)
    keep = k <= gamma
    m = int(keep.sum())
    if m == 0:
        raise ValueError(f"no values of k_hat are <= gamma={gamma}")
    n = k.size
    return float((k[keep].sum() / n) / (m / n) ** 2)


def gamma_constant(k_hat: np.ndarray, gamma: float) -> float:
    """Pass a user-chosen constant cut-off through unchanged."""
    _check_khat(k_hat)
    gamma = float(gamma)
    if not math.isfinite(gamma):
        raise ValueError("gamma must be finite")
    return gamma


def gamma_varmin(k_hat: np.ndarray) -> float:
    """Cut-off minimizing the asymptotic-variance objective.

    The objective is evaluated at each distinct sorted sample value of
    ``k_hat`` (its minimizer over the whole interval [min k, max k] is
    always attained at a sample value, since the objective only changes
    there).  Ties are broken toward the largest cut-off, i.e. toward
    trimming fewer units.
    """
    k = _check_khat(k_hat)
    n = k.size
    ks = np.sort(k)
    cum = np.cumsum(ks)
    # last index of every run of equal values: the only admissible cut-offs
    last = np.flatnonzero(np.append(ks[1:] != ks[:-1], True))
    counts = (last + 1).astype(np.float64)
    obj = n * cum[last] / counts**2
    best = np.flatnonzero(obj == obj.min())[-1]
    return float(ks[last[best]])


def gamma_fraction(k_hat: np.ndarray, delta: float) -> float:
    """Cut-off at the order statistic retaining a (1 - delta) fraction.

    Returns the m-th smallest value of ``k_hat`` with
    ``m = ceil((1 - delta) * n)``; ``delta = 0`` gives the maximum, so
    nothing is trimmed.  Because thresholding is inclusive, ties at the
    cut-off can retain more than m units.
    """
    k = _check_khat(k_hat)
    delta = float(delta)
    if not 0.0 <= delta < 1.0:
        raise ValueError(f"delta must lie in [0, 1), got {delta}")
    n = k.size
    # m = ceil((1 - delta) n), computed as n - floor(delta n) to dodge the
    # IEEE cases where (1 - delta) * n lands one ulp above an integer
    m = n - int(math.floor(delta * n + 1e-12))
    m = min(max(m, 1), n)
    return float(np.partition(k, m - 1)[m - 1])


def apply_trim(k_hat: np.ndarray, gamma_hat: float) -> TrimResult:
    """Retain exactly the units with ``k_hat <= gamma_hat`` (inclusive)."""
    k = _check_khat(k_hat)
    retained = k <= gamma_hat
    return TrimResult(
        gamma_hat=float(gamma_hat),
        retained=retained,
        n_retained=int(retained.sum()),
    )


def select_gamma(k_hat: np.ndarray, spec: TrimSpec) -> float:
    """Dispatch to the cut-off rule named by ``spec.rule``."""
    if spec.rule == "constant":
        return gamma_constant(k_hat, spec.gamma)
    if spec.rule == "varmin":
        return gamma_varmin(k_hat)
    return gamma_fraction(k_hat, spec.delta)
