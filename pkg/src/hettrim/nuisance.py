"""Cross-fitted nuisance estimation.

Given observational data (X, Y, Z) this module estimates, for every unit,
the propensity e(x) = P(Z=1 | X=x), the arm-specific conditional means
mu_w(x) = E[Y | X=x, Z=w], and the arm-specific conditional variances
sigma2_w(x).  Variances are obtained from two regressions via the moment
identity Var = E[Y^2|x] - (E[Y|x])^2, floored at a small positive value.

With ``n_folds >= 2`` the sample is split into folds by a seeded shuffle
and every unit's nuisances are predicted by models fit on the other folds
(cross-fitting).  With ``n_folds == 1`` models are fit on the full sample
and predict in-sample; this is the regime that relies on the fitted
classes being simple enough, and is known to understate uncertainty with
flexible learners.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Tuple

import numpy as np

from ._streams import (
    NS_EHAT,
    NS_FOLDS,
    NS_M2_0,
    NS_M2_1,
    NS_MU0,
    NS_MU1,
    child_seed,
    stream,
)
from .regressors import RegressorSpec, fit_regressor


@dataclass
class Dataset:
    """Validated observational sample.

    Attributes
    ----------
    covariates : (n, d) float array
    response : (n,) float array
    treatment : (n,) integer array with entries in {0, 1}
    """

    covariates: np.ndarray
    response: np.ndarray
    treatment: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.covariates, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[1] < 1:
            raise ValueError(f"covariates must be (n, d) with d >= 1, got {x.shape}")
        y = np.asarray(self.response, dtype=np.float64)
        z = np.asarray(self.treatment)
        n = x.shape[0]
        if y.shape != (n,) or z.shape != (n,):
            raise ValueError(
                f"length mismatch: covariates n={n}, response {y.shape}, "
                f"treatment {z.shape}"
            )
        if n < 2:
            raise ValueError("a dataset needs at least 2 rows")
        if not np.isfinite(x).all():
            raise ValueError("covariates contain non-finite values")
        if not np.isfinite(y).all():
            raise ValueError("response contains non-finite values")
        zf = np.asarray(z, dtype=np.float64)
        if not np.isin(zf, (0.0, 1.0)).all():
            bad = zf[~np.isin(zf, (0.0, 1.0))][0]
            raise ValueError(f"treatment values must be 0 or 1, found {bad!r}")
        z = zf.astype(np.int64)
        if z.sum() == 0:
            raise ValueError("empty treated arm")
        if z.sum() == n:
            raise ValueError("empty control arm")
        self.covariates = x
        self.response = y
        self.treatment = z

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def d(self) -> int:
        return self.covariates.shape[1]


@dataclass
class NuisanceDiagnostics:
    """Fit diagnostics carried along for reporting."""

    raw_propensity_min: float
    raw_propensity_max: float
    n_variances_floored: int
    fold_sizes: list[int] = field(default_factory=list)


@dataclass
class NuisanceEstimates:
    """Per-unit out-of-fold nuisance predictions.

    ``e_hat`` is clipped into the configured bounds; ``var0_hat`` and
    ``var1_hat`` are floored at the configured positive value.  ``fold_of``
    records the fold index of each unit (all zeros when ``n_folds == 1``).
    """

    e_hat: np.ndarray
    mu0_hat: np.ndarray
    mu1_hat: np.ndarray
    var0_hat: np.ndarray
    var1_hat: np.ndarray
    fold_of: np.ndarray
    n_folds: int
    diagnostics: NuisanceDiagnostics


def conditional_variance_from_moments(
    second_moment: np.ndarray, mean: np.ndarray, floor: float
) -> np.ndarray:
    """Variance from first and second conditional moments, floored.

    Returns ``max(floor, second_moment - mean**2)`` elementwise.  The floor
    must be strictly positive; it guards against negative raw values, which
    can occur because the two moments are estimated by separate regressions.
    """
    if not floor > 0.0:
        raise ValueError("variance floor must be strictly positive")
    second_moment = np.asarray(second_moment, dtype=np.float64)
    mean = np.asarray(mean, dtype=np.float64)
    return np.maximum(floor, second_moment - mean**2)


def _fold_assignment(n: int, n_folds: int, seed: int) -> np.ndarray:
    """Seeded shuffle, then contiguous blocks of near-equal size."""
    perm = stream(seed, NS_FOLDS).permutation(n)
    fold_of = np.empty(n, dtype=np.int64)
    for f, block in enumerate(np.array_split(perm, n_folds)):
        fold_of[block] = f
    return fold_of


def cross_fit_nuisances(
    data: Dataset,
    spec: RegressorSpec,
    n_folds: int = 5,
    clip: Tuple[float, float] = (0.01, 0.99),
    variance_floor: float = 1e-6,
) -> NuisanceEstimates:
    """Estimate propensity, outcome means, and outcome variances per unit.

    Parameters
    ----------
    data : Dataset
    spec : RegressorSpec
        Learner used for all five regressions (Z on X; Y and Y^2 on X
        within each arm).  Each regression draws its own stream derived
        from ``spec.seed`` and the fold index.
    n_folds : int
        ``1`` fits on the full sample and predicts in-sample; ``k >= 2``
        produces out-of-fold predictions from a seeded contiguous-block
        split.
    clip : (low, high)
        Propensity predictions are clipped into ``[low, high]``,
        ``0 < low < high < 1``.
    variance_floor : float
        Strictly positive lower bound applied to both variance estimates.

    Raises
    ------
    ValueError
        On invalid arguments, on ``n < 2 * n_folds``, or when some fold's
        training complement has an empty treatment arm.
    """
    if int(n_folds) != n_folds or n_folds < 1:
        raise ValueError("n_folds must be a positive integer")
    n_folds = int(n_folds)
    lo, hi = float(clip[0]), float(clip[1])
    if not (0.0 < lo < hi < 1.0):
        raise ValueError(f"clip bounds must satisfy 0 < low < high < 1, got {clip}")
    if not variance_floor > 0.0:
        raise ValueError("variance floor must be strictly positive")
    n = data.n
    if n_folds > 1 and n < 2 * n_folds:
        raise ValueError(f"n={n} is too small for {n_folds} folds (need 2 per fold)")

    x, y, z = data.covariates, data.response, data.treatment
    if n_folds == 1:
        fold_of = np.zeros(n, dtype=np.int64)
    else:
        fold_of = _fold_assignment(n, n_folds, spec.seed)

    e_raw = np.empty(n)
    mu0 = np.empty(n)
    mu1 = np.empty(n)
    m2_0 = np.empty(n)
    m2_1 = np.empty(n)

    for f in range(n_folds):
        test = np.flatnonzero(fold_of == f)
        train = test if n_folds == 1 else np.flatnonzero(fold_of != f)
        tr0 = train[z[train] == 0]
        tr1 = train[z[train] == 1]
        if tr0.size == 0:
            raise ValueError(f"empty control arm in the training data for fold {f}")
        if tr1.size == 0:
            raise ValueError(f"empty treated arm in the training data for fold {f}")

        def fit_predict(ns, rows, targets):
            sub = replace(spec, seed=child_seed(spec.seed, ns, f))
            model = fit_regressor(sub, x[rows], targets)
            return model.predict(x[test])

        e_raw[test] = fit_predict(NS_EHAT, train, z[train].astype(np.float64))
        mu0[test] = fit_predict(NS_MU0, tr0, y[tr0])
        mu1[test] = fit_predict(NS_MU1, tr1, y[tr1])
        m2_0[test] = fit_predict(NS_M2_0, tr0, y[tr0] ** 2)
        m2_1[test] = fit_predict(NS_M2_1, tr1, y[tr1] ** 2)

    var0 = conditional_variance_from_moments(m2_0, mu0, variance_floor)
    var1 = conditional_variance_from_moments(m2_1, mu1, variance_floor)
    n_floored = int((m2_0 - mu0**2 < variance_floor).sum())
    n_floored += int((m2_1 - mu1**2 < variance_floor).sum())

    diag = NuisanceDiagnostics(
        raw_propensity_min=float(e_raw.min()),
        raw_propensity_max=float(e_raw.max()),
        n_variances_floored=n_floored,
        fold_sizes=np.bincount(fold_of, minlength=n_folds).tolist(),
    )
    return NuisanceEstimates(
        e_hat=np.clip(e_raw, lo, hi),
        mu0_hat=mu0,
        mu1_hat=mu1,
        var0_hat=var0,
        var1_hat=var1,
        fold_of=fold_of,
        n_folds=n_folds,
        diagnostics=diag,
    )
