import math

import numpy as np
import numpy.testing as npt
import pytest

from hettrim import (
    NuisanceEstimates,
    TrimSpec,
    apply_trim,
    compute_khat,
    gamma_constant,
    gamma_fraction,
    gamma_varmin,
    select_gamma,
    varmin_objective,
)
from hettrim.nuisance import NuisanceDiagnostics


def _nuis(e, var0=None, var1=None):
    e = np.asarray(e, dtype=float)
    n = e.size
    ones = np.ones(n)
    return NuisanceEstimates(
        e_hat=e,
        mu0_hat=np.zeros(n),
        mu1_hat=np.zeros(n),
        var0_hat=ones if var0 is None else np.asarray(var0, float),
        var1_hat=ones if var1 is None else np.asarray(var1, float),
        fold_of=np.zeros(n, dtype=int),
        n_folds=1,
        diagnostics=NuisanceDiagnostics(0.0, 1.0, 0, [n]),
    )


# ------------------------------------------------------------ compute_khat


def test_khat_homoscedastic_values():
    k = compute_khat(_nuis([0.5, 0.1]), "homoscedastic")
    npt.assert_allclose(k[0], 4.0)
    npt.assert_allclose(k[1], 1 / 0.1 + 1 / 0.9, rtol=1e-12)


def test_khat_homoscedastic_symmetry():
    # exactly representable propensities give exact symmetry
    e = np.array([0.25, 0.375, 0.5])
    npt.assert_array_equal(
        compute_khat(_nuis(e), "homoscedastic"),
        compute_khat(_nuis(1.0 - e), "homoscedastic"),
    )
    rng = np.random.default_rng(11)
    e = rng.uniform(0.05, 0.95, size=50)
    npt.assert_allclose(
        compute_khat(_nuis(e), "homoscedastic"),
        compute_khat(_nuis(1.0 - e), "homoscedastic"),
        rtol=1e-12,
    )


def test_khat_heteroscedastic_values():
    # unit variances at e=1/2 give 4; shrinking the treated-arm variance
    # lowers the contribution
    base = compute_khat(_nuis([0.5]), "heteroscedastic")
    npt.assert_allclose(base, [4.0])
    shrunk = compute_khat(_nuis([0.5], var1=[0.25]), "heteroscedastic")
    npt.assert_allclose(shrunk, [2.5])


def test_khat_unknown_mode():
    with pytest.raises(ValueError, match="mode"):
        compute_khat(_nuis([0.5]), "robust")


# ------------------------------------------------------------ cut-off rules


def test_gamma_constant_passthrough():
    assert gamma_constant(np.array([1.0, 2.0]), 11.1) == 11.1
    with pytest.raises(ValueError, match="finite"):
        gamma_constant(np.array([1.0]), np.inf)


def test_varmin_objective_values():
    k = np.array([1.0, 100.0])
    npt.assert_allclose(varmin_objective(k, 1.0), 2.0)
    npt.assert_allclose(varmin_objective(k, 100.0), 50.5)
    with pytest.raises(ValueError, match="no values"):
        varmin_objective(k, 0.5)


def test_gamma_varmin_examples():
    # all equal: single candidate
    assert gamma_varmin(np.array([5.0, 5.0, 5.0])) == 5.0
    # keeping only the small value halves the objective
    assert gamma_varmin(np.array([1.0, 100.0])) == 1.0
    # objective decreases along [4, 3, 8/3, 5/2]: keep everything
    k = np.array([1.0, 2.0, 3.0, 4.0])
    objs = [varmin_objective(k, g) for g in (1, 2, 3, 4)]
    npt.assert_allclose(objs, [4.0, 3.0, 8.0 / 3.0, 2.5])
    assert gamma_varmin(k) == 4.0


def test_gamma_varmin_tie_breaks_toward_larger_cutoff():
    # both candidates give objective exactly 2: [1] -> (1/2)/(1/4), [1,3] -> 2/1
    assert gamma_varmin(np.array([1.0, 3.0])) == 3.0


def _varmin_oracle(k):
    """Exhaustive evaluation with exact summation, ties toward largest."""
    n = len(k)
    best_gamma = None
    best_obj = math.inf
    for gamma in sorted(set(k.tolist())):
        kept = [v for v in k.tolist() if v <= gamma]
        obj = (math.fsum(kept) / n) / (len(kept) / n) ** 2
        if obj <= best_obj:  # walking upward, so larger gammas win ties
            best_obj, best_gamma = obj, gamma
    return k <= best_gamma


def test_gamma_varmin_matches_exhaustive_oracle():
    rng = np.random.default_rng(12)
    for trial in range(300):
        n = int(rng.integers(1, 120))
        if trial % 2:
            k = rng.integers(1, 6, size=n).astype(float)  # many ties
        else:
            k = rng.lognormal(0.0, 1.0, size=n)
        mask = k <= gamma_varmin(k)
        npt.assert_array_equal(mask, _varmin_oracle(k), err_msg=f"trial {trial}")


def test_gamma_varmin_scale_covariance():
    rng = np.random.default_rng(13)
    k = rng.lognormal(size=200)
    g = gamma_varmin(k)
    for c in (0.5, 2.0, 4.0, 3.0):
        gc = gamma_varmin(c * k)
        npt.assert_allclose(gc, c * g, rtol=1e-12)
        npt.assert_array_equal(c * k <= gc, k <= g)


def test_gamma_fraction_order_statistic():
    k = np.arange(1.0, 11.0)  # 1..10
    assert gamma_fraction(k, 0.2) == 8.0
    assert gamma_fraction(k, 0.0) == 10.0
    # ties at the cut-off keep more than the nominal count
    k = np.array([5.0, 5.0, 5.0, 1.0])
    gam = gamma_fraction(k, 0.5)
    assert gam == 5.0
    assert apply_trim(k, gam).n_retained == 4


def test_gamma_fraction_validation():
    with pytest.raises(ValueError, match="delta"):
        gamma_fraction(np.array([1.0]), 1.0)
    with pytest.raises(ValueError, match="delta"):
        gamma_fraction(np.array([1.0]), -0.1)


def test_gamma_fraction_retains_at_least_nominal_count():
    rng = np.random.default_rng(14)
    for _ in range(200):
        n = int(rng.integers(1, 150))
        k = np.round(rng.lognormal(size=n), int(rng.integers(0, 3)))
        delta = float(rng.uniform(0.0, 0.99))
        res = apply_trim(k, gamma_fraction(k, delta))
        assert res.n_retained >= math.ceil((1.0 - delta) * n) - 1e-9


def test_gamma_fraction_monotone_in_delta():
    rng = np.random.default_rng(15)
    k = rng.lognormal(size=300)
    deltas = [0.0, 0.1, 0.25, 0.5, 0.9]
    gammas = [gamma_fraction(k, d) for d in deltas]
    masks = [apply_trim(k, g).retained for g in gammas]
    for a, b in zip(gammas, gammas[1:]):
        assert b <= a
    for small, big in zip(masks[1:], masks):
        # larger delta retains a subset
        assert not (small & ~big).any()


def test_apply_trim_inclusive_boundary():
    k = np.array([1.0, 2.0, 2.0, 3.0])
    res = apply_trim(k, 2.0)
    npt.assert_array_equal(res.retained, [True, True, True, False])
    assert res.n_retained == 3
    assert res.gamma_hat == 2.0


def test_khat_validation():
    with pytest.raises(ValueError, match="nonempty"):
        gamma_varmin(np.array([]))
    with pytest.raises(ValueError, match="non-finite"):
        gamma_fraction(np.array([1.0, np.nan]), 0.1)


def test_select_gamma_dispatch():
    k = np.array([1.0, 2.0, 3.0, 4.0])
    assert select_gamma(k, TrimSpec(rule="constant", gamma=2.5)) == 2.5
    assert select_gamma(k, TrimSpec(rule="varmin")) == 4.0
    assert select_gamma(k, TrimSpec(rule="fraction", delta=0.5)) == 2.0


def test_trim_spec_validation():
    with pytest.raises(ValueError, match="gamma"):
        TrimSpec(rule="constant")
    with pytest.raises(ValueError, match="delta"):
        TrimSpec(rule="fraction")
    with pytest.raises(ValueError, match="mode"):
        TrimSpec(mode="other")
    with pytest.raises(ValueError, match="rule"):
        TrimSpec(rule="other")


def test_constant_cutoff_equals_propensity_interval():
    # Under the propensity-only contribution 1/(e(1-e)), the cut-off
    # 1/0.1 + 1/0.9 retains exactly the units with e in [0.1, 0.9], apart
    # from values within a rounding error of the interval edges.
    gamma = 1.0 / 0.1 + 1.0 / 0.9
    rng = np.random.default_rng(515)
    e = np.concatenate([rng.uniform(0.001, 0.999, size=2000),
                        [0.1, 0.9, 0.0999999, 0.9000001]])
    k = 1.0 / (e * (1.0 - e))
    kept = apply_trim(k, gamma).retained
    want = (e >= 0.1) & (e <= 0.9)
    away = (np.abs(e - 0.1) > 1e-9) & (np.abs(e - 0.9) > 1e-9)
    assert np.array_equal(kept[away], want[away])
    assert np.mean(kept != want) < 0.01
