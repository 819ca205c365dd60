"""Prediction, pointwise intervals, and evaluation metrics."""
import numpy as np
import pytest
from scipy import stats

from gfam.basis import BasisSpec
from gfam.design import FunctionalDataset, TermSpec
from gfam.errors import MetricError
from gfam.families import make_family
from gfam.fitting import assemble, optimize_outer
from gfam.inference import (
    brier,
    coverage,
    linear_predictor,
    predict,
    rimse,
    rrimse,
    term_estimate,
)


def _toy_fit(family_name="gaussian", seed=0, **fam_kwargs):
    rng = np.random.default_rng(seed)
    n, nt = 15, 12
    t = np.linspace(0, 1, nt)
    x = rng.uniform(0, 1, n)
    eta = np.sin(2 * np.pi * t)[None, :] * (1 + x[:, None])
    fam = make_family(family_name, **fam_kwargs)
    if family_name == "gaussian":
        y = eta + rng.normal(0, 0.2, eta.shape)
    else:
        y = rng.binomial(int(fam.trials), 1 / (1 + np.exp(-eta))).astype(float)
    ds = FunctionalDataset(
        curve=np.repeat(np.arange(n), nt),
        t=np.tile(t, n),
        y=y.ravel(),
        scalar_covariates={"x": x},
    )
    terms = [
        TermSpec(kind="intercept", basis_t=BasisSpec("bspline", 6, (0.0, 1.0))),
        TermSpec(kind="smooth-scalar", covariates=("x",),
                 basis_x=BasisSpec("bspline", 5, (0.0, 1.0)),
                 basis_t=BasisSpec("bspline", 4, (0.0, 1.0))),
    ]
    system = assemble(ds, terms, fam)
    fit = optimize_outer(system, gtol=1e-3, max_outer=25)
    return fit, ds, eta


def test_se_matches_sandwich_free_formula():
    """Standard errors equal sqrt(diag(Phi V Phi^T)) row by row."""
    fit, ds, _ = _toy_fit()
    eta, se = linear_predictor(fit)
    phi = fit.system.Phi
    want = np.sqrt(np.einsum("ij,jk,ik->i", phi, fit.V_theta, phi))
    assert np.allclose(se, want, atol=1e-10)
    assert np.allclose(eta, phi @ fit.theta, atol=1e-12)


def test_gaussian_unpenalized_intervals_match_ols():
    """With smoothing switched off the intervals reduce to the usual
    linear-model formulas with known variance."""
    rng = np.random.default_rng(4)
    n, nt = 30, 6
    t = np.linspace(0, 1, nt)
    y = np.sin(2 * np.pi * t)[None, :] + rng.normal(0, 0.3, (n, nt))
    ds = FunctionalDataset(
        curve=np.repeat(np.arange(n), nt), t=np.tile(t, n), y=y.ravel())
    fam = make_family("gaussian", nu0=0.09, nuisance_estimated=False)
    system = assemble(
        ds, [TermSpec(kind="intercept", basis_t=BasisSpec("bspline", 5, (0.0, 1.0)))],
        fam)
    fit = optimize_outer(system, fixed_lambda=[1e-10])
    x = system.Phi
    beta = np.linalg.solve(x.T @ x, x.T @ system.y)
    cov = 0.09 * np.linalg.inv(x.T @ x)
    assert np.allclose(fit.theta, beta, atol=1e-6)
    out = predict(fit, level=0.95)
    se = np.sqrt(np.einsum("ij,jk,ik->i", x, cov, x))
    z = stats.norm.ppf(0.975)
    assert np.allclose(out["se_eta"], se, rtol=1e-4)
    assert np.allclose(out["eta_upper"] - out["eta_lower"], 2 * z * se, rtol=1e-4)


def test_predict_mu_through_inverse_link():
    fit, ds, _ = _toy_fit("binomial", trials=8)
    out = predict(fit, level=0.9)
    assert np.allclose(out["mu"], 1 / (1 + np.exp(-out["eta"])), atol=1e-12)
    assert np.all(out["mu_lower"] <= out["mu"] + 1e-12)
    assert np.all(out["mu"] <= out["mu_upper"] + 1e-12)
    assert np.all((out["mu_lower"] >= 0) & (out["mu_upper"] <= 1))


def test_interval_width_monotone_in_level():
    fit, _, _ = _toy_fit()
    w80 = predict(fit, level=0.8)
    w99 = predict(fit, level=0.99)
    assert np.all((w99["eta_upper"] - w99["eta_lower"])
                  > (w80["eta_upper"] - w80["eta_lower"]) - 1e-12)


def test_term_estimate_reconstructs_fitted_surface():
    fit, ds, _ = _toy_fit()
    grid = np.linspace(0.05, 0.95, 7)
    tg = np.linspace(0.0, 1.0, 9)
    est = term_estimate(fit, 1, cov_grid=grid, t_grid=tg)
    assert est.values.shape == (7, 9)
    assert est.se.shape == (7, 9)
    assert np.all(est.lower <= est.values) and np.all(est.values <= est.upper)
    # sum-to-zero constraint: column means of the estimated surface are
    # numerically small relative to its size
    col_means = est.values.mean(axis=0)
    assert np.abs(col_means).max() < 0.2 * np.abs(est.values).max() + 1e-8


def test_rimse_and_rrimse_basic_values():
    truth = np.array([[0.0, 1.0, 2.0, 3.0], [1.0, 3.0, 5.0, 7.0]])
    est = truth + 0.5
    # trapezoid of a constant squared error over domain length 1
    assert rimse(est, truth) == pytest.approx(0.5)
    sds = truth.std(axis=1, ddof=0)
    want = np.sqrt(np.mean(0.25 / sds**2))
    assert rrimse(est, truth) == pytest.approx(want, rel=1e-6)


def test_rrimse_invariant_to_affine_truth_error_rescale():
    rng = np.random.default_rng(1)
    truth = rng.normal(size=(8, 20)).cumsum(axis=1)
    err = rng.normal(0, 0.1, truth.shape)
    base = rrimse(truth + err, truth)
    scaled = rrimse(3.0 * truth + 3.0 * err + 5.0, 3.0 * truth + 5.0)
    assert scaled == pytest.approx(base, rel=1e-10)


def test_rrimse_rejects_constant_truth():
    with pytest.raises(MetricError):
        rrimse(np.zeros((2, 4)), np.ones((2, 4)))


def test_coverage_and_brier():
    lower = np.array([0.0, 0.0, 0.0, 0.0])
    upper = np.array([1.0, 1.0, 1.0, 1.0])
    truth = np.array([0.5, 1.5, -0.5, 1.0])
    assert coverage(lower, upper, truth) == pytest.approx(0.5)
    prob = np.array([0.2, 0.8])
    outcome = np.array([0.0, 1.0])
    assert brier(prob, outcome) == pytest.approx((0.04 + 0.04) / 2)
    # counts are converted to proportions before scoring
    assert brier(prob, np.array([2.0, 8.0]), trials=10) == pytest.approx(0.0)
