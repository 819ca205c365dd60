"""Synthetic-study generators: distributional checks and exact truths."""
import numpy as np
import pytest

from gfam.errors import GeneratorError, SpecificationError
from gfam.simgen import (
    AMPLITUDES,
    SimScenario,
    beta_params_from_snr,
    gen_goldsmith,
    gen_wangshi,
    generate,
    model_terms,
    scenario_family,
)


def _scn(**kw):
    base = dict(study="families42", setting="int", family="beta",
                snr=5.0, n=30, T=40, seed=1)
    base.update(kw)
    return SimScenario(**base)


def test_same_seed_is_bit_identical():
    for scn in (_scn(), _scn(study="binomial41", setting="ri+ff.3",
                          family="binomial", snr=None, n=20, T=30)):
        a = generate(scn, replicate=3)
        b = generate(scn, replicate=3)
        assert np.array_equal(a.dataset.y, b.dataset.y)
        assert np.array_equal(a.eta, b.eta)


def test_different_replicates_differ():
    a = generate(_scn(), replicate=0)
    b = generate(_scn(), replicate=1)
    assert not np.array_equal(a.dataset.y, b.dataset.y)


@pytest.mark.parametrize("setting", ["int", "smoo", "te", "ff"])
@pytest.mark.parametrize("family", ["beta", "negative-binomial", "scaled-t"])
def test_truth_components_sum_to_eta(setting, family):
    snr = None if family == "negative-binomial" else 5.0
    rep = generate(_scn(setting=setting, family=family, snr=snr))
    total = sum(rep.terms_true.values())
    assert np.allclose(total, rep.eta, atol=1e-10)


def test_binomial_truths_sum_to_eta_with_history():
    scn = _scn(study="binomial41", setting="day+ff.6", family="binomial",
               snr=None, n=25, T=40)
    rep = generate(scn)
    assert np.allclose(sum(rep.terms_true.values()), rep.eta, atol=1e-10)


def test_beta_snr_shapes():
    rng = np.random.default_rng(0)
    eta = rng.normal(0, 2, (20, 15))
    alpha, beta = beta_params_from_snr(eta, snr=3.0)
    phi = alpha + beta
    assert np.allclose(phi, phi.flat[0])  # common precision
    assert np.all(alpha > 0) and np.all(beta > 0)
    mu = alpha / phi
    m_mu = np.mean(mu * (1 - mu))
    v_mu = np.var(mu)
    assert v_mu * (1 + phi.flat[0]) / m_mu == pytest.approx(3.0, rel=1e-8)


def test_beta_snr_mean_matches_monte_carlo():
    rng = np.random.default_rng(7)
    eta = rng.normal(0, 1, 8)
    alpha, beta = beta_params_from_snr(eta, snr=4.0)
    mu = alpha / (alpha + beta)
    draws = rng.beta(alpha, beta, size=(100_000, 8))
    mc_se = draws.std(axis=0) / np.sqrt(draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0) - mu) < 3 * mc_se + 1e-6)


def test_beta_snr_degenerate_rejected():
    with pytest.raises(GeneratorError):
        beta_params_from_snr(np.linspace(-1, 1, 50), snr=0.01)
    with pytest.raises(GeneratorError):
        beta_params_from_snr(np.linspace(-1, 1, 50), snr=-1.0)
    with pytest.raises(GeneratorError):
        beta_params_from_snr(np.zeros(10), snr=5.0)


@pytest.mark.parametrize("amplitude", ["small", "intermediate", "large"])
def test_binomial_intercept_probability_range_exact(amplitude):
    scn = _scn(study="binomial41", setting="int", family="binomial",
               snr=None, n=10, T=200, amplitude=amplitude)
    rep = generate(scn)
    pi = 1.0 / (1.0 + np.exp(-rep.terms_true["intercept"][0]))
    lo, hi = AMPLITUDES[amplitude]
    assert pi.min() == pytest.approx(lo, abs=1e-9)
    assert pi.max() == pytest.approx(hi, abs=1e-9)


def test_binomial_counts_within_trials():
    scn = _scn(study="binomial41", setting="ri", family="binomial",
               snr=None, n=15, T=30, trials=60)
    rep = generate(scn)
    y = rep.dataset.y
    assert np.all((y >= 0) & (y <= 60))
    assert np.allclose(y, np.round(y))


def test_families_responses_respect_support():
    beta_rep = generate(_scn(setting="smoo"))
    assert np.all((beta_rep.dataset.y > 0) & (beta_rep.dataset.y < 1))
    nb_rep = generate(_scn(family="negative-binomial", snr=None, setting="smoo"))
    y = nb_rep.dataset.y
    assert np.all(y >= 0) and np.allclose(y, np.round(y))


def test_scaled_t_noise_scale_tracks_snr():
    """Residual spread shrinks roughly like 1/SNR for the heavy-tailed family."""
    reps = {snr: generate(_scn(family="scaled-t", snr=snr, n=200, T=60))
            for snr in (2.0, 10.0)}
    spread = {snr: np.median(np.abs(r.dataset.y.reshape(200, 60) - r.eta))
              for snr, r in reps.items()}
    ratio = spread[2.0] / spread[10.0]
    assert 3.0 < ratio < 8.0


def test_goldsmith_score_and_covariate_moments():
    rep = gen_goldsmith(n=10_000, T=20, seed=3)
    x = rep.dataset.scalar_covariates["x"]
    assert np.var(x) == pytest.approx(25.0, rel=0.05)
    # random deviation variance at t: psi1^2 + 0.5 psi2^2 = 2 sin^2 + cos^2
    t = rep.meta["t_grid"]
    want = 2 * np.sin(2 * np.pi * t) ** 2 + np.cos(2 * np.pi * t) ** 2
    got = rep.terms_true["ri"].var(axis=0)
    assert np.allclose(got, want, rtol=0.1, atol=0.05)


def test_wangshi_gp_covariance_matches_kernel():
    rep = gen_wangshi(n=10_000, T=15, seed=5)
    b = rep.terms_true["ri"]
    emp = np.cov(b, rowvar=False)
    k = rep.meta["kernel"]
    assert np.abs(emp - k).max() < 0.05 * k.max()


def test_invalid_scenarios_rejected():
    with pytest.raises(SpecificationError):
        _scn(family="negative-binomial", snr=5.0)  # NB has no SNR knob
    with pytest.raises(SpecificationError):
        _scn(family="beta", snr=None)
    with pytest.raises(SpecificationError):
        _scn(setting="nope")
    with pytest.raises(SpecificationError):
        _scn(study="unknown-study")
    with pytest.raises(SpecificationError):
        _scn(study="binomial41", setting="int", family="binomial",
             snr=None, amplitude="huge")


def test_model_terms_cover_generated_effects():
    """Every generated truth has a matching term in the fitted model."""
    for scn in (_scn(setting="smoo"),
                _scn(setting="ff"),
                _scn(study="binomial41", setting="ri+ff.3", family="binomial",
                     snr=None),
                _scn(study="goldsmith44", setting="int", family="binomial",
                     snr=None)):
        rep = generate(scn)
        labels = {term.label for term in model_terms(scn)}
        missing = set(rep.terms_true) - labels
        assert not missing, missing
        fam = scenario_family(scn)
        assert fam.name in ("beta", "binomial")
