"""Seeded synthetic-data generators and a generate-fit-score harness.

Four study designs are covered: a binomial feeding-rate setup on a fine
grid with autoregressive history terms, a three-family comparison (beta,
negative binomial, scaled-t) over four predictor shapes, and two binary
random-intercept designs (trigonometric FPC scores; Gaussian-process
curves). True effect surfaces are fixed closed-form functions; amplitudes
are chosen so the response distributions stay well inside their useful
ranges.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .basis import BasisSpec, eval_basis
from .design import (
    FunctionalCovariate,
    FunctionalDataset,
    TermSpec,
    quadrature_weights,
)
from .errors import GeneratorError, SpecificationError
from .families import Family, make_family
from .fitting import assemble, optimize_outer
from .inference import coverage, linear_predictor, rrimse, term_estimate

STUDIES = ("binomial41", "families42", "wangshi43", "goldsmith44")
FAMILIES42 = ("beta", "negative-binomial", "scaled-t", "gaussian")
SETTINGS42 = ("int", "smoo", "te", "ff")
SETTINGS41 = ("int", "ri", "day", "ff.3", "ff.6",
              "ri+ff.3", "ri+ff.6", "day+ff.3", "day+ff.6")
AMPLITUDES = {"small": (0.06, 0.13), "intermediate": (0.04, 0.19),
              "large": (0.02, 0.34)}


@dataclass
class SimScenario:
    """Everything needed to deterministically regenerate one study cell."""

    study: str
    setting: str = "int"
    family: str = "binomial"
    snr: float | None = None
    n: int = 100
    T: int = 60
    trials: int = 60
    amplitude: str = "intermediate"
    seed: int = 1

    def __post_init__(self):
        if self.study not in STUDIES:
            raise SpecificationError(f"unknown study {self.study!r}")
        if self.study == "families42":
            if self.setting not in SETTINGS42:
                raise SpecificationError(
                    f"setting {self.setting!r} invalid for this study")
            if self.family not in FAMILIES42:
                raise SpecificationError(
                    f"family {self.family!r} invalid for this study")
            if self.family == "negative-binomial":
                if self.snr is not None:
                    raise SpecificationError(
                        "SNR cannot be set for negative-binomial responses")
            elif self.snr is None or self.snr <= 0:
                raise SpecificationError("a positive SNR is required")
        elif self.study == "binomial41":
            if self.setting not in SETTINGS41:
                raise SpecificationError(
                    f"setting {self.setting!r} invalid for this study")
            if self.amplitude not in AMPLITUDES:
                raise SpecificationError(f"unknown amplitude {self.amplitude!r}")
            if self.trials < 1:
                raise SpecificationError("trials must be at least 1")


@dataclass
class SimReplicate:
    """One generated dataset plus the exact truths used for scoring."""

    dataset: FunctionalDataset
    eta: np.ndarray  # (n, T)
    terms_true: dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)


def _rng(scenario: SimScenario, replicate: int = 0) -> np.random.Generator:
    return np.random.default_rng([int(scenario.seed), int(replicate)])


def _affine_to(vals: np.ndarray, lo: float, hi: float):
    """Coefficients (a, b) mapping the range of ``vals`` onto [lo, hi]."""
    vmin, vmax = float(np.min(vals)), float(np.max(vals))
    if vmax - vmin <= 0:
        raise GeneratorError("cannot rescale a constant array to an interval")
    a = (hi - lo) / (vmax - vmin)
    return a, lo - a * vmin


def beta_params_from_snr(eta: np.ndarray, snr: float):
    """Beta shape matrices matching a target signal-to-noise ratio.

    The predictor is first mapped linearly onto [-1.5, 1.5]; precision is
    then chosen so that snr ~ v_mu / (m_mu / (1 + phi)) where m_mu is the
    mean of mu(1-mu) and v_mu the variance of mu.
    """
    if snr is None or snr <= 0:
        raise GeneratorError("SNR must be a positive number")
    eta = np.asarray(eta, dtype=float)
    a, b = _affine_to(eta, -1.5, 1.5)
    mu = 1.0 / (1.0 + np.exp(-(a * eta + b)))
    m_mu = float(np.mean(mu * (1 - mu)))
    v_mu = float(np.var(mu))
    if v_mu <= 0:
        raise GeneratorError("constant mean surface; SNR mapping undefined")
    phi = snr * m_mu / v_mu - 1.0
    if phi <= 0:
        raise GeneratorError(f"degenerate precision {phi:.3g}; raise the SNR")
    alpha = phi * mu
    return alpha, phi - alpha


# --- closed-form true effect surfaces -----------------------------------

def _beta0_42(t):
    return np.sin(2 * np.pi * t) + 0.6 * np.cos(4 * np.pi * t) + 0.8 * t


def _f_smoo(x, t):
    # nonlinear in x, varying over t
    return (1.2 * np.sin(np.pi * x[:, None]) * np.cos(2 * np.pi * t[None, :])
            + 0.4 * np.cos(np.pi * x[:, None]))


def _f_te(x1, x2):
    return 1.5 * np.sin(np.pi * x1) * np.cos(np.pi * x2) + 2.0 * (x1 - 0.5) * (x2 - 0.5)


def _beta_ff_42(s, t):
    # coefficient surface indexed as (t, s); every s-slice varies over t
    return (2.0 * np.sin(np.pi * t[:, None]) * (1.0 + 0.5 * np.cos(np.pi * s[None, :]))
            + 1.0 * np.sin(2 * np.pi * t[:, None]) * (s[None, :] - 0.5))


def _draw_functional_covariate(rng, n, s_grid, k=8):
    spec = BasisSpec(kind="bspline", num_basis=k, domain=(0.0, 1.0))
    b = eval_basis(spec, s_grid).values
    coefs = rng.normal(0.0, 1.0, size=(n, k))
    x = coefs @ b.T
    return x - x.mean(axis=0, keepdims=True)


def gen_families(scenario: SimScenario, replicate: int = 0) -> SimReplicate:
    """Beta / negative-binomial / scaled-t / gaussian study replicate."""
    if scenario.study != "families42":
        raise SpecificationError("scenario does not belong to this study")
    rng = _rng(scenario, replicate)
    n, nt = scenario.n, scenario.T
    t_grid = np.linspace(0.0, 1.0, nt)
    terms = {"intercept": np.tile(_beta0_42(t_grid), (n, 1))}
    scalars: dict[str, np.ndarray] = {}
    functional: dict[str, FunctionalCovariate] = {}
    meta: dict = {"t_grid": t_grid}

    if scenario.setting == "smoo":
        x = rng.uniform(0.0, 1.0, n)
        scalars["x"] = x
        terms["smoo"] = _f_smoo(x, t_grid)
    elif scenario.setting == "te":
        x1 = rng.uniform(0.0, 1.0, n)
        x2 = rng.uniform(0.0, 1.0, n)
        scalars["x1"], scalars["x2"] = x1, x2
        terms["te"] = np.tile(_f_te(x1, x2)[:, None], (1, nt))
    elif scenario.setting == "ff":
        s_grid = np.linspace(0.0, 1.0, 40)
        xc = _draw_functional_covariate(rng, n, s_grid)
        functional["x"] = FunctionalCovariate(s_grid, xc)
        w, _ = quadrature_weights(
            s_grid, t_grid, lambda t: s_grid[0], lambda t: s_grid[-1])
        surf = _beta_ff_42(s_grid, t_grid)  # (T, S)
        if scenario.family == "beta":
            # a stronger functional effect keeps the coefficient surface
            # estimable at the smaller beta-response signal range
            surf = 1.4 * surf
        terms["ff"] = xc @ (w * surf).T
        meta["s_grid"] = s_grid
        meta["ff_surface"] = surf

    fam = scenario.family
    if fam == "negative-binomial":
        # overdispersion fixes the attainable relative accuracy, so the
        # common intercept carries most of the per-curve variation over t
        terms["intercept"] = 2.0 * terms["intercept"]
    eta_raw = sum(terms.values())
    if fam == "beta":
        a, b = _affine_to(eta_raw, -1.5, 1.5)
    elif fam == "negative-binomial":
        a, b = _affine_to(eta_raw, 0.5, 6.0)
    else:
        a, b = 1.0, 0.0
    for key in terms:
        terms[key] = terms[key] * a
    terms["intercept"] = terms["intercept"] + b
    if "ff_surface" in meta:
        meta["ff_surface"] = meta["ff_surface"] * a
    eta = sum(terms.values())

    if fam == "beta":
        alpha, beta = beta_params_from_snr(eta, scenario.snr)
        y = np.clip(rng.beta(alpha, beta), 1e-6, 1 - 1e-6)
        meta["phi"] = float(alpha.ravel()[0] + beta.ravel()[0])
    elif fam == "negative-binomial":
        theta = 0.5
        mu = np.exp(eta)
        y = rng.negative_binomial(theta, theta / (theta + mu)).astype(float)
        meta["theta"] = theta
    elif fam == "scaled-t":
        scale = float(np.std(eta) / scenario.snr)
        y = eta + scale * rng.standard_t(3.0, size=eta.shape)
        meta["scale"] = scale
    else:
        sd = float(np.std(eta) / scenario.snr)
        y = eta + rng.normal(0.0, sd, size=eta.shape)
        meta["sigma"] = sd

    dataset = FunctionalDataset(
        curve=np.repeat(np.arange(n), nt),
        t=np.tile(t_grid, n),
        y=y.ravel(),
        scalar_covariates=scalars,
        functional_covariates=functional,
    )
    return SimReplicate(dataset=dataset, eta=eta, terms_true=terms, meta=meta)


def _beta0_41(t, amplitude):
    plo, phi = AMPLITUDES[amplitude]
    base = np.sin(2 * np.pi * t) + 0.4 * np.cos(6 * np.pi * t)
    lo = np.log(plo / (1 - plo))
    hi = np.log(phi / (1 - phi))
    a, b = _affine_to(base, lo, hi)
    return a * base + b


def _beta_ff_41(t, s, lag):
    # bump in the lag distance, slowly modulated over t
    d = t - s
    return 0.6 * np.exp(-((d - lag / 2) ** 2) / (2 * (lag / 4) ** 2)) * (
        1.0 + 0.5 * np.cos(2 * np.pi * t)
    )


def gen_binomial(scenario: SimScenario, replicate: int = 0) -> SimReplicate:
    """Binomial study replicate; history terms are generated sequentially."""
    if scenario.study != "binomial41":
        raise SpecificationError("scenario does not belong to this study")
    rng = _rng(scenario, replicate)
    n, nt, m = scenario.n, scenario.T, scenario.trials
    t_grid = np.linspace(0.0, 1.0, nt)
    parts = scenario.setting.split("+")
    terms = {"intercept": np.tile(_beta0_41(t_grid, scenario.amplitude), (n, 1))}
    scalars: dict[str, np.ndarray] = {}
    meta: dict = {"t_grid": t_grid, "trials": m}

    if "ri" in parts:
        k = 12
        spec = BasisSpec(kind="bspline", num_basis=k, domain=(0.0, 1.0))
        b = eval_basis(spec, t_grid).values
        coefs = rng.laplace(0.0, 0.4, size=(n, k))
        terms["ri"] = coefs @ b.T
    if "day" in parts:
        day = (np.arange(n) + 0.5) / n
        scalars["day"] = day
        f = (np.sin(2 * np.pi * day[:, None]) * np.cos(2 * np.pi * t_grid[None, :])
             + 0.6 * np.cos(np.pi * day[:, None]))
        terms["day"] = 1.2 * f / np.max(np.abs(f))

    lag = None
    for p in parts:
        if p.startswith("ff"):
            lag = 0.3 if p.endswith("3") else 0.6
    eta_static = sum(terms.values())

    y = np.zeros((n, nt))
    eta = np.array(eta_static, dtype=float)
    if lag is None:
        pi = 1.0 / (1.0 + np.exp(-eta))
        y = rng.binomial(m, pi).astype(float)
    else:
        surf = _beta_ff_41(t_grid[:, None], t_grid[None, :], lag)  # (T, S=T)
        w, _ = quadrature_weights(
            t_grid, t_grid, lambda t: t - lag, lambda t: t, open_upper=True)
        wsurf = w * surf
        hist = np.zeros((n, nt))
        for l in range(nt):
            if l > 0:
                ytil = y[:, :l] - y[:, :l].mean(axis=0, keepdims=True)
                hist[:, l] = ytil @ wsurf[l, :l]
            eta[:, l] = eta_static[:, l] + hist[:, l]
            pi_l = 1.0 / (1.0 + np.exp(-eta[:, l]))
            y[:, l] = rng.binomial(m, pi_l)
        terms[f"ff.{lag:.1f}".replace("0.", "")] = hist
        meta["ff_surface"] = surf
        meta["lag"] = lag

    ytil_full = y - y.mean(axis=0, keepdims=True)
    functional = {"ypast": FunctionalCovariate(t_grid, ytil_full)} if lag else {}
    dataset = FunctionalDataset(
        curve=np.repeat(np.arange(n), nt),
        t=np.tile(t_grid, n),
        y=y.ravel(),
        scalar_covariates=scalars,
        functional_covariates=functional,
    )
    return SimReplicate(dataset=dataset, eta=eta, terms_true=terms, meta=meta)


def gen_goldsmith(n: int = 50, T: int = 50, seed: int = 1,
                  replicate: int = 0) -> SimReplicate:
    """Binary curves: trigonometric intercept, scalar slope, FPC random effects."""
    rng = np.random.default_rng([int(seed), int(replicate), 44])
    t = np.linspace(0.0, 1.0, T)
    beta0 = 0.6 * np.sin(2 * np.pi * t) + 0.3 * np.cos(np.pi * t)
    beta1 = 0.25 * np.exp(-((t - 0.5) ** 2) / (2 * 0.15 ** 2))
    x = rng.normal(0.0, 5.0, n)
    psi1 = np.sqrt(2.0) * np.sin(2 * np.pi * t)
    psi2 = np.sqrt(2.0) * np.cos(2 * np.pi * t)
    xi = rng.normal(0.0, 1.0, (n, 2)) * np.sqrt([1.0, 0.5])
    b = xi[:, :1] * psi1[None, :] + xi[:, 1:] * psi2[None, :]
    terms = {
        "intercept": np.tile(beta0, (n, 1)),
        "slope": x[:, None] * beta1[None, :],
        "ri": b,
    }
    eta = sum(terms.values())
    y = rng.binomial(1, 1.0 / (1.0 + np.exp(-eta))).astype(float)
    dataset = FunctionalDataset(
        curve=np.repeat(np.arange(n), T),
        t=np.tile(t, n),
        y=y.ravel(),
        scalar_covariates={"x": x},
    )
    return SimReplicate(dataset=dataset, eta=eta, terms_true=terms,
                        meta={"t_grid": t})


def gen_wangshi(n: int = 60, T: int = 61, seed: int = 1, replicate: int = 0,
                variance: float = 1.0, length_scale: float = 0.2) -> SimReplicate:
    """Binary curves: cubed-sine intercept plus Gaussian-process deviations."""
    rng = np.random.default_rng([int(seed), int(replicate), 43])
    t = np.linspace(0.0, 1.0, T)
    beta0 = 1.5 * np.sin(2 * np.pi * t) ** 3
    d2 = (t[:, None] - t[None, :]) ** 2
    k = variance * np.exp(-d2 / (2 * length_scale ** 2))
    k_j = k + 1e-10 * variance * np.eye(T)
    try:
        chol = np.linalg.cholesky(k_j)
    except np.linalg.LinAlgError:
        raise GeneratorError("covariance kernel not positive definite")
    b = rng.normal(0.0, 1.0, (n, T)) @ chol.T
    terms = {"intercept": np.tile(beta0, (n, 1)), "ri": b}
    eta = sum(terms.values())
    y = rng.binomial(1, 1.0 / (1.0 + np.exp(-eta))).astype(float)
    dataset = FunctionalDataset(
        curve=np.repeat(np.arange(n), T),
        t=np.tile(t, n),
        y=y.ravel(),
    )
    return SimReplicate(dataset=dataset, eta=eta, terms_true=terms,
                        meta={"t_grid": t, "kernel": k})


def generate(scenario: SimScenario, replicate: int = 0) -> SimReplicate:
    """Dispatch to the study-specific generator."""
    if scenario.study == "families42":
        return gen_families(scenario, replicate)
    if scenario.study == "binomial41":
        return gen_binomial(scenario, replicate)
    if scenario.study == "goldsmith44":
        return gen_goldsmith(scenario.n, scenario.T, scenario.seed, replicate)
    return gen_wangshi(scenario.n, scenario.T, scenario.seed, replicate)


def _bs(k, domain=(0.0, 1.0), kind="bspline"):
    return BasisSpec(kind=kind, num_basis=k, domain=domain)


def model_terms(scenario: SimScenario) -> list[TermSpec]:
    """The fitted model that matches a scenario's generating predictor."""
    if scenario.study == "families42":
        terms = [TermSpec(kind="intercept", basis_t=_bs(20), label="intercept")]
        if scenario.setting == "smoo":
            terms.append(TermSpec(kind="smooth-scalar", covariates=("x",),
                                  basis_x=_bs(8), basis_t=_bs(8), label="smoo"))
        elif scenario.setting == "te":
            terms.append(TermSpec(kind="smooth-scalar-interaction",
                                  covariates=("x1", "x2"), basis_x=_bs(6),
                                  basis_x2=_bs(6), varies_over_t=False,
                                  label="te"))
        elif scenario.setting == "ff":
            terms.append(TermSpec(kind="functional-linear", covariates=("x",),
                                  basis_x=_bs(5), basis_t=_bs(5),
                                  center_covariate=True, label="ff"))
        return terms
    if scenario.study == "binomial41":
        terms = [TermSpec(kind="intercept",
                          basis_t=_bs(24, kind="cyclic-bspline"),
                          label="intercept")]
        parts = scenario.setting.split("+")
        if "ri" in parts:
            terms.append(TermSpec(kind="random-intercept", covariates=("curve",),
                                  basis_t=_bs(8), label="ri"))
        if "day" in parts:
            terms.append(TermSpec(kind="smooth-scalar", covariates=("day",),
                                  basis_x=_bs(8), basis_t=_bs(5), label="day"))
        for p in parts:
            if p.startswith("ff"):
                lag = 0.3 if p.endswith("3") else 0.6
                terms.append(TermSpec(kind="functional-linear",
                                      covariates=("ypast",), basis_x=_bs(5),
                                      basis_t=_bs(5), lag=lag, label=p))
        return terms
    if scenario.study == "goldsmith44":
        return [
            TermSpec(kind="intercept", basis_t=_bs(10), label="intercept"),
            TermSpec(kind="linear-scalar", covariates=("x",), basis_t=_bs(8),
                     label="slope"),
            TermSpec(kind="random-intercept", covariates=("curve",),
                     basis_t=_bs(8), label="ri"),
        ]
    return [
        TermSpec(kind="intercept", basis_t=_bs(10), label="intercept"),
        TermSpec(kind="random-intercept", covariates=("curve",),
                 basis_t=_bs(8), label="ri"),
    ]


def scenario_family(scenario: SimScenario) -> Family:
    if scenario.study == "families42":
        if scenario.family == "scaled-t":
            return make_family("scaled-t", df=3.0)
        return make_family(scenario.family)
    trials = scenario.trials if scenario.study == "binomial41" else 1
    return make_family("binomial", trials=trials)


def run_replicate(scenario: SimScenario, replicate: int = 0,
                  level: float = 0.95, gtol: float = 1e-3,
                  max_outer: int = 40) -> dict:
    """Generate one replicate, fit the matching model, score the fit."""
    rep = generate(scenario, replicate)
    t0 = time.perf_counter()
    system = assemble(rep.dataset, model_terms(scenario), scenario_family(scenario))
    fit = optimize_outer(system, gtol=gtol, max_outer=max_outer)
    elapsed = time.perf_counter() - t0

    n, nt = rep.eta.shape
    eta_hat, se = linear_predictor(fit)
    eta_hat = eta_hat.reshape(n, nt)
    se = se.reshape(n, nt)
    z = float(stats.norm.ppf(0.5 + level / 2.0))
    out = {
        "study": scenario.study,
        "setting": scenario.setting,
        "family": scenario.family if scenario.study == "families42" else "binomial",
        "replicate": replicate,
        "rrimse_eta": rrimse(eta_hat, rep.eta),
        "coverage_eta": coverage(eta_hat - z * se, eta_hat + z * se, rep.eta),
        "edf": fit.edf_total,
        "laml": fit.laml_value,
        "converged": fit.converged,
        "seconds": elapsed,
    }
    if fit.nu.size:
        out["nuisance"] = float(fit.nu[0])

    if scenario.study == "families42" and scenario.setting == "ff":
        s_grid = rep.meta["s_grid"]
        t_grid = rep.meta["t_grid"]
        idx = [b.label for b in system.design.blocks].index("ff")
        est = term_estimate(fit, idx, s_grid, t_grid, level=level)
        truth = rep.meta["ff_surface"].T  # (S, T)
        out["rrimse_ff"] = rrimse(est.values, truth)
        out["coverage_ff"] = coverage(est.lower, est.upper, truth)
    return out
