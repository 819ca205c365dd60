"""Response distributions with links and the working quantities PIRLS needs.

Each family exposes the exact log-likelihood (normalizing constants
included, since the marginal criterion compares fits across nuisance
values), the score with respect to the additive predictor, and a Fisher-type
working weight. The working response is always eta + score/weight, so the
fixed point of the reweighted least squares iteration is a stationary point
of the penalized log-likelihood for every family, including the scaled-t
whose weight is a constant Fisher approximation.
"""
from __future__ import annotations

import numpy as np
from scipy import special

from .errors import DataError, DomainError

WEIGHT_FLOOR = 1e-10
_ETA_CLIP = 30.0


def _expit(eta):
    return special.expit(np.clip(eta, -_ETA_CLIP, _ETA_CLIP))


def _exp(eta):
    return np.exp(np.clip(eta, -_ETA_CLIP, _ETA_CLIP))


class Family:
    """Base class; subclasses define one response distribution."""

    name: str = ""
    link: str = ""
    nuisance_name: str | None = None
    nuisance_estimated: bool = False

    def __init__(self, nu0: float | None = None, nuisance_estimated: bool | None = None):
        self.nu0 = nu0
        if nuisance_estimated is not None:
            self.nuisance_estimated = nuisance_estimated

    @property
    def n_nuisance(self) -> int:
        return 0 if self.nuisance_name is None else 1

    def _nu(self, nu) -> float:
        if self.nuisance_name is None:
            return 1.0
        if nu is not None and np.size(nu) > 0:
            val = float(np.atleast_1d(nu)[0])
        else:
            val = self.nu0
        if val is None or val <= 0:
            raise DomainError(f"{self.nuisance_name} must be positive")
        return val

    def default_nu(self, y: np.ndarray) -> np.ndarray:
        if self.nuisance_name is None:
            return np.empty(0)
        if self.nu0 is not None:
            return np.array([float(self.nu0)])
        return np.array([self._moment_nu(y)])

    def _moment_nu(self, y):  # pragma: no cover - overridden where estimated
        return 1.0

    # subclass interface -------------------------------------------------
    def validate_y(self, y):
        pass

    def link_fn(self, mu):
        raise NotImplementedError

    def inv_link(self, eta):
        raise NotImplementedError

    def loglik(self, y, mu, nu=None) -> float:
        raise NotImplementedError

    def score_eta(self, y, mu, nu=None) -> np.ndarray:
        raise NotImplementedError

    def weight(self, mu, nu=None) -> np.ndarray:
        raise NotImplementedError

    def saturated_mu(self, y) -> np.ndarray:
        return np.asarray(y, dtype=float)

    def init_mu(self, y) -> np.ndarray:
        raise NotImplementedError


class Gaussian(Family):
    name = "gaussian"
    link = "identity"
    nuisance_name = "sigma2"
    nuisance_estimated = True

    def _moment_nu(self, y):
        return max(np.var(y), 1e-8)

    def link_fn(self, mu):
        return np.asarray(mu, dtype=float)

    def inv_link(self, eta):
        return np.asarray(eta, dtype=float)

    def loglik(self, y, mu, nu=None):
        s2 = self._nu(nu)
        r = y - mu
        return float(-0.5 * np.sum(r * r) / s2 - 0.5 * y.size * np.log(2 * np.pi * s2))

    def score_eta(self, y, mu, nu=None):
        return (y - mu) / self._nu(nu)

    def weight(self, mu, nu=None):
        return np.full(np.shape(mu), 1.0 / self._nu(nu))

    def init_mu(self, y):
        return np.asarray(y, dtype=float)


class Binomial(Family):
    """Counts out of a known number of trials; mu is the success probability."""

    name = "binomial"
    link = "logit"

    def __init__(self, trials=1):
        super().__init__()
        self.trials = np.asarray(trials, dtype=float)

    def validate_y(self, y):
        m = np.broadcast_to(self.trials, np.shape(y))
        if np.any(y < 0) or np.any(y > m):
            raise DataError("binomial counts must lie in 0..trials")

    def link_fn(self, mu):
        mu = np.clip(mu, 1e-12, 1 - 1e-12)
        return np.log(mu / (1 - mu))

    def inv_link(self, eta):
        return _expit(eta)

    def loglik(self, y, mu, nu=None):
        m = np.broadcast_to(self.trials, np.shape(y))
        pi = np.clip(mu, 1e-12, 1 - 1e-12)
        const = special.gammaln(m + 1) - special.gammaln(y + 1) - special.gammaln(m - y + 1)
        return float(np.sum(const + special.xlogy(y, pi) + special.xlogy(m - y, 1 - pi)))

    def score_eta(self, y, mu, nu=None):
        m = np.broadcast_to(self.trials, np.shape(y))
        return y - m * mu

    def weight(self, mu, nu=None):
        m = np.broadcast_to(self.trials, np.shape(mu))
        return m * mu * (1 - mu)

    def saturated_mu(self, y):
        m = np.broadcast_to(self.trials, np.shape(y))
        return np.clip(y / m, 1e-12, 1 - 1e-12)

    def init_mu(self, y):
        m = np.broadcast_to(self.trials, np.shape(y))
        return (y + 0.5 * m) / (2.0 * m)


class Poisson(Family):
    name = "poisson"
    link = "log"

    def validate_y(self, y):
        if np.any(y < 0):
            raise DataError("poisson responses must be non-negative")

    def link_fn(self, mu):
        return np.log(np.clip(mu, 1e-12, None))

    def inv_link(self, eta):
        return _exp(eta)

    def loglik(self, y, mu, nu=None):
        mu = np.clip(mu, 1e-12, None)
        return float(np.sum(special.xlogy(y, mu) - mu - special.gammaln(y + 1)))

    def score_eta(self, y, mu, nu=None):
        return y - mu

    def weight(self, mu, nu=None):
        return np.asarray(mu, dtype=float)

    def saturated_mu(self, y):
        return np.clip(np.asarray(y, dtype=float), 1e-12, None)

    def init_mu(self, y):
        return np.asarray(y, dtype=float) + 0.1


class NegativeBinomial(Family):
    """NB with mean mu and dispersion theta: Var = mu + mu^2 / theta."""

    name = "negative-binomial"
    link = "log"
    nuisance_name = "theta"
    nuisance_estimated = True

    def validate_y(self, y):
        if np.any(y < 0) or np.any(np.abs(y - np.round(y)) > 1e-8):
            raise DataError("negative binomial responses must be non-negative integers")

    def _moment_nu(self, y):
        m, v = np.mean(y), np.var(y)
        if v > m > 0:
            return float(np.clip(m * m / (v - m), 0.05, 50.0))
        return 1.0

    def link_fn(self, mu):
        return np.log(np.clip(mu, 1e-12, None))

    def inv_link(self, eta):
        return _exp(eta)

    def loglik(self, y, mu, nu=None):
        th = self._nu(nu)
        mu = np.clip(mu, 1e-12, None)
        return float(
            np.sum(
                special.gammaln(y + th)
                - special.gammaln(th)
                - special.gammaln(y + 1)
                + th * np.log(th / (th + mu))
                + special.xlogy(y, mu / (mu + th))
            )
        )

    def score_eta(self, y, mu, nu=None):
        th = self._nu(nu)
        return (y - mu) * th / (mu + th)

    def weight(self, mu, nu=None):
        th = self._nu(nu)
        return mu * mu / (mu + mu * mu / th)

    def saturated_mu(self, y):
        return np.clip(np.asarray(y, dtype=float), 1e-12, None)

    def init_mu(self, y):
        return np.asarray(y, dtype=float) + 0.1


class Beta(Family):
    """Mean-precision Beta: shapes are phi*mu and phi*(1-mu)."""

    name = "beta"
    link = "logit"
    nuisance_name = "phi"
    nuisance_estimated = True

    def validate_y(self, y):
        if np.any(y <= 0) or np.any(y >= 1):
            raise DataError("beta responses must lie strictly in (0, 1)")

    def _moment_nu(self, y):
        m, v = np.mean(y), np.var(y)
        if 0 < v < m * (1 - m):
            return float(np.clip(m * (1 - m) / v - 1, 0.5, 500.0))
        return 5.0

    def link_fn(self, mu):
        mu = np.clip(mu, 1e-12, 1 - 1e-12)
        return np.log(mu / (1 - mu))

    def inv_link(self, eta):
        return np.clip(_expit(eta), 1e-10, 1 - 1e-10)

    def loglik(self, y, mu, nu=None):
        phi = self._nu(nu)
        a = phi * mu
        b = phi * (1 - mu)
        return float(
            np.sum(
                special.gammaln(phi)
                - special.gammaln(a)
                - special.gammaln(b)
                + (a - 1) * np.log(y)
                + (b - 1) * np.log1p(-y)
            )
        )

    def score_eta(self, y, mu, nu=None):
        phi = self._nu(nu)
        dmu = phi * (np.log(y) - np.log1p(-y) - special.digamma(phi * mu) + special.digamma(phi * (1 - mu)))
        return dmu * mu * (1 - mu)

    def weight(self, mu, nu=None):
        phi = self._nu(nu)
        return (1 + phi) * mu * (1 - mu)

    def saturated_mu(self, y):
        return np.clip(np.asarray(y, dtype=float), 1e-10, 1 - 1e-10)

    def init_mu(self, y):
        return np.clip(np.asarray(y, dtype=float), 0.01, 0.99)


class ScaledT(Family):
    """Location-scale t with fixed df; the scale is the nuisance parameter."""

    name = "scaled-t"
    link = "identity"
    nuisance_name = "scale"
    nuisance_estimated = True

    def __init__(self, df=3.0, nu0=None, nuisance_estimated=None):
        super().__init__(nu0=nu0, nuisance_estimated=nuisance_estimated)
        if df <= 0:
            raise DomainError("df must be positive")
        self.df = float(df)

    def _moment_nu(self, y):
        mad = np.median(np.abs(y - np.median(y)))
        return float(max(mad * 1.4826, 1e-4))

    def link_fn(self, mu):
        return np.asarray(mu, dtype=float)

    def inv_link(self, eta):
        return np.asarray(eta, dtype=float)

    def loglik(self, y, mu, nu=None):
        s = self._nu(nu)
        df = self.df
        r = (y - mu) / s
        c = special.gammaln((df + 1) / 2) - special.gammaln(df / 2) - 0.5 * np.log(df * np.pi)
        return float(np.sum(c - np.log(s) - 0.5 * (df + 1) * np.log1p(r * r / df)))

    def score_eta(self, y, mu, nu=None):
        s = self._nu(nu)
        r = y - mu
        return (self.df + 1) * r / (self.df * s * s + r * r)

    def weight(self, mu, nu=None):
        s = self._nu(nu)
        w = (self.df + 1) / ((self.df + 3) * s * s)
        return np.full(np.shape(mu), w)

    def init_mu(self, y):
        return np.asarray(y, dtype=float)


_FAMILIES = {
    "gaussian": Gaussian,
    "binomial": Binomial,
    "poisson": Poisson,
    "negative-binomial": NegativeBinomial,
    "beta": Beta,
    "scaled-t": ScaledT,
}


def make_family(name: str, **kwargs) -> Family:
    if name not in _FAMILIES:
        raise DomainError(f"unknown family {name!r}")
    return _FAMILIES[name](**kwargs)


def loglik(family: Family, y, mu, nu=None) -> float:
    """Exact summed log-likelihood including normalizing constants."""
    y = np.asarray(y, dtype=float)
    family.validate_y(y)
    return family.loglik(y, np.asarray(mu, dtype=float), nu)


def irls_quantities(family: Family, y, eta, nu=None):
    """Working response and weights at the current linear predictor."""
    eta = np.asarray(eta, dtype=float)
    if not np.all(np.isfinite(eta)):
        raise DomainError("non-finite linear predictor")
    mu = family.inv_link(eta)
    w = np.maximum(family.weight(mu, nu), WEIGHT_FLOOR)
    z = eta + family.score_eta(np.asarray(y, dtype=float), mu, nu) / w
    return z, w


def deviance(family: Family, y, mu, nu=None) -> float:
    """Twice the saturated-minus-fitted log-likelihood difference."""
    y = np.asarray(y, dtype=float)
    family.validate_y(y)
    sat = family.loglik(y, family.saturated_mu(y), nu)
    return 2.0 * (sat - family.loglik(y, np.asarray(mu, dtype=float), nu))
