"""Prediction, pointwise confidence bands and accuracy metrics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .design import FunctionalDataset, term_grid_matrix
from .errors import DomainError, MetricError
from .fitting import FitResult


def _z_value(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise DomainError("confidence level must lie strictly between 0 and 1")
    return float(stats.norm.ppf(0.5 + level / 2.0))


def linear_predictor(fit: FitResult, newdata: FunctionalDataset | None = None):
    """Fitted linear predictor and its pointwise standard error."""
    if newdata is None:
        phi = fit.system.Phi
    else:
        phi = fit.system.design.realize(newdata)
    eta = phi @ fit.theta
    se = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", phi, fit.V_theta, phi), 0.0))
    return eta, se


def predict(
    fit: FitResult,
    newdata: FunctionalDataset | None = None,
    level: float = 0.95,
) -> dict:
    """Predictions on the response scale with pointwise intervals.

    Intervals are computed on the linear-predictor scale and mapped through
    the inverse link, so they respect the range of the mean.
    """
    eta, se = linear_predictor(fit, newdata)
    z = _z_value(level)
    fam = fit.system.family
    lo, hi = eta - z * se, eta + z * se
    return {
        "eta": eta,
        "se_eta": se,
        "eta_lower": lo,
        "eta_upper": hi,
        "mu": fam.inv_link(eta),
        "mu_lower": fam.inv_link(lo),
        "mu_upper": fam.inv_link(hi),
        "level": level,
    }


@dataclass
class TermEstimate:
    """A single additive term evaluated on a covariate x t grid."""

    label: str
    values: np.ndarray  # (n_cov, n_t)
    se: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    cov_grid: object
    t_grid: np.ndarray
    level: float


def term_estimate(
    fit: FitResult,
    term_index: int,
    cov_grid,
    t_grid,
    level: float = 0.95,
) -> TermEstimate:
    """Evaluate one model term with a pointwise confidence band."""
    design = fit.system.design
    if not 0 <= term_index < len(design.blocks):
        raise DomainError(f"no term with index {term_index}")
    block = design.blocks[term_index]
    sl = design.block_slice(term_index)
    rows, shape = term_grid_matrix(block, cov_grid, t_grid)
    theta_r = fit.theta[sl]
    v_r = fit.V_theta[sl, sl]
    est = rows @ theta_r
    se = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", rows, v_r, rows), 0.0))
    z = _z_value(level)
    return TermEstimate(
        label=block.label,
        values=est.reshape(shape),
        se=se.reshape(shape),
        lower=(est - z * se).reshape(shape),
        upper=(est + z * se).reshape(shape),
        cov_grid=cov_grid,
        t_grid=np.atleast_1d(np.asarray(t_grid, dtype=float)),
        level=level,
    )


def _as_curves(est, truth):
    est = np.asarray(est, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if est.shape != truth.shape:
        raise MetricError("estimate and truth must have the same shape")
    if est.ndim == 1:
        est, truth = est[None, :], truth[None, :]
    if est.ndim != 2:
        raise MetricError("expected per-curve arrays of shape (n, T)")
    return est, truth


def rimse(est, truth, domain_length: float = 1.0) -> float:
    """Root integrated mean squared error over curves on a shared grid."""
    est, truth = _as_curves(est, truth)
    n, nt = est.shape
    return float(np.sqrt(domain_length / (n * nt) * np.sum((est - truth) ** 2)))


def rrimse(est, truth, domain_length: float = 1.0) -> float:
    """RIMSE with each curve's error scaled by that curve's variability.

    The scale for curve i is the standard deviation of the true curve over
    the grid; near-constant truths are floored at one percent of the overall
    spread so the ratio stays finite.
    """
    est, truth = _as_curves(est, truth)
    n, nt = est.shape
    sd = truth.std(axis=1, ddof=0)
    overall = truth.std(ddof=0)
    if overall <= 0:
        raise MetricError("true curves are constant; relative error undefined")
    sd = np.maximum(sd, 0.01 * overall)
    scaled = (est - truth) ** 2 / sd[:, None] ** 2
    return float(np.sqrt(domain_length / (n * nt) * np.sum(scaled)))


def coverage(lower, upper, truth) -> float:
    """Fraction of pointwise intervals that contain the truth."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if lower.shape != truth.shape or upper.shape != truth.shape:
        raise MetricError("interval bounds and truth must share a shape")
    return float(np.mean((truth >= lower) & (truth <= upper)))


def brier(prob, outcome, trials: int = 1) -> float:
    """Mean squared distance between predicted and observed success rates."""
    prob = np.asarray(prob, dtype=float)
    outcome = np.asarray(outcome, dtype=float)
    if prob.shape != outcome.shape:
        raise MetricError("probabilities and outcomes must share a shape")
    if np.any((prob < 0) | (prob > 1)):
        raise MetricError("probabilities must lie in [0, 1]")
    return float(np.mean((outcome / trials - prob) ** 2))
