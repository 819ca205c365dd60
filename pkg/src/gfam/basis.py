"""Marginal spline bases and their difference penalty matrices.

Provides equidistant-knot B-spline bases (optionally periodic), dummy
indicator bases for grouping factors and the trivial constant basis, each
paired with a difference penalty of configurable order.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InvalidSpecError

KINDS = ("bspline", "cyclic-bspline", "dummy-indicator", "constant")


@dataclass(frozen=True)
class BasisSpec:
    """Description of one marginal basis.

    ``num_basis`` is the number of basis functions K. For ``dummy-indicator``
    it equals the number of factor levels and evaluation points are level
    codes 0..K-1. ``domain`` is ignored for the constant kind.
    """

    kind: str
    num_basis: int
    domain: tuple[float, float] = (0.0, 1.0)
    degree: int = 3
    penalty_order: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidSpecError(f"unknown basis kind {self.kind!r}")
        if self.kind in ("bspline", "cyclic-bspline"):
            if self.num_basis <= self.degree:
                raise InvalidSpecError(
                    f"num_basis={self.num_basis} must exceed degree={self.degree}"
                )
            if not self.domain[0] < self.domain[1]:
                raise InvalidSpecError("domain lower bound must be below upper bound")
        if self.num_basis < 1:
            raise InvalidSpecError("num_basis must be positive")
        if self.penalty_order < 1:
            raise InvalidSpecError("penalty_order must be positive")


@dataclass(frozen=True)
class BasisMatrix:
    """Dense basis evaluations: rows are points, columns basis functions."""

    values: np.ndarray
    spec: BasisSpec


@dataclass(frozen=True)
class PenaltyMatrix:
    """Symmetric PSD penalty with its known rank deficiency."""

    values: np.ndarray
    rank_deficiency: int


def _knot_vector(spec: BasisSpec) -> np.ndarray:
    lo, hi = spec.domain
    inner = np.linspace(lo, hi, spec.num_basis - spec.degree + 1)
    return np.concatenate(
        [np.full(spec.degree, lo), inner, np.full(spec.degree, hi)]
    )


def _cox_de_boor(x: np.ndarray, knots: np.ndarray, degree: int) -> np.ndarray:
    """All B-spline basis functions of the given degree on a knot vector."""
    x = np.asarray(x, dtype=float)
    n0 = len(knots) - 1
    b = np.zeros((x.size, n0))
    idx = np.searchsorted(knots, x, side="right") - 1
    # points at the right end of the knot span belong to the last nonempty cell
    last = np.searchsorted(knots, knots[-1], side="left") - 1
    idx = np.clip(idx, 0, last)
    b[np.arange(x.size), idx] = 1.0
    # kill indicators of zero-width cells
    zero_width = knots[1:] == knots[:-1]
    b[:, zero_width] = 0.0
    for d in range(1, degree + 1):
        nb = n0 - d
        new = np.zeros((x.size, nb))
        for j in range(nb):
            left_den = knots[j + d] - knots[j]
            right_den = knots[j + d + 1] - knots[j + 1]
            if left_den > 0:
                new[:, j] += (x - knots[j]) / left_den * b[:, j]
            if right_den > 0:
                new[:, j] += (knots[j + d + 1] - x) / right_den * b[:, j + 1]
        b = new
    return b


def reduce_cyclic(points: np.ndarray, domain: tuple[float, float]) -> np.ndarray:
    """Map points into [lower, upper) by periodic reduction."""
    lo, hi = domain
    return lo + np.mod(np.asarray(points, dtype=float) - lo, hi - lo)


def eval_basis(spec: BasisSpec, points) -> BasisMatrix:
    """Evaluate all basis functions of ``spec`` at the given points."""
    x = np.atleast_1d(np.asarray(points, dtype=float))
    if spec.kind == "constant":
        return BasisMatrix(np.ones((x.size, 1)), spec)
    if spec.kind == "dummy-indicator":
        codes = np.asarray(points)
        if np.any((codes < 0) | (codes >= spec.num_basis)):
            raise DomainError("dummy level code outside 0..K-1")
        vals = np.zeros((codes.size, spec.num_basis))
        vals[np.arange(codes.size), codes.astype(int)] = 1.0
        return BasisMatrix(vals, spec)
    lo, hi = spec.domain
    if spec.kind == "bspline":
        tol = 1e-9 * max(1.0, abs(hi - lo))
        if np.any(x < lo - tol) or np.any(x > hi + tol):
            raise DomainError(f"points outside basis domain [{lo}, {hi}]")
        x = np.clip(x, lo, hi)
        vals = _cox_de_boor(x, _knot_vector(spec), spec.degree)
        return BasisMatrix(vals, spec)
    # cyclic: evaluate on periodically extended knots, then fold columns
    x = reduce_cyclic(x, spec.domain)
    k, d = spec.num_basis, spec.degree
    h = (hi - lo) / k
    knots = lo + h * np.arange(-d, k + d + 1)
    ext = _cox_de_boor(x, knots, d)  # x.size × (k + d)
    vals = np.zeros((x.size, k))
    for j in range(k + d):
        vals[:, j % k] += ext[:, j]
    return BasisMatrix(vals, spec)


def difference_penalty(spec: BasisSpec) -> PenaltyMatrix:
    """d-th order difference penalty P = DᵀD for the basis coefficients."""
    k, d = spec.num_basis, spec.penalty_order
    if spec.kind == "constant":
        return PenaltyMatrix(np.zeros((1, 1)), rank_deficiency=1)
    if spec.kind == "dummy-indicator":
        return PenaltyMatrix(np.eye(k), rank_deficiency=0)
    if d >= k:
        raise InvalidSpecError(f"penalty order {d} must be below num_basis {k}")
    if spec.kind == "bspline":
        dd = np.diff(np.eye(k), n=d, axis=0)
        return PenaltyMatrix(dd.T @ dd, rank_deficiency=d)
    # cyclic: wrap-around differences; null space is only the constants
    d1 = np.roll(np.eye(k), -1, axis=1) - np.eye(k)
    dd = np.linalg.matrix_power(d1, d)
    return PenaltyMatrix(dd.T @ dd, rank_deficiency=1)


def numerical_rank(mat: np.ndarray) -> tuple[int, np.ndarray]:
    """Rank by scale-invariant eigenvalue thresholding; returns (rank, eigvals)."""
    vals = np.linalg.eigvalsh((mat + mat.T) / 2.0)
    top = vals[-1] if vals.size else 0.0
    if top <= 0:
        return 0, vals
    thresh = mat.shape[0] * np.finfo(float).eps * top
    return int(np.sum(vals > thresh)), vals
