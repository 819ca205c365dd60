"""Spline basis evaluation and difference penalties."""
import numpy as np
import pytest
from scipy.interpolate import BSpline

from gfam.basis import (
    BasisSpec,
    difference_penalty,
    eval_basis,
    numerical_rank,
)
from gfam.errors import DomainError, InvalidSpecError


def test_partition_of_unity():
    rng = np.random.default_rng(11)
    for _ in range(10):
        k = int(rng.integers(5, 15))
        deg = int(rng.integers(1, 4))
        lo, hi = sorted(rng.normal(0, 3, 2))
        spec = BasisSpec(kind="bspline", num_basis=k, domain=(lo, hi), degree=deg)
        pts = rng.uniform(lo, hi, 50)
        b = eval_basis(spec, pts).values
        assert np.allclose(b.sum(axis=1), 1.0, atol=1e-12)


def test_matches_scipy_bspline():
    """Our recursion agrees with scipy's BSpline on the same knot vector."""
    spec = BasisSpec(kind="bspline", num_basis=9, domain=(0.0, 2.0), degree=3)
    pts = np.linspace(0.0, 2.0, 41)
    ours = eval_basis(spec, pts).values
    k_inner = 9 - 3 - 1  # interior knots for K basis functions
    inner = np.linspace(0.0, 2.0, k_inner + 2)[1:-1]
    knots = np.r_[[0.0] * 4, inner, [2.0] * 4]
    for j in range(9):
        coef = np.zeros(9)
        coef[j] = 1.0
        ref = BSpline(knots, coef, 3, extrapolate=False)(pts)
        ref = np.nan_to_num(ref)
        # right endpoint: scipy sets it to 0, we use the limit from the left
        ref[-1] = BSpline(knots, coef, 3)(2.0 - 1e-12)
        assert np.allclose(ours[:, j], ref, atol=1e-9)


def test_cyclic_endpoints_match():
    spec = BasisSpec(kind="cyclic-bspline", num_basis=9, domain=(0.0, 1.0))
    b = eval_basis(spec, np.array([0.0, 1.0])).values
    assert np.allclose(b[0], b[1], atol=1e-12)


def test_cyclic_is_periodic_inside():
    spec = BasisSpec(kind="cyclic-bspline", num_basis=7, domain=(0.0, 1.0))
    pts = np.array([0.05, 0.3, 0.77])
    a = eval_basis(spec, pts).values
    b = eval_basis(spec, pts + 1.0).values  # reduced modulo the period
    assert np.allclose(a, b, atol=1e-12)


def test_outside_domain_raises():
    spec = BasisSpec(kind="bspline", num_basis=6, domain=(0.0, 1.0))
    with pytest.raises(DomainError):
        eval_basis(spec, np.array([0.5, 1.3]))


def test_too_few_basis_functions_rejected():
    with pytest.raises(InvalidSpecError):
        BasisSpec(kind="bspline", num_basis=3, domain=(0.0, 1.0), degree=3)


def test_difference_penalty_structure():
    """P equals D'D with D the explicit d-th order difference matrix."""
    for k, d in [(6, 1), (8, 2), (10, 3)]:
        spec = BasisSpec(kind="bspline", num_basis=k, domain=(0.0, 1.0),
                         penalty_order=d)
        p = difference_penalty(spec)
        dmat = np.eye(k)
        for _ in range(d):
            dmat = np.diff(dmat, axis=0)
        assert np.allclose(p.values, dmat.T @ dmat, atol=1e-12)
        assert p.rank_deficiency == d
        evals = np.linalg.eigvalsh(p.values)
        assert evals.min() > -1e-10
        assert numerical_rank(p.values)[0] == k - d


def test_cyclic_penalty_wraps():
    spec = BasisSpec(kind="cyclic-bspline", num_basis=7, domain=(0.0, 1.0),
                     penalty_order=1)
    p = difference_penalty(spec)
    d = np.roll(np.eye(7), -1, axis=1) - np.eye(7)
    assert np.allclose(p.values, d.T @ d, atol=1e-12)
    assert p.rank_deficiency == 1
    # the constant vector is in the null space
    assert np.allclose(p.values @ np.ones(7), 0.0, atol=1e-12)


def test_dummy_and_constant_penalties():
    dummy = BasisSpec(kind="dummy-indicator", num_basis=5, domain=(0.0, 1.0))
    p = difference_penalty(dummy)
    assert np.array_equal(p.values, np.eye(5))
    assert p.rank_deficiency == 0

    const = BasisSpec(kind="constant", num_basis=1, domain=(0.0, 1.0))
    q = difference_penalty(const)
    assert q.values.shape == (1, 1)
    assert q.values[0, 0] == 0.0
    assert q.rank_deficiency == 1


def test_basis_shape_and_locality():
    spec = BasisSpec(kind="bspline", num_basis=12, domain=(-1.0, 1.0))
    pts = np.linspace(-1.0, 1.0, 30)
    b = eval_basis(spec, pts).values
    assert b.shape == (30, 12)
    # cubic splines have at most degree+1 active functions per point
    assert int((b > 1e-14).sum(axis=1).max()) <= 4
