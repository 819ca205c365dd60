"""Model terms, design blocks and penalty assembly.

Each model term pairs a marginal basis over its covariate(s) with a marginal
basis over the response index t. The realized design block is the row tensor
product of the two marginal evaluations; its penalty is the Kronecker sum of
the marginal penalties weighted by one smoothing parameter each.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .basis import BasisSpec, PenaltyMatrix, difference_penalty, eval_basis
from .errors import DomainError, ShapeError, SpecificationError

TERM_KINDS = (
    "intercept",
    "linear-scalar",
    "smooth-scalar",
    "smooth-scalar-interaction",
    "functional-linear",
    "concurrent",
    "random-intercept",
    "random-slope",
    "smooth-curve-effect",
)


@dataclass
class FunctionalCovariate:
    """A functional covariate observed on its own grid, one row per curve."""

    grid: np.ndarray
    values: np.ndarray  # (n, S)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.ndim != 1 or self.values.ndim != 2:
            raise ShapeError("functional covariate needs 1-d grid and 2-d values")
        if self.values.shape[1] != self.grid.size:
            raise ShapeError("functional covariate values do not match grid length")
        if np.any(np.diff(self.grid) <= 0):
            raise ShapeError("functional covariate grid must be strictly increasing")


@dataclass
class FunctionalDataset:
    """Long-format functional responses with per-curve covariates.

    ``curve`` holds one label per observation; scalar covariates and grouping
    factors hold one value per curve, expanded to observations on demand.
    """

    curve: np.ndarray
    t: np.ndarray
    y: np.ndarray
    scalar_covariates: dict[str, np.ndarray] = field(default_factory=dict)
    functional_covariates: dict[str, FunctionalCovariate] = field(default_factory=dict)
    grouping_factors: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.curve = np.asarray(self.curve)
        self.t = np.asarray(self.t, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if not (self.curve.shape == self.t.shape == self.y.shape):
            raise ShapeError("curve, t and y must have equal length")
        self.curves, self.codes = np.unique(self.curve, return_inverse=True)
        n = self.n
        for name, col in self.scalar_covariates.items():
            self.scalar_covariates[name] = np.asarray(col, dtype=float)
            if self.scalar_covariates[name].shape != (n,):
                raise ShapeError(f"scalar covariate {name!r} must have one value per curve")
        for name, col in self.grouping_factors.items():
            self.grouping_factors[name] = np.asarray(col)
            if self.grouping_factors[name].shape != (n,):
                raise ShapeError(f"grouping factor {name!r} must have one value per curve")
        for fc in self.functional_covariates.values():
            if fc.values.shape[0] != n:
                raise ShapeError("functional covariate must have one row per curve")

    @property
    def n(self) -> int:
        return self.curves.size

    @property
    def n_obs(self) -> int:
        return self.y.size

    def scalar_obs(self, name: str) -> np.ndarray:
        """A scalar covariate expanded to observation level."""
        if name == "curve":
            return self.codes.astype(float)
        if name not in self.scalar_covariates:
            raise SpecificationError(f"unknown scalar covariate {name!r}")
        return self.scalar_covariates[name][self.codes]

    def group_obs(self, name: str) -> np.ndarray:
        """Grouping-factor labels expanded to observation level."""
        if name == "curve":
            return self.curve
        if name not in self.grouping_factors:
            raise SpecificationError(f"unknown grouping factor {name!r}")
        return self.grouping_factors[name][self.codes]


@dataclass
class TermSpec:
    """Declarative description of one additive-predictor term."""

    kind: str
    covariates: tuple[str, ...] = ()
    basis_x: BasisSpec | None = None
    basis_x2: BasisSpec | None = None
    basis_t: BasisSpec | None = None
    varies_over_t: bool = True
    lag: float | None = None
    window: tuple[float, float] | None = None
    window_fns: tuple[Callable, Callable] | None = None
    center_covariate: bool = False
    label: str | None = None

    def __post_init__(self):
        if self.kind not in TERM_KINDS:
            raise SpecificationError(f"unknown term kind {self.kind!r}")
        if isinstance(self.covariates, str):
            self.covariates = (self.covariates,)
        self.covariates = tuple(self.covariates)
        if self.label is None:
            self.label = self.kind if not self.covariates else (
                self.kind + "(" + ",".join(self.covariates) + ")"
            )


@dataclass
class DesignBlock:
    """One realized term: design matrix plus marginal penalties.

    ``x_matrix`` and ``t_matrix`` retain the marginal evaluations so that the
    block can be rebuilt on new data; ``Phi`` is their row tensor product.
    ``generic_penalties`` is set for blocks (two-covariate interactions) whose
    penalty pair no longer factors as a Kronecker sum with identities after
    the identifiability constraint.
    """

    Phi: np.ndarray
    P_x: PenaltyMatrix
    P_t: PenaltyMatrix
    K_x: int
    K_t: int
    label: str
    term: TermSpec
    x_matrix: np.ndarray = None
    t_matrix: np.ndarray = None
    constraint_transform: np.ndarray | None = None
    generic_penalties: list[np.ndarray] | None = None
    levels: np.ndarray | None = None
    x_mean: np.ndarray | None = None
    diagnostics: list = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.Phi.shape[1]


def row_tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Column-wise interaction expansion of two matrices with equal rows."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[0] != b.shape[0]:
        raise ShapeError(f"row counts differ: {a.shape[0]} vs {b.shape[0]}")
    m = a.shape[0]
    return (a[:, :, None] * b[:, None, :]).reshape(m, a.shape[1] * b.shape[1])


def kron_sum_penalty(lam_x: float, lam_t: float, p_x, p_t) -> np.ndarray:
    """λ_x (P_x ⊗ I) + λ_t (I ⊗ P_t) for marginal penalties."""
    if lam_x <= 0 or lam_t <= 0:
        raise DomainError("smoothing parameters must be positive")
    px = p_x.values if isinstance(p_x, PenaltyMatrix) else np.asarray(p_x, dtype=float)
    pt = p_t.values if isinstance(p_t, PenaltyMatrix) else np.asarray(p_t, dtype=float)
    kx, kt = px.shape[0], pt.shape[0]
    return lam_x * np.kron(px, np.eye(kt)) + lam_t * np.kron(np.eye(kx), pt)


def quadrature_weights(
    s_grid: np.ndarray,
    t_points: np.ndarray,
    lower: Callable[[float], float],
    upper: Callable[[float], float],
    open_upper: bool = False,
) -> tuple[np.ndarray, list[int]]:
    """Trapezoidal integration weights restricted to [l(t), u(t)] per row.

    Entries outside the window are exact zeros. Rows whose window contains
    fewer than two grid points are all-zero and their indices are returned as
    diagnostics rather than raising.
    """
    s = np.asarray(s_grid, dtype=float)
    if s.size < 2:
        raise ShapeError("s grid needs at least 2 points")
    t = np.atleast_1d(np.asarray(t_points, dtype=float))
    lo = np.array([lower(tv) for tv in t])
    hi = np.array([upper(tv) for tv in t])
    inside = (s[None, :] >= lo[:, None]) & (
        (s[None, :] < hi[:, None]) if open_upper else (s[None, :] <= hi[:, None])
    )
    w = np.zeros((t.size, s.size))
    seg = inside[:, :-1] & inside[:, 1:]
    half = np.diff(s) / 2.0
    w[:, :-1] += np.where(seg, half, 0.0)
    w[:, 1:] += np.where(seg, half, 0.0)
    empty = [int(i) for i in np.nonzero(seg.sum(axis=1) == 0)[0]]
    return w, empty


def _window_callables(term: TermSpec, s_grid: np.ndarray):
    if term.lag is not None:
        return (lambda t: t - term.lag), (lambda t: t), True
    if term.window_fns is not None:
        lo, hi = term.window_fns
        return lo, hi, False
    if term.window is not None:
        wlo, whi = term.window
        return (lambda t: wlo), (lambda t: whi), False
    return (lambda t: s_grid[0]), (lambda t: s_grid[-1]), False


def _functional_covariate(dataset: FunctionalDataset, name: str) -> FunctionalCovariate:
    if name not in dataset.functional_covariates:
        raise SpecificationError(f"unknown functional covariate {name!r}")
    return dataset.functional_covariates[name]


def _incidence(labels_obs: np.ndarray, levels: np.ndarray) -> np.ndarray:
    """Indicator matrix against known levels; unseen labels give zero rows."""
    pos = {lev: j for j, lev in enumerate(levels)}
    g = np.zeros((labels_obs.size, levels.size))
    for i, lab in enumerate(labels_obs):
        j = pos.get(lab)
        if j is not None:
            g[i, j] = 1.0
    return g


def _x_marginal(dataset: FunctionalDataset, term: TermSpec, block: DesignBlock | None):
    """Covariate-direction marginal matrix and penalty.

    With ``block`` given, reuses its stored levels / centering so new data is
    realized consistently with the training design.
    """
    kind = term.kind
    diagnostics: list = []
    levels = block.levels if block is not None else None
    x_mean = block.x_mean if block is not None else None

    if kind == "intercept":
        x = np.ones((dataset.n_obs, 1))
        px = PenaltyMatrix(np.zeros((1, 1)), 1)
    elif kind == "linear-scalar":
        z = dataset.scalar_obs(term.covariates[0])
        x = z[:, None]
        px = PenaltyMatrix(np.zeros((1, 1)), 1)
    elif kind == "smooth-scalar":
        z = dataset.scalar_obs(term.covariates[0])
        x = eval_basis(term.basis_x, z).values
        px = difference_penalty(term.basis_x)
    elif kind == "smooth-scalar-interaction":
        z1 = dataset.scalar_obs(term.covariates[0])
        z2 = dataset.scalar_obs(term.covariates[1])
        b1 = eval_basis(term.basis_x, z1).values
        b2 = eval_basis(term.basis_x2, z2).values
        x = row_tensor(b1, b2)
        px = None  # penalties handled as a generic pair by build_term
    elif kind == "functional-linear":
        fc = _functional_covariate(dataset, term.covariates[0])
        vals = fc.values
        if term.center_covariate:
            if x_mean is None:
                x_mean = vals.mean(axis=0)
            vals = vals - x_mean[None, :]
        lo, hi, open_upper = _window_callables(term, fc.grid)
        w, empty = quadrature_weights(fc.grid, dataset.t, lo, hi, open_upper)
        diagnostics = empty
        phi_s = eval_basis(term.basis_x, fc.grid).values
        x = (w * vals[dataset.codes]) @ phi_s
        px = difference_penalty(term.basis_x)
    elif kind == "concurrent":
        fc = _functional_covariate(dataset, term.covariates[0])
        v = np.array(
            [np.interp(tv, fc.grid, fc.values[c]) for tv, c in zip(dataset.t, dataset.codes)]
        )
        if term.basis_x is None:
            x = v[:, None]
            px = PenaltyMatrix(np.zeros((1, 1)), 1)
        else:
            x = eval_basis(term.basis_x, v).values
            px = difference_penalty(term.basis_x)
    elif kind in ("random-intercept", "random-slope", "smooth-curve-effect"):
        # smooth functional residuals e_i(t) are random intercepts on the curve id
        gname = term.covariates[0] if term.covariates else "curve"
        labels = dataset.group_obs(gname)
        if levels is None:
            levels = np.unique(labels)
        x = _incidence(labels, levels)
        if kind == "random-slope":
            z = dataset.scalar_obs(term.covariates[1])
            x = x * z[:, None]
        px = PenaltyMatrix(np.eye(levels.size), 0)
    else:  # pragma: no cover
        raise SpecificationError(f"unhandled kind {kind!r}")
    return x, px, levels, x_mean, diagnostics


def _t_marginal(dataset: FunctionalDataset, term: TermSpec):
    if term.varies_over_t:
        bt = eval_basis(term.basis_t, dataset.t).values
        pt = difference_penalty(term.basis_t)
    else:
        bt = np.ones((dataset.n_obs, 1))
        pt = PenaltyMatrix(np.zeros((1, 1)), 1)
    return bt, pt


def build_term(dataset: FunctionalDataset, term: TermSpec) -> DesignBlock:
    """Realize one term as its design block with marginal penalties."""
    if term.kind == "smooth-scalar-interaction" and term.varies_over_t:
        raise SpecificationError(
            "time-varying two-covariate smooth interactions are not supported"
        )
    x, px, levels, x_mean, diagnostics = _x_marginal(dataset, term, None)
    bt, pt = _t_marginal(dataset, term)
    generic = None
    if term.kind == "smooth-scalar-interaction":
        p1 = difference_penalty(term.basis_x).values
        p2 = difference_penalty(term.basis_x2).values
        k1, k2 = p1.shape[0], p2.shape[0]
        s1 = np.kron(p1, np.eye(k2))
        s2 = np.kron(np.eye(k1), p2)
        px = PenaltyMatrix(s1, term.basis_x.penalty_order * k2)
        pt = PenaltyMatrix(s2, term.basis_x2.penalty_order * k1)
        generic = [s1, s2]
    phi = row_tensor(x, bt)
    if not np.all(np.isfinite(phi)):
        raise ShapeError(f"non-finite design entries in term {term.label!r}")
    block = DesignBlock(
        Phi=phi,
        P_x=px,
        P_t=pt,
        K_x=x.shape[1],
        K_t=bt.shape[1],
        label=term.label,
        term=term,
        x_matrix=x,
        t_matrix=bt,
        generic_penalties=generic,
        levels=levels,
        x_mean=x_mean,
        diagnostics=diagnostics,
    )
    return block


_CONSTRAINED_KINDS = ("smooth-scalar", "smooth-scalar-interaction", "concurrent")


def _needs_constraint(block: DesignBlock) -> bool:
    if block.term.kind not in _CONSTRAINED_KINDS:
        return False
    if block.term.kind == "concurrent" and block.term.basis_x is None:
        return False
    return True


def _constraint_basis(x: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the sum-to-zero constraint's null space."""
    c = x.mean(axis=0)
    q, _ = np.linalg.qr(np.column_stack([c, np.eye(c.size)]))
    return q[:, 1:c.size]


def _apply_transform(block: DesignBlock, z: np.ndarray) -> DesignBlock:
    x = block.x_matrix @ z
    px = PenaltyMatrix(
        z.T @ block.P_x.values @ z,
        max(block.P_x.rank_deficiency - 1, 0),
    )
    generic = None
    pt = block.P_t
    if block.generic_penalties is not None:
        generic = [z.T @ s @ z for s in block.generic_penalties]
        px = PenaltyMatrix(generic[0], max(block.P_x.rank_deficiency - 1, 0))
        pt = PenaltyMatrix(generic[1], max(block.P_t.rank_deficiency - 1, 0))
    phi = row_tensor(x, block.t_matrix)
    return replace(
        block,
        Phi=phi,
        x_matrix=x,
        K_x=x.shape[1],
        P_x=px,
        P_t=pt,
        generic_penalties=generic,
        constraint_transform=z,
    )


def apply_identifiability(blocks: list[DesignBlock]) -> list[DesignBlock]:
    """Center smooth terms whose span overlaps the functional intercept.

    Blocks whose covariate marginal leaves constants unpenalized are
    reparameterized by a sum-to-zero constraint over the observed covariate
    values; random-effect blocks are fully penalized and left unchanged.
    """
    n_int = sum(1 for b in blocks if b.term.kind == "intercept")
    if n_int != 1:
        raise SpecificationError(f"exactly one intercept block required, got {n_int}")
    out = []
    for block in blocks:
        if _needs_constraint(block) and block.constraint_transform is None:
            z = _constraint_basis(block.x_matrix)
            out.append(_apply_transform(block, z))
        else:
            out.append(block)
    return out


@dataclass
class ModelDesign:
    """All realized blocks of a model with their column offsets."""

    blocks: list[DesignBlock]

    def __post_init__(self):
        dims = [b.dim for b in self.blocks]
        self.offsets = np.concatenate([[0], np.cumsum(dims)]).astype(int)
        self.p = int(self.offsets[-1])

    def full_matrix(self) -> np.ndarray:
        return np.hstack([b.Phi for b in self.blocks])

    def block_slice(self, r: int) -> slice:
        return slice(self.offsets[r], self.offsets[r + 1])

    def realize(self, newdata: FunctionalDataset) -> np.ndarray:
        """Design matrix for new data, reusing training-time transforms."""
        parts = []
        for block in self.blocks:
            x, _, _, _, _ = _x_marginal(newdata, block.term, block)
            if block.constraint_transform is not None:
                x = x @ block.constraint_transform
            bt, _ = _t_marginal(newdata, block.term)
            parts.append(row_tensor(x, bt))
        return np.hstack(parts)


def build_design(dataset: FunctionalDataset, terms: list[TermSpec]) -> ModelDesign:
    """Build and center all blocks for a term list."""
    blocks = [build_term(dataset, term) for term in terms]
    return ModelDesign(apply_identifiability(blocks))


def term_grid_matrix(block: DesignBlock, cov_grid, t_grid) -> tuple[np.ndarray, tuple]:
    """Rows evaluating a term on a covariate × t grid, in block coordinates.

    Returns the evaluation matrix and the grid shape (n_cov, n_t). For the
    intercept the covariate grid is ignored; for functional-linear terms the
    covariate grid holds s values and the rows evaluate the coefficient
    surface at (s, t).
    """
    term = block.term
    t_grid = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if term.varies_over_t:
        bt = eval_basis(term.basis_t, t_grid).values
    else:
        bt = np.ones((t_grid.size, 1))
    if term.kind == "intercept":
        xg = np.ones((1, 1))
    elif term.kind == "linear-scalar":
        xg = np.asarray(cov_grid, dtype=float).reshape(-1, 1)
    elif term.kind in ("smooth-scalar", "concurrent"):
        xg = eval_basis(term.basis_x, np.asarray(cov_grid, dtype=float)).values
    elif term.kind == "smooth-scalar-interaction":
        z1, z2 = cov_grid
        xg = row_tensor(
            eval_basis(term.basis_x, np.asarray(z1, dtype=float)).values,
            eval_basis(term.basis_x2, np.asarray(z2, dtype=float)).values,
        )
    elif term.kind == "functional-linear":
        xg = eval_basis(term.basis_x, np.asarray(cov_grid, dtype=float)).values
    elif term.kind in ("random-intercept", "random-slope", "smooth-curve-effect"):
        xg = _incidence(np.asarray(cov_grid), block.levels)
    else:  # pragma: no cover
        raise SpecificationError(f"unhandled kind {term.kind!r}")
    if block.constraint_transform is not None:
        xg = xg @ block.constraint_transform
    rows = row_tensor(
        np.repeat(xg, t_grid.size, axis=0), np.tile(bt, (xg.shape[0], 1))
    )
    return rows, (xg.shape[0], t_grid.size)
