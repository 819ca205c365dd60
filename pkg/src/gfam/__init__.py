"""Functional additive mixed models for non-Gaussian curve responses.

Responses observed along a continuous index are linked to sums of scalar,
functional and random-effect terms built from tensor-product penalized
splines; smoothing parameters are chosen by a Laplace-approximate marginal
likelihood.
"""
from .basis import BasisSpec, difference_penalty, eval_basis
from .design import (
    FunctionalCovariate,
    FunctionalDataset,
    ModelDesign,
    TermSpec,
    build_design,
)
from .families import make_family
from .fitting import FitResult, assemble, laml, optimize_outer, pirls
from .inference import (
    brier,
    coverage,
    predict,
    rimse,
    rrimse,
    term_estimate,
)
from .simgen import SimScenario, generate, run_replicate

__version__ = "0.1.0"

__all__ = [
    "BasisSpec",
    "difference_penalty",
    "eval_basis",
    "FunctionalCovariate",
    "FunctionalDataset",
    "ModelDesign",
    "TermSpec",
    "build_design",
    "make_family",
    "FitResult",
    "assemble",
    "laml",
    "optimize_outer",
    "pirls",
    "predict",
    "term_estimate",
    "rimse",
    "rrimse",
    "coverage",
    "brier",
    "SimScenario",
    "generate",
    "run_replicate",
    "__version__",
]
