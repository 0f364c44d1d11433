"""Penalised logistic regression for multi-layer data.

Thin wrappers over the compiled ``_moenet`` extension. Functions that return
structured results decode them into plain dictionaries.
"""

import json

import numpy as np

from . import _moenet
from ._moenet import (
    MoenetError,
    aggregate_ranks,
    benjamini_hochberg,
    descending_ranks,
    expected_improvement,
    jobs,
    latin_hypercube,
    mann_whitney,
    method_names,
    predict_proba,
    set_jobs,
    simulate,
)

__all__ = [
    "MoenetError",
    "aggregate_ranks",
    "benjamini_hochberg",
    "cv_lambda",
    "descending_ranks",
    "epsgo_minimize",
    "expected_improvement",
    "fit_enet",
    "jobs",
    "lambda_max",
    "latin_hypercube",
    "mann_whitney",
    "method_names",
    "predict_proba",
    "run_method",
    "set_jobs",
    "simulate",
]


def _matrix(x):
    return np.asarray(x, dtype=np.float64)


def fit_enet(x, y, alpha=1.0, lam=0.0, penalty_weights=None, tol=1e-7):
    """Fit one elastic-net logistic model; returns intercept, coefficients and diagnostics.

    Coefficients come back as a dense array of length ``p``.
    """
    fit = json.loads(_moenet.fit_enet(_matrix(x), _matrix(y), alpha, lam, penalty_weights, tol))
    dense = np.zeros(fit["p"])
    for j, v in fit["coefficients"].items():
        dense[int(j)] = v
    fit["coefficients"] = dense
    return fit


def lambda_max(x, y, alpha=1.0, penalty_weights=None):
    return _moenet.lambda_max(_matrix(x), _matrix(y), alpha, penalty_weights)


def cv_lambda(x, y, layers=(), alpha=1.0, folds=10, seed=0):
    """Cross-validated choice of lambda. ``layers`` holds (name, begin, end, penalised) tuples."""
    return json.loads(_moenet.cv_lambda(_matrix(x), _matrix(y), list(layers), alpha, folds, seed))


def run_method(x, y, layers, method, seed=0, cv_folds=10, max_evals=None, alpha=None):
    """Run one integration method (see ``method_names()``) and return its result record."""
    return json.loads(_moenet.run_method(_matrix(x), _matrix(y), list(layers), method, seed, cv_folds,
                                         max_evals, alpha))


def epsgo_minimize(objective, dims, seed=0, init_points=None, max_evals=None, patience=10):
    """Minimise ``objective(point)`` over ``dims``: (name, lower, upper, log2) tuples."""
    return json.loads(_moenet.epsgo_minimize(objective, list(dims), seed, init_points, max_evals, patience))
