"""Synthetic problem generators and libsvm-format ingestion."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .problem import (
    FiniteSumProblem,
    LinearModelTerms,
    Quadratic1DTerms,
    WorstCaseTerms,
)
from .prox import Regularizer


def quadratic_1d(targets, curvatures=None, mu=None, l1=0.0, mu_in_terms=True):
    """1-D quadratics f_i(x) = (h_i/2)(x - a_i)^2.

    Canonical form: mu defaults to min h_i (the terms' own curvature).
    With mu_in_terms=False the quadratic terms are kept as-is and mu is
    carried by an explicit l2 regularizer on top of them.
    """
    terms = Quadratic1DTerms(targets, curvatures)
    if mu_in_terms:
        if mu is None:
            mu = float(terms.h.min())
        reg = Regularizer.l1(l1) if l1 > 0 else Regularizer.none()
        return FiniteSumProblem(terms, mu=mu, mu_in_terms=True, regularizer=reg,
                                name="quadratic1d")
    if mu is None or mu <= 0:
        raise ValueError("explicit convention needs mu > 0")
    if l1 > 0:
        raise ValueError("explicit quadratic instances are l2-only")
    return FiniteSumProblem(terms, mu=mu, mu_in_terms=False,
                            regularizer=Regularizer.l2(mu), name="quadratic1d")


def worst_case_problem(n: int) -> FiniteSumProblem:
    """The n = d instance whose minimum n/4 cannot be reached before every
    term has been accessed at least once; f(0) = n/2, x* = (1/2, ..., 1/2)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return FiniteSumProblem(WorstCaseTerms(n), mu=1.0, mu_in_terms=True,
                            name=f"worstcase-{n}")


def _features(rng, n, d, normalize_rows):
    A = rng.standard_normal((n, d))
    if normalize_rows:
        A /= np.linalg.norm(A, axis=1, keepdims=True)
    return A


def make_logistic(n, d, mu, seed=0, normalize_rows=True, l1=0.0,
                  mu_in_terms=True):
    """Binary logistic regression with Gaussian features and an l2 term.

    Row normalization makes every L_i exactly 0.25 + mu, which keeps
    the declared constants tight for rate checks.
    """
    rng = np.random.default_rng(seed)
    A = _features(rng, n, d, normalize_rows)
    w_true = rng.standard_normal(d)
    margins = A @ w_true + 0.1 * rng.standard_normal(n)
    y = np.where(margins >= 0, 1.0, -1.0)
    return _linear_problem(A, y, "logistic", mu, l1, mu_in_terms, "logistic")


def make_ridge_least_squares(n, d, mu, seed=0, normalize_rows=True, l1=0.0,
                             mu_in_terms=True, noise=0.1):
    rng = np.random.default_rng(seed)
    A = _features(rng, n, d, normalize_rows)
    w_true = rng.standard_normal(d)
    y = A @ w_true + noise * rng.standard_normal(n)
    return _linear_problem(A, y, "squared", mu, l1, mu_in_terms, "ridge")


def make_underdetermined_least_squares(n, d, seed=0, normalize_rows=True):
    """n < d least squares with mu = 0; the minimum value is 0."""
    if d <= n:
        raise ValueError("need d > n for an underdetermined system")
    rng = np.random.default_rng(seed)
    A = _features(rng, n, d, normalize_rows)
    w_true = rng.standard_normal(d)
    y = A @ w_true
    return _linear_problem(A, y, "squared", 0.0, 0.0, True, "lsq-nonsc")


def make_sparse_logistic(n, d, mu, seed=0, density=0.2, l1=0.0,
                         mu_in_terms=False):
    """Sparse-feature logistic instance (CSR), explicit regularizer by default
    so per-term gradients stay sparse."""
    rng = np.random.default_rng(seed)
    A = sp.random(n, d, density=density, random_state=np.random.RandomState(seed),
                  format="csr", data_rvs=rng.standard_normal)
    # guarantee no empty rows
    A = A.tolil()
    for i in range(n):
        if A.rows[i] == []:
            A[i, int(rng.integers(d))] = 1.0
    A = A.tocsr()
    w_true = rng.standard_normal(d)
    y = np.where(A @ w_true >= 0, 1.0, -1.0)
    return _linear_problem(A, y, "logistic", mu, l1, mu_in_terms, "sparse-logistic")


def _linear_problem(A, y, loss, mu, l1, mu_in_terms, name):
    if mu_in_terms:
        terms = LinearModelTerms(A, y, loss, mu_in=mu)
        reg = Regularizer.l1(l1) if l1 > 0 else Regularizer.none()
    else:
        terms = LinearModelTerms(A, y, loss, mu_in=0.0)
        if mu > 0 and l1 > 0:
            reg = Regularizer.elastic(mu, l1)
        elif mu > 0:
            reg = Regularizer.l2(mu)
        elif l1 > 0:
            reg = Regularizer.l1(l1)
        else:
            reg = Regularizer.none()
    return FiniteSumProblem(terms, mu=mu, mu_in_terms=mu_in_terms,
                            regularizer=reg, name=name)


def parse_libsvm(lines, loss="logistic"):
    """Parse `label idx:val idx:val ...` lines (1-based feature indices).

    Labels: for logistic, anything <= 0 (including the literal "-1") maps to
    -1 and the rest to +1; for squared loss the raw value is kept.
    Returns (csr_matrix, labels).
    """
    labels, rows, cols, vals = [], [], [], []
    row = 0
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        lab = float(parts[0])
        if loss == "logistic":
            lab = -1.0 if lab <= 0 else 1.0
        labels.append(lab)
        for tok in parts[1:]:
            idx, val = tok.split(":")
            j = int(idx)
            if j < 1:
                raise ValueError(f"libsvm feature indices are 1-based, got {j}")
            rows.append(row)
            cols.append(j - 1)
            vals.append(float(val))
        row += 1
    if row == 0:
        raise ValueError("empty libsvm file")
    d = max(cols) + 1 if cols else 1
    X = sp.csr_matrix((vals, (rows, cols)), shape=(row, d))
    return X, np.asarray(labels)


def load_libsvm(path, loss="logistic", l2=0.0, l1=0.0, standardize=False,
                mu_in_terms=True):
    """Build a FiniteSumProblem from a libsvm-format text file."""
    with open(path, "r") as fh:
        X, y = parse_libsvm(fh, loss)
    if standardize:
        X = X.toarray()
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        std[std == 0] = 1.0
        X = (X - mean) / std
    return _linear_problem(X, y, loss, l2, l1, mu_in_terms if l2 > 0 else True,
                           "libsvm")
