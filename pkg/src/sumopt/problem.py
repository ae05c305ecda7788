"""Finite-sum objectives f(x) = (1/n) sum_i f_i(x), plus optional regularizer.

Two conventions for where strong convexity lives are supported and carried
explicitly on each problem:

  * mu_in_terms=True  (canonical): every f_i is itself mu-strongly convex.
    This is the convention the gradient-table methods (finito, miso,
    prox-finito, saga in its basic form) are stated in.
  * mu_in_terms=False (explicit regularizer): the f_i are merely convex and
    f carries a separate (mu/2)||x||^2 term.  This is the dual coordinate
    ascent convention; `to_sdca_convention` converts a canonical problem by
    subtracting (mu/2)||x||^2 from every term.

Term indices are 1-based at the public API (eval_term, prox_term, solver
steps); internal storage is 0-based.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .prox import ProxSolveError, Regularizer


class NonFiniteError(ValueError):
    """An evaluation point contained NaN or infinity."""


class UndefinedConditionError(ValueError):
    """A quantity requiring mu > 0 was requested on a non-strongly-convex problem."""


def _check_finite(x):
    if not np.all(np.isfinite(x)):
        raise NonFiniteError("non-finite evaluation point")


# ---------------------------------------------------------------------------
# term oracles


class Quadratic1DTerms:
    """1-D terms f_i(x) = (h_i/2)(x - a_i)^2 - (m/2)x^2.

    m is the strong-convexity offset subtracted when converting to the
    explicit-regularizer convention (m=0 in canonical form).
    """

    def __init__(self, targets, curvatures=None, mu_offset=0.0):
        self.a = np.asarray(targets, dtype=float)
        if curvatures is None:
            curvatures = np.ones_like(self.a)
        self.h = np.broadcast_to(np.asarray(curvatures, dtype=float), self.a.shape).copy()
        self.m = float(mu_offset)
        if np.any(self.h - self.m < -1e-15):
            raise ValueError("mu_offset exceeds term curvature; terms would be nonconvex")

    n = property(lambda self: self.a.shape[0])
    d = 1

    def value_grad(self, i, x):
        s = float(x[0])
        h, a, m = self.h[i], self.a[i], self.m
        v = 0.5 * h * (s - a) ** 2 - 0.5 * m * s * s
        g = h * (s - a) - m * s
        return v, np.array([g])

    def batch_values_grads(self, x):
        s = float(x[0])
        v = 0.5 * self.h * (s - self.a) ** 2 - 0.5 * self.m * s * s
        g = self.h * (s - self.a) - self.m * s
        return v, g[:, None]

    def prox(self, i, eta, z):
        h, a, m = self.h[i], self.a[i], self.m
        return np.array([(h * a + eta * float(z[0])) / (h - m + eta)])

    def conjugate(self, i, u):
        h, a, m = self.h[i], self.a[i], self.m
        q = h - m
        ui = float(u[0])
        if q <= 1e-14:
            # linear term -h*a*x + h*a^2/2: conjugate finite only at u = -h*a
            if abs(ui + h * a) > 1e-8 * max(1.0, abs(h * a)):
                return np.inf
            return -0.5 * h * a * a
        return (ui + h * a) ** 2 / (2.0 * q) - 0.5 * h * a * a

    def lipschitz(self):
        return np.abs(self.h - self.m)

    def split_mu(self, mu):
        return Quadratic1DTerms(self.a, self.h, self.m + mu)

    def content(self):
        return (b"quad1d", self.a.tobytes(), self.h.tobytes(), repr(self.m).encode())


class LinearModelTerms:
    """Linear-model terms f_i(x) = loss(a_i . x, y_i) + (mu_in/2)||x||^2.

    loss is 'squared' (0.5 (s - y)^2) or 'logistic' (log(1 + exp(-y s)),
    labels in {-1, +1}).  Features may be a dense ndarray or a CSR matrix.
    """

    LOSSES = ("squared", "logistic")

    def __init__(self, features, labels, loss="logistic", mu_in=0.0):
        if loss not in self.LOSSES:
            raise ValueError(f"unknown loss {loss!r}")
        self.sparse = sp.issparse(features)
        self.A = features.tocsr() if self.sparse else np.ascontiguousarray(features, dtype=float)
        self.y = np.asarray(labels, dtype=float)
        self.loss = loss
        self.mu_in = float(mu_in)
        self.row_sq_norms = (
            np.asarray(self.A.multiply(self.A).sum(axis=1)).ravel()
            if self.sparse
            else np.einsum("ij,ij->i", self.A, self.A)
        )

    n = property(lambda self: self.A.shape[0])
    d = property(lambda self: self.A.shape[1])

    def row(self, i):
        if self.sparse:
            return np.asarray(self.A.getrow(i).todense()).ravel()
        return self.A[i]

    def _loss_value_coeff(self, s, y):
        if self.loss == "squared":
            r = s - y
            return 0.5 * r * r, r
        # logistic, numerically stable in both tails
        z = -y * s
        if z > 35.0:
            v = z
        else:
            v = np.log1p(np.exp(z))
        return v, -y / (1.0 + np.exp(y * s))

    def value_coeff(self, i, x):
        """Loss value and scalar c with bare-loss gradient c * a_i."""
        s = float(self.row(i) @ x)
        return self._loss_value_coeff(s, self.y[i])

    def value_grad(self, i, x):
        a = self.row(i)
        v, c = self._loss_value_coeff(float(a @ x), self.y[i])
        if self.mu_in > 0:
            return v + 0.5 * self.mu_in * float(x @ x), c * a + self.mu_in * x
        return v, c * a

    def batch_values_grads(self, x):
        s = np.asarray(self.A @ x).ravel()
        if self.loss == "squared":
            r = s - self.y
            v = 0.5 * r * r
            c = r
        else:
            z = -self.y * s
            v = np.where(z > 35.0, z, np.log1p(np.exp(np.minimum(z, 35.0))))
            c = -self.y / (1.0 + np.exp(self.y * s))
        if self.sparse:
            G = self.A.multiply(c[:, None]).toarray()
        else:
            G = c[:, None] * self.A
        if self.mu_in > 0:
            v = v + 0.5 * self.mu_in * float(x @ x)
            G = G + self.mu_in * x
        return v, G

    def prox(self, i, eta, z):
        """argmin_x f_i(x) + (eta/2)||x - z||^2 via 1-D scalar reduction.

        The minimizer has the form x = (eta z - c a_i) / (mu_in + eta) with
        c = loss'(a_i . x), so s = a_i . x solves the increasing scalar
        equation (mu_in + eta) s + ||a_i||^2 loss'(s) - eta a_i . z = 0.
        Squared loss is closed form; logistic uses safeguarded Newton.
        """
        a = self.row(i)
        m, y = self.mu_in, self.y[i]
        sq = self.row_sq_norms[i]
        az = float(a @ z)
        if sq == 0.0:
            return (eta / (m + eta)) * z
        if self.loss == "squared":
            s = (eta * az + sq * y) / (m + eta + sq)
            c = s - y
        else:
            s = self._solve_logistic_scalar(m + eta, sq, eta * az, y)
            c = -y / (1.0 + np.exp(y * s))
        return (eta * z - c * a) / (m + eta)

    @staticmethod
    def _solve_logistic_scalar(k, sq, rhs, y, tol=1e-12, max_iter=100):
        # g(s) = k s + sq * phi'(s) - rhs, strictly increasing (g' >= k)
        def g(s):
            return k * s + sq * (-y / (1.0 + np.exp(y * s))) - rhs

        # bracket: |phi'| <= 1 bounds the root
        lo = (rhs - sq) / k
        hi = (rhs + sq) / k
        if lo > hi:
            lo, hi = hi, lo
        glo, ghi = g(lo), g(hi)
        if glo > 0 or ghi < 0:
            raise _bracket_error(glo, ghi)
        s = 0.5 * (lo + hi)
        for _ in range(max_iter):
            gs = g(s)
            if abs(gs) <= tol * max(1.0, abs(rhs), k * abs(s)):
                return s
            if gs > 0:
                hi = s
            else:
                lo = s
            e = np.exp(y * s)
            dg = k + sq * (e / (1.0 + e) ** 2)
            step = s - gs / dg
            s = step if lo < step < hi else 0.5 * (lo + hi)
        raise ProxSolveError(f"scalar prox solve did not converge (residual {abs(g(s)):.3e})")

    def conjugate(self, i, u):
        """f_i*(u) for mu_in == 0 terms; u must lie on span(a_i)."""
        if self.mu_in != 0.0:
            raise NotImplementedError("conjugate available only for bare-loss terms")
        a = self.row(i)
        sq = self.row_sq_norms[i]
        y = self.y[i]
        if sq == 0.0:
            # constant term: conjugate finite only at 0
            if float(np.abs(u).max(initial=0.0)) > 1e-10:
                return np.inf
            return -self._loss_value_coeff(0.0, y)[0]
        v = float(a @ u) / sq
        if self.loss == "squared":
            return 0.5 * v * v + y * v
        p = -v * y
        if p < -1e-12 or p > 1 + 1e-12:
            return np.inf
        p = min(max(p, 0.0), 1.0)
        ent = 0.0
        if p > 0:
            ent += p * np.log(p)
        if p < 1:
            ent += (1 - p) * np.log(1 - p)
        return ent

    def lipschitz(self):
        curv = 0.25 if self.loss == "logistic" else 1.0
        return curv * self.row_sq_norms + self.mu_in

    def split_mu(self, mu):
        if mu > self.mu_in + 1e-15:
            raise ValueError("cannot split off more curvature than the terms carry")
        return LinearModelTerms(self.A, self.y, self.loss, self.mu_in - mu)

    def dense_arrays(self):
        """(A, y, loss_id, mu_in) for the jitted kernels, or None if sparse."""
        if self.sparse:
            return None
        return self.A, self.y, (0 if self.loss == "squared" else 1), self.mu_in

    def content(self):
        data = self.A.toarray().tobytes() if self.sparse else self.A.tobytes()
        return (b"linear", data, self.y.tobytes(), self.loss.encode(), repr(self.mu_in).encode())


class WorstCaseTerms:
    """Terms f_i(w) = (n/2)(w_i - 1)^2 + ((1-m)/2)||w||^2 on R^n.

    Coordinate i of the gradient of f_j vanishes at w_i = 0 unless j = i,
    so coordinates stay untouched until their term is accessed.
    """

    def __init__(self, n, mu_offset=0.0):
        self._n = int(n)
        self.m = float(mu_offset)
        if not 0.0 <= self.m <= 1.0:
            raise ValueError("mu_offset must lie in [0, 1]")

    n = property(lambda self: self._n)
    d = property(lambda self: self._n)

    def value_grad(self, i, x):
        n, q = self._n, 1.0 - self.m
        v = 0.5 * n * (x[i] - 1.0) ** 2 + 0.5 * q * float(x @ x)
        g = q * x.astype(float).copy()
        g[i] += n * (x[i] - 1.0)
        return v, g

    def batch_values_grads(self, x):
        n, q = self._n, 1.0 - self.m
        diag = x - 1.0
        v = 0.5 * n * diag**2 + 0.5 * q * float(x @ x)
        G = np.tile(q * x, (n, 1))
        G[np.arange(n), np.arange(n)] += n * diag
        return v, G

    def prox(self, i, eta, z):
        n, q = self._n, 1.0 - self.m
        phi = (eta / (q + eta)) * np.asarray(z, dtype=float)
        phi[i] = (n + eta * z[i]) / (n + q + eta)
        return phi

    def conjugate(self, i, u):
        if self.m != 1.0:
            raise NotImplementedError("conjugate available only for bare terms")
        n = self._n
        off = float(np.abs(np.delete(u, i)).max(initial=0.0))
        if off > 1e-10:
            return np.inf
        return u[i] + u[i] ** 2 / (2.0 * n)

    def lipschitz(self):
        return np.full(self._n, self._n + 1.0 - self.m)

    def split_mu(self, mu):
        return WorstCaseTerms(self._n, self.m + mu)

    def content(self):
        return (b"worstcase", str(self._n).encode(), repr(self.m).encode())


def _bracket_error(glo, ghi):
    res = min(abs(glo), abs(ghi))
    return ProxSolveError(f"scalar prox solve failed to bracket the root (residual {res:.3e})")


# ---------------------------------------------------------------------------
# the problem object


@dataclass
class FiniteSumProblem:
    """f(x) = (1/n) sum_i f_i(x) (+ explicit (mu/2)||x||^2 if not mu_in_terms)
    (+ nonsmooth part of `regularizer`)."""

    terms: object
    mu: float
    mu_in_terms: bool = True
    regularizer: Regularizer = field(default_factory=Regularizer.none)
    name: str = "problem"

    def __post_init__(self):
        self.n = self.terms.n
        self.d = self.terms.d
        self.lipschitz = np.asarray(self.terms.lipschitz(), dtype=float)
        if self.n < 1 or self.d < 1:
            raise ValueError("need n >= 1 and d >= 1")
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        if np.any(self.lipschitz <= 0):
            # allow exactly-zero curvature terms (e.g. zero feature rows)
            self.lipschitz = np.maximum(self.lipschitz, 1e-300)
        if self.L_bar > self.L + 1e-12:
            raise ValueError("constants must satisfy L >= L_bar")
        if self.mu_in_terms and self.mu > self.L_bar + 1e-12:
            raise ValueError("canonical problems must satisfy L_bar >= mu")
        if not self.mu_in_terms and self.mu > 0 and self.regularizer.smooth_mu != self.mu:
            raise ValueError("explicit-regularizer problems must carry mu in the regularizer")

    @property
    def L(self) -> float:
        return float(self.lipschitz.max())

    @property
    def L_bar(self) -> float:
        return float(self.lipschitz.mean())

    def check_index(self, i: int):
        if not 1 <= i <= self.n:
            raise IndexError(f"term index {i} out of range 1..{self.n}")

    def eval_term(self, i: int, x):
        """Value and gradient of the i-th term (1-based); one oracle access."""
        self.check_index(i)
        x = np.asarray(x, dtype=float)
        _check_finite(x)
        return self.terms.value_grad(i - 1, x)

    def eval_full(self, x):
        """(F(x), smooth gradient): exact mean of the term values/gradients
        plus the regularizer's value; the gradient excludes any nonsmooth part."""
        x = np.asarray(x, dtype=float)
        _check_finite(x)
        vals, grads = self.terms.batch_values_grads(x)
        value = float(np.mean(vals)) + self.regularizer.value(x)
        grad = np.mean(grads, axis=0) + self.regularizer.smooth_grad(x)
        return value, grad

    def objective(self, x) -> float:
        return self.eval_full(x)[0]

    def smooth_grad(self, x):
        return self.eval_full(x)[1]

    def big_data_check(self, beta: float) -> bool:
        """Whether n >= beta * L / mu.  Undefined (raises) when mu == 0."""
        if beta < 1:
            raise ValueError("beta must be >= 1")
        if self.mu <= 0:
            raise UndefinedConditionError("big-data condition needs mu > 0")
        return self.n >= beta * self.L / self.mu

    def to_sdca_convention(self) -> "FiniteSumProblem":
        """Move per-term strong convexity into an explicit l2 regularizer."""
        if not self.mu_in_terms:
            return self
        if self.mu <= 0:
            raise UndefinedConditionError("conversion needs mu > 0")
        if self.regularizer.kind != "none":
            raise ValueError("composite problems are not convertible")
        return FiniteSumProblem(
            terms=self.terms.split_mu(self.mu),
            mu=self.mu,
            mu_in_terms=False,
            regularizer=Regularizer.l2(self.mu),
            name=self.name + "-sdca",
        )

    def estimate_constants(self, samples: int = 200, seed: int = 0, scale: float = 1.0):
        """Closed-form L_i where available, plus sampled verification of the
        declared constants.  Returns a ConstantsReport."""
        if samples < 1:
            raise ValueError("samples must be >= 1")
        rng = np.random.default_rng(seed)
        L_i = self.lipschitz.copy()
        violations = []
        for _ in range(samples):
            i = int(rng.integers(1, self.n + 1))
            x = scale * rng.standard_normal(self.d)
            y = scale * rng.standard_normal(self.d)
            vx, gx = self.eval_term(i, x)
            vy, gy = self.eval_term(i, y)
            dx = np.linalg.norm(x - y)
            if np.linalg.norm(gx - gy) > L_i[i - 1] * dx * (1 + 1e-9) + 1e-12:
                violations.append(("lipschitz", i, x, y))
            mu_t = self.mu if self.mu_in_terms else 0.0
            lb = vx + float(gx @ (y - x)) + 0.5 * mu_t * dx * dx
            if vy < lb - 1e-9 * max(1.0, abs(vy), abs(lb)):
                violations.append(("strong_convexity", i, x, y))
        return ConstantsReport(L_i, float(L_i.max()), float(L_i.mean()),
                               not violations, violations)

    def cache_key(self) -> str:
        h = hashlib.sha256()
        for part in self.terms.content():
            h.update(part)
        h.update(repr((self.mu, self.mu_in_terms, self.regularizer)).encode())
        return h.hexdigest()


@dataclass
class ConstantsReport:
    L_i: np.ndarray
    L: float
    L_bar: float
    ok: bool
    violations: list
