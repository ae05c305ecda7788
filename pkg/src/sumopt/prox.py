"""Proximal operators under the gamma/2 weighting convention.

Throughout this package

    prox(h, gamma, v) = argmin_x { h(x) + (gamma/2) * ||x - v||^2 }.

Note the weight is gamma/2, not the 1/(2*gamma) used by most other
libraries: *larger* gamma pulls the result closer to v.  All solver code
passes weights in this convention (e.g. a proximal-gradient step with
step size g uses weight 1/g).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("none", "l2", "l1", "elastic", "box")


class ProxSolveError(RuntimeError):
    """Inner 1-D solve for a term-prox failed to converge."""


@dataclass(frozen=True)
class Regularizer:
    """Simple separable regularizer h(x) with a closed-form prox.

    kind, parameters:
      none            h = 0
      l2(mu)          h = (mu/2) ||x||^2
      l1(lam)         h = lam ||x||_1
      elastic(mu,lam) h = (mu/2)||x||^2 + lam ||x||_1
      box(lo,hi)      h = indicator of [lo, hi]^d
    """

    kind: str = "none"
    mu: float = 0.0
    lam: float = 0.0
    lo: float = -np.inf
    hi: float = np.inf

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown regularizer kind {self.kind!r}")
        if self.mu < 0 or self.lam < 0:
            raise ValueError("regularizer weights must be nonnegative")
        if self.lo > self.hi:
            raise ValueError("box bounds must satisfy lo <= hi")

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def l2(cls, mu):
        return cls("l2", mu=float(mu))

    @classmethod
    def l1(cls, lam):
        return cls("l1", lam=float(lam))

    @classmethod
    def elastic(cls, mu, lam):
        return cls("elastic", mu=float(mu), lam=float(lam))

    @classmethod
    def box(cls, lo, hi):
        return cls("box", lo=float(lo), hi=float(hi))

    @property
    def smooth_mu(self) -> float:
        """Curvature of the smooth quadratic part (0 unless l2/elastic)."""
        return self.mu if self.kind in ("l2", "elastic") else 0.0

    @property
    def nonsmooth(self) -> bool:
        return self.kind in ("l1", "elastic", "box")

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if self.kind == "none":
            return 0.0
        if self.kind == "l2":
            return 0.5 * self.mu * float(x @ x)
        if self.kind == "l1":
            return self.lam * float(np.abs(x).sum())
        if self.kind == "elastic":
            return 0.5 * self.mu * float(x @ x) + self.lam * float(np.abs(x).sum())
        # box: 0 inside, inf outside (tiny tolerance for float drift)
        if np.all(x >= self.lo - 1e-12) and np.all(x <= self.hi + 1e-12):
            return 0.0
        return np.inf

    def smooth_grad(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind in ("l2", "elastic"):
            return self.mu * x
        return np.zeros_like(x)


def soft_threshold(v, t):
    """Componentwise shrinkage: sign(v) * max(|v| - t, 0)."""
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def prox(reg: Regularizer, gamma: float, v):
    """Exact minimizer of h(x) + (gamma/2) ||x - v||^2, componentwise."""
    if gamma <= 0:
        raise ValueError(f"prox weight must be positive, got {gamma}")
    v = np.asarray(v, dtype=float)
    if reg.kind == "none":
        return v.copy()
    if reg.kind == "l2":
        return v * (gamma / (reg.mu + gamma))
    if reg.kind == "l1":
        return soft_threshold(v, reg.lam / gamma)
    if reg.kind == "elastic":
        return np.sign(v) * np.maximum(gamma * np.abs(v) - reg.lam, 0.0) / (reg.mu + gamma)
    return np.clip(v, reg.lo, reg.hi)


def prox_conjugate(reg: Regularizer, gamma: float, v):
    """Prox of the convex conjugate h*, computed without evaluating h*.

    Under the gamma/2 weighting the Moreau decomposition reads

        prox_gamma^{h*}(v) = v - (1/gamma) * prox_{1/gamma}^{h}(gamma * v),

    which reduces to prox^{h*}(v) + prox^{h}(v) = v at gamma = 1.
    """
    if gamma <= 0:
        raise ValueError(f"prox weight must be positive, got {gamma}")
    v = np.asarray(v, dtype=float)
    return v - prox(reg, 1.0 / gamma, gamma * v) / gamma


def prox_term(problem, i: int, eta: float, z):
    """Prox of a single sum term: argmin_x f_i(x) + (eta/2)||x - z||^2.

    Returns (phi_new, grad_at_phi) where the gradient is recovered from
    the stationarity identity f_i'(phi_new) = eta * (z - phi_new), so no
    extra oracle call is needed.  1-based index i.
    """
    if eta <= 0:
        raise ValueError(f"prox_term weight must be positive, got {eta}")
    z = np.asarray(z, dtype=float)
    problem.check_index(i)
    phi = problem.terms.prox(i - 1, eta, z)
    return phi, eta * (z - phi)
