"""Rate bounds, Lyapunov evaluators, the saga constants checker, and
reference minimizers.

The Lyapunov functions are the exact potentials from the convergence
analyses, evaluated on solver state as runtime diagnostics; the rate
bounds are the closed-form geometric (or sublinear) envelopes the
acceptance suite measures runs against.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ordering import Ordering
from .problem import (
    FiniteSumProblem,
    LinearModelTerms,
    Quadratic1DTerms,
    WorstCaseTerms,
)
from .prox import prox
from .solvers import SAGASolver, default_step


class HypothesisViolation(ValueError):
    """The requested bound's hypotheses do not hold for this problem."""


# ---------------------------------------------------------------------------
# reference minimizers

_REFERENCE_CACHE: dict = {}


def reference_minimizer(problem: FiniteSumProblem, tol: float = 1e-12,
                        max_epochs: int = 20000):
    """(x_star, f_star): closed form where available, otherwise a long
    saga run until the gradient-map norm drops below tol.  Cached per
    problem content hash."""
    key = (problem.cache_key(), tol)
    if key in _REFERENCE_CACHE:
        x, f = _REFERENCE_CACHE[key]
        return x.copy(), f

    x_star = _closed_form(problem)
    if x_star is None:
        x_star = _long_run(problem, tol, max_epochs)
    f_star = problem.objective(x_star)
    _REFERENCE_CACHE[key] = (x_star.copy(), f_star)
    return x_star, f_star


def _closed_form(problem):
    terms = problem.terms
    reg = problem.regularizer
    if reg.nonsmooth:
        return None
    if isinstance(terms, WorstCaseTerms) and problem.mu_in_terms:
        return np.full(problem.d, 0.5)
    if isinstance(terms, Quadratic1DTerms):
        # stationarity of mean of (h_i/2)(x-a_i)^2 - (m/2)x^2 + reg
        h = terms.h
        denom = float(np.mean(h - terms.m)) + reg.smooth_mu
        return np.array([float(np.mean(h * terms.a)) / denom])
    if isinstance(terms, LinearModelTerms) and terms.loss == "squared":
        A = terms.A.toarray() if terms.sparse else terms.A
        n = problem.n
        mu_eff = terms.mu_in + reg.smooth_mu
        H = A.T @ A / n + mu_eff * np.eye(problem.d)
        b = A.T @ terms.y / n
        if mu_eff > 0:
            return np.linalg.solve(H, b)
        return np.linalg.lstsq(A, terms.y, rcond=None)[0]
    return None


def _long_run(problem, tol, max_epochs):
    gamma = default_step(problem, "saga")
    solver = SAGASolver(problem, gamma)
    stream = Ordering("randomized", problem.n, seed=20140101)
    gref = 1.0 / problem.L
    _, nonsmooth = _split_nonsmooth(problem)
    for _ in range(max_epochs):
        solver.run_epoch(stream.epoch_indices())
        x = solver.iterate()
        g = problem.smooth_grad(x)
        if nonsmooth is None:
            res = float(np.linalg.norm(g))
        else:
            step = prox(nonsmooth, 1.0 / gref, x - gref * g)
            res = float(np.linalg.norm(x - step)) / gref
        if res <= tol:
            return x.copy()
    raise RuntimeError(f"reference solve did not reach tol={tol} "
                       f"within {max_epochs} epochs (residual {res:.3e})")


def _split_nonsmooth(problem):
    from .solvers import _split_reg

    return _split_reg(problem.regularizer)


# ---------------------------------------------------------------------------
# Lyapunov functions


@dataclass
class LyapunovValue:
    method: str
    value: float
    parts: dict = field(default_factory=dict)


def finito_lyapunov(problem, Phi, G, alpha) -> LyapunovValue:
    """Potential for the aggressive table method: f at the table average
    minus the strong-convexity model built from the stored pairs."""
    mu, n = problem.mu, problem.n
    phibar = Phi.mean(axis=0)
    w = phibar - G.sum(axis=0) / (alpha * mu * n)
    term_vals = np.array([problem.terms.value_grad(i, Phi[i])[0] for i in range(n)])
    t1 = problem.objective(phibar)
    t2 = -float(np.mean(term_vals)) - float(np.mean(np.einsum("ij,ij->i", G, w - Phi)))
    t3 = -0.5 * mu * float(np.mean(np.einsum("ij,ij->i", w - Phi, w - Phi)))
    t4 = 0.5 * mu * float(np.mean(np.einsum("ij,ij->i", phibar - Phi, phibar - Phi)))
    return LyapunovValue("finito", t1 + t2 + t3 + t4,
                         {"T1": t1, "T2": t2, "T3": t3, "T4": t4, "w": w})


def saga_lyapunov(problem, x, Phi, gamma, x_star, f_star) -> LyapunovValue:
    """Table Bregman divergence at x_star plus c ||x - x_star||^2 with
    c = 1 / (2 gamma (1 - gamma mu) n)."""
    mu, n = problem.mu, problem.n
    c = 1.0 / (2.0 * gamma * (1.0 - gamma * mu) * n)
    term_vals = np.empty(n)
    breg = 0.0
    for i in range(n):
        v, _ = problem.terms.value_grad(i, Phi[i])
        term_vals[i] = v
        _, g_star = problem.terms.value_grad(i, x_star)
        breg += float(g_star @ (Phi[i] - x_star))
    table = float(np.mean(term_vals)) - f_star - breg / n
    dist = c * float((x - x_star) @ (x - x_star))
    return LyapunovValue("saga", table + dist, {"table": table, "dist": dist, "c": c})


def prox_finito_lyapunov(problem, Phi, G, f_star) -> LyapunovValue:
    """f_star minus the minimum of the strong-convexity lower-bound model."""
    mu, n = problem.mu, problem.n
    w = Phi.mean(axis=0) - G.sum(axis=0) / (mu * n)
    b = 0.0
    for i in range(n):
        v, _ = problem.terms.value_grad(i, Phi[i])
        b += v + float(G[i] @ (w - Phi[i])) + 0.5 * mu * float((w - Phi[i]) @ (w - Phi[i]))
    b /= n
    return LyapunovValue("proxfinito", f_star - b, {"B": b, "w": w})


def lyapunov(solver, problem, reference, alpha=None, gamma=None) -> LyapunovValue:
    """Dispatch on the solver's method tag; `reference` is (x_star, f_star)."""
    if reference is None:
        raise ValueError("lyapunov evaluation needs a reference minimizer")
    x_star, f_star = reference
    m = solver.method
    if m == "finito":
        return finito_lyapunov(problem, solver.Phi, solver.G,
                               alpha if alpha is not None else solver.alpha)
    if m == "saga":
        if getattr(solver, "Phi", None) is None:
            raise ValueError("saga lyapunov needs track_phi=True")
        return saga_lyapunov(problem, solver.iterate(), solver.Phi,
                             gamma if gamma is not None else solver.gamma,
                             x_star, f_star)
    if m == "proxfinito":
        return prox_finito_lyapunov(problem, solver.Phi, solver.G, f_star)
    if m == "miso":
        return LyapunovValue("miso", solver.path_distance_mean())
    raise ValueError(f"no lyapunov form for method {m!r}")


# ---------------------------------------------------------------------------
# rate bounds


@dataclass
class RateBound:
    method: str
    rho: float
    c0: float
    per_epoch: bool = False
    conditional: bool = False
    sublinear_scale: float | None = None  # saga non-sc: bound = scale/k * c0

    def bound(self, k: int) -> float:
        if self.sublinear_scale is not None:
            return np.inf if k == 0 else self.sublinear_scale / k * self.c0
        return self.rho**k * self.c0


def rate_bound(method: str, problem: FiniteSumProblem, *, alpha: float = 2.0,
               m: int | None = None, x0=None, reference=None) -> RateBound:
    """Closed-form theoretical envelope for `method` on `problem`.

    Raises HypothesisViolation when the corresponding theorem's
    hypotheses fail (e.g. finito outside the big-data regime).
    """
    n, mu, L = problem.n, problem.mu, problem.L
    x0 = np.zeros(problem.d) if x0 is None else np.asarray(x0, dtype=float)

    def grad_norm_sq_at_x0():
        g = problem.smooth_grad(x0)
        return float(g @ g)

    def h0():
        if reference is None:
            raise ValueError(f"{method} bound needs a reference minimizer")
        x_star, f_star = reference
        _, g_star = problem.eval_full(x_star)
        return (problem.objective(x0) - f_star
                - float(g_star @ (x0 - x_star)))

    def dist0():
        x_star, _ = reference
        return float((x0 - x_star) @ (x0 - x_star))

    if method == "finito":
        if mu <= 0 or not problem.mu_in_terms:
            raise HypothesisViolation("finito bound needs canonical mu > 0")
        if alpha == 2.0 and not problem.big_data_check(2.0):
            raise HypothesisViolation("finito alpha=2 bound needs the "
                                      "big-data condition with beta=2")
        c0 = (1.0 - 1.0 / (2.0 * alpha)) / mu * grad_norm_sq_at_x0()
        return RateBound("finito", 1.0 - 1.0 / (alpha * n), c0)

    if method == "miso":
        if mu <= 0 or not problem.mu_in_terms:
            raise HypothesisViolation("miso bound needs canonical mu > 0")
        rho = (1.0 - mu / ((mu + L) * n)) ** 2
        c0 = (2.0 * n / mu) * grad_norm_sq_at_x0()
        return RateBound("miso", rho, c0)

    if method == "proxfinito":
        if mu <= 0 or not problem.mu_in_terms or n <= 1:
            raise HypothesisViolation("prox-finito bound needs mu > 0, n > 1")
        rho = 1.0 - mu / (mu * n + L - mu)
        # uniform start: B0(w0) = f(x0) - ||f'(x0)||^2 / (2 mu)
        x_star, f_star = reference if reference is not None else reference_minimizer(problem)
        gap0 = f_star - (problem.objective(x0) - grad_norm_sq_at_x0() / (2.0 * mu))
        c0 = (mu * n + L - mu) / mu * gap0
        return RateBound("proxfinito", rho, c0)

    if method == "sdca":
        sdca_problem = problem.to_sdca_convention() if problem.mu_in_terms else problem
        mu_s, L_s, n_s = sdca_problem.mu, sdca_problem.L, sdca_problem.n
        if mu_s <= 0:
            raise HypothesisViolation("sdca bound needs mu > 0")
        rho = 1.0 - mu_s / (L_s + mu_s * n_s)
        if reference is None:
            raise ValueError("sdca bound needs a reference minimizer")
        f_star = reference[1]
        conj0 = np.mean([sdca_problem.terms.conjugate(i, np.zeros(problem.d))
                         for i in range(n_s)])
        d0 = -float(conj0)  # D at the zero dual point
        return RateBound("sdca", rho, f_star - d0)

    if method == "saga":
        if mu <= 0 or not problem.mu_in_terms:
            raise HypothesisViolation("saga strongly convex bound needs "
                                      "canonical mu > 0")
        rho = 1.0 - mu / (2.0 * (mu * n + L))
        c0 = dist0() + n / (mu * n + L) * h0()
        return RateBound("saga", rho, c0)

    if method == "saga_adaptive":
        if mu <= 0 or not problem.mu_in_terms:
            raise HypothesisViolation("adaptive saga bound needs canonical mu > 0")
        rho = 1.0 - min(1.0 / (4.0 * n), mu / (3.0 * L))
        c0 = dist0() + 2.0 * n / (3.0 * L) * h0()
        return RateBound("saga_adaptive", rho, c0)

    if method == "saga_nonsc":
        c0 = 2.0 * L / n * dist0() + h0()
        return RateBound("saga_nonsc", 1.0, c0, sublinear_scale=10.0 * n)

    if method == "svrg":
        if mu <= 0 or not problem.mu_in_terms:
            raise HypothesisViolation("svrg bound needs canonical mu > 0")
        mm = m if m is not None else n
        eta = 4.0 * L
        rho = max(0.5, (1.0 - mu / eta) ** mm)
        c1 = 1.0 - mu / eta
        c4 = (1.0 - c1**mm) / (1.0 - c1) if c1 < 1 else float(mm)
        x_star, f_star = reference
        c0 = dist0() + c4 / (2.0 * L) * (problem.objective(x0) - f_star)
        return RateBound("svrg", rho, c0, per_epoch=True, conditional=True)

    raise HypothesisViolation(f"no rate bound for method {method!r}")


# often-quoted special cases, used by tests and docs
def finito_epoch_reduction(n: int, epochs: int, alpha: float = 2.0) -> float:
    """Factor by which the finito envelope shrinks over `epochs` epochs."""
    return (1.0 - 1.0 / (alpha * n)) ** (epochs * n)


def sdca_big_data_rate(n: int, beta: float = 2.0) -> float:
    """Dual rate at the big-data boundary n = beta L / mu: 1 - beta/((beta+1) n)."""
    return 1.0 - beta / ((beta + 1.0) * n)


# ---------------------------------------------------------------------------
# saga constants checker


def saga_constants_check(mu: float, L: float, n: int, mode: str,
                         gamma: float | None = None, beta: float | None = None,
                         c: float | None = None, kappa_inv: float | None = None,
                         alpha: float | None = None) -> dict:
    """Evaluate the bracketed constants of the convergence analyses and
    report their signs; passes iff all are <= 0.

    mode 'strongly_convex': step 1/(2(mu n + L)); 'adaptive': step 1/(3L)
    with rate min(1/(4n), mu/(3L)); 'non_sc': the tau system at step 1/(3L).
    Any constant left as None takes its derived default.
    """
    if mode not in ("strongly_convex", "adaptive", "non_sc"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "non_sc":
        gamma = 1.0 / (3.0 * L) if gamma is None else gamma
        beta = 1.5 if beta is None else beta
        c = 3.0 * L / (2.0 * n) if c is None else c
        alpha = 3.0 * L / (20.0 * n) if alpha is None else alpha
        tau1 = 1.0 / n - 2.0 * c * gamma
        tau2 = (4.0 * (1.0 + 1.0 / beta) * alpha * L * gamma**2
                + 2.0 * (1.0 + 1.0 / beta) * c * L * gamma**2 - 1.0 / n)
        tau3 = (1.0 + beta) * c * gamma + 2.0 * (1.0 + beta) * alpha * gamma - c / L
        vals = {"tau1": tau1, "tau2": tau2, "tau3": tau3}
        return {**vals, "ok": all(v <= 1e-12 for v in vals.values()),
                "constants": {"gamma": gamma, "beta": beta, "c": c, "alpha": alpha}}

    if mode == "strongly_convex":
        gamma = 1.0 / (2.0 * (mu * n + L)) if gamma is None else gamma
        beta = (2.0 * mu * n + L) / L if beta is None else beta
        kappa_inv = gamma * mu if kappa_inv is None else kappa_inv
    else:
        gamma = 1.0 / (3.0 * L) if gamma is None else gamma
        beta = 2.0 if beta is None else beta
        kappa_inv = min(1.0 / (4.0 * n), mu / (3.0 * L)) if kappa_inv is None else kappa_inv
    c = 1.0 / (2.0 * gamma * (1.0 - gamma * mu) * n) if c is None else c

    c1 = 1.0 / n - 2.0 * c * gamma * (L - mu) / L - 2.0 * c * gamma**2 * mu * beta
    c2 = kappa_inv + 2.0 * (1.0 + 1.0 / beta) * c * gamma**2 * L - 1.0 / n
    c3 = c * kappa_inv - gamma * mu * c
    c4 = (1.0 + beta) * c * gamma**2 - c * gamma / L
    vals = {"c1": c1, "c2": c2, "c3": c3, "c4": c4}
    return {**vals, "ok": all(v <= 1e-12 for v in vals.values()),
            "constants": {"gamma": gamma, "beta": beta, "c": c,
                          "kappa_inv": kappa_inv}}
