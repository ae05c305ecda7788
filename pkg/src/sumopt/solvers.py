"""Incremental gradient solvers as step-driven state machines, plus a runner.

Every solver consumes one 1-based term index per `step(j)` call and keeps
its own oracle-access counter.  `run_epoch` drives a whole epoch at once
and switches to the jitted kernels for dense linear models when enabled
(see `kernels`); the per-step Python path is the reference semantics.

Conventions expected by each method:
  canonical problems (mu inside every term): sgd, sag, saga, saga2var,
    svrg, finito, miso, proxfinito
  explicit-regularizer problems: sdca, sdca-primal (the runner converts
    canonical problems automatically), and saga's explicit variant.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import kernels
from .ordering import CounterRng, Ordering, weights_from_lipschitz
from .problem import FiniteSumProblem, LinearModelTerms
from .prox import Regularizer, prox, prox_term, soft_threshold

METHODS = (
    "sgd", "sag", "saga", "saga2var", "svrg",
    "finito", "proxfinito", "miso", "sdca", "sdca-primal",
)

# table-running-sum refresh interval, in steps per term
REFRESH_EVERY = 1000


class ConfigError(ValueError):
    """Method/problem/flag combination is invalid."""


@dataclass
class SolverConfig:
    method: str
    step: object = "auto"          # float, or "auto" for the theorem default
    alpha: float | None = None     # finito inverse-step factor
    schedule: str = "constant"     # sgd: "constant" | "inv_k"
    theta: float | None = None     # sgd inv_k numerator
    svrg_m: int | None = None
    svrg_xtilde: str = "last"      # "last" | "avg" | "sampled"
    sdca_mode: str = "exact"       # "exact" | "line_search" | "constant"
    finito_storage: str = "tables"  # "tables" | "combined"
    finito_first_pass: bool = False
    jit: bool = False              # saga: lazy sparse updates
    track_average: bool = False
    track_phi: bool = False        # saga: keep the phi table for diagnostics
    track_path: bool = False       # miso: path-distance bookkeeping

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")


def _split_reg(reg: Regularizer):
    """(smooth l2 weight, nonsmooth prox part or None)."""
    if reg.kind == "none":
        return 0.0, None
    if reg.kind == "l2":
        return reg.mu, None
    if reg.kind == "l1":
        return 0.0, reg
    if reg.kind == "elastic":
        return reg.mu, Regularizer.l1(reg.lam)
    return 0.0, reg  # box


class BaseSolver:
    method = "base"
    init_accesses_all = False

    def __init__(self, problem: FiniteSumProblem, x0=None):
        self.problem = problem
        self.n = problem.n
        self.d = problem.d
        self.x0 = np.zeros(self.d) if x0 is None else np.asarray(x0, dtype=float).copy()
        self.k = 0
        self.grad_evals = 0

    def step(self, j: int):
        raise NotImplementedError

    def run_epoch(self, indices: np.ndarray):
        if kernels.numba_enabled() and self._kernel_epoch(indices):
            return
        for j in indices:
            self.step(int(j))

    def _kernel_epoch(self, indices) -> bool:
        return False

    def _dense(self):
        terms = self.problem.terms
        if isinstance(terms, LinearModelTerms):
            return terms.dense_arrays()
        return None

    def iterate(self):
        raise NotImplementedError

    def point(self):
        """Iterate the method's convergence statement refers to."""
        return self.iterate()


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


class SGDSolver(BaseSolver):
    method = "sgd"

    def __init__(self, problem, gamma, schedule="constant", theta=None, x0=None):
        super().__init__(problem, x0)
        _require(problem.mu_in_terms, "sgd expects the canonical convention")
        _require(not problem.regularizer.nonsmooth, "sgd has no prox support")
        self.gamma = gamma
        self.schedule = schedule
        self.theta = theta
        if schedule == "inv_k" and theta is None:
            raise ConfigError("inv_k schedule needs theta")
        self.x = self.x0.copy()

    def current_step_size(self):
        return self.theta / max(self.k, 1) if self.schedule == "inv_k" else self.gamma

    def step(self, j):
        self.k += 1
        _, g = self.problem.eval_term(j, self.x)
        self.grad_evals += 1
        gk = self.theta / self.k if self.schedule == "inv_k" else self.gamma
        self.x = self.x - gk * g

    def _kernel_epoch(self, indices):
        dense = self._dense()
        if dense is None:
            return False
        A, y, loss_id, mu_in = dense
        idx0 = np.asarray(indices, dtype=np.int64) - 1
        theta = self.theta if self.schedule == "inv_k" else 0.0
        kernels.sgd_epoch(A, y, loss_id, mu_in, self.x, idx0,
                          float(self.gamma or 0.0), float(theta), self.k)
        self.k += len(idx0)
        self.grad_evals += len(idx0)
        return True

    def iterate(self):
        return self.x


class _TableSolver(BaseSolver):
    """Shared gradient-table plumbing: full init at x0, incremental sums."""

    init_accesses_all = True

    def _init_tables(self, at):
        vals, G = self.problem.terms.batch_values_grads(at)
        self.G = np.array(G, dtype=float)
        self.S = self.G.sum(axis=0)
        self.grad_evals += self.n

    def _refresh_if_due(self):
        if self.k and self.k % (REFRESH_EVERY * self.n) == 0:
            self.S = self.G.sum(axis=0)


class SAGSolver(_TableSolver):
    method = "sag"

    def __init__(self, problem, gamma, x0=None):
        super().__init__(problem, x0)
        _require(problem.mu_in_terms, "sag expects the canonical convention")
        _require(not problem.regularizer.nonsmooth,
                 "sag has no prox variant with established convergence")
        self.gamma = float(gamma)
        self.x = self.x0.copy()
        self._init_tables(self.x)

    def step(self, j):
        i = j - 1
        self.k += 1
        _, g = self.problem.eval_term(j, self.x)
        self.grad_evals += 1
        self.x = self.x - self.gamma * ((g - self.G[i]) / self.n + self.S / self.n)
        self.S += g - self.G[i]
        self.G[i] = g
        self._refresh_if_due()

    def _kernel_epoch(self, indices):
        dense = self._dense()
        if dense is None:
            return False
        A, y, loss_id, mu_in = dense
        idx0 = np.asarray(indices, dtype=np.int64) - 1
        kernels.sag_epoch(A, y, loss_id, mu_in, self.x, self.G, self.S,
                          idx0, self.gamma)
        self.k += len(idx0)
        self.grad_evals += len(idx0)
        self._refresh_if_due()
        return True

    def iterate(self):
        return self.x


class SAGASolver(_TableSolver):
    """Composite-objective table method with an unbiased gradient estimate.

    Canonical problems use the prox form x <- prox_{1/gamma}(w) for the
    nonsmooth part; explicit-regularizer problems use the
    (1 - mu*gamma) x scaling variant for the l2 part.
    """

    method = "saga"

    def __init__(self, problem, gamma, x0=None, track_average=False,
                 track_phi=False):
        super().__init__(problem, x0)
        self.gamma = float(gamma)
        if problem.mu_in_terms:
            self.expl_mu = 0.0
            _, self.nonsmooth = _split_reg(problem.regularizer)
        else:
            self.expl_mu, self.nonsmooth = _split_reg(problem.regularizer)
        self.x = self.x0.copy()
        self._init_tables(self.x)
        self.track_average = track_average
        self.avg_sum = np.zeros(self.d)
        self.avg_count = 0
        self.Phi = np.tile(self.x0, (self.n, 1)) if track_phi else None

    def step(self, j):
        i = j - 1
        self.k += 1
        _, g = self.problem.eval_term(j, self.x)
        self.grad_evals += 1
        w = self.x - self.gamma * (g - self.G[i] + self.S / self.n)
        if self.expl_mu > 0:
            w = w - self.gamma * self.expl_mu * self.x
        if self.nonsmooth is not None:
            w = prox(self.nonsmooth, 1.0 / self.gamma, w)
        self.S += g - self.G[i]
        self.G[i] = g
        if self.Phi is not None:
            self.Phi[i] = self.x
        self.x = w
        if self.track_average:
            self.avg_sum += self.x
            self.avg_count += 1
        self._refresh_if_due()

    def _kernel_epoch(self, indices):
        dense = self._dense()
        if dense is None or self.Phi is not None:
            return False
        if self.nonsmooth is not None and self.nonsmooth.kind != "l1":
            return False
        A, y, loss_id, mu_in = dense
        idx0 = np.asarray(indices, dtype=np.int64) - 1
        lam = self.nonsmooth.lam if self.nonsmooth is not None else 0.0
        kernels.saga_epoch(A, y, loss_id, mu_in, self.x, self.G, self.S, idx0,
                           self.gamma, self.expl_mu, lam, self.avg_sum,
                           self.track_average)
        if self.track_average:
            self.avg_count += len(idx0)
        self.k += len(idx0)
        self.grad_evals += len(idx0)
        self._refresh_if_due()
        return True

    def iterate(self):
        return self.x

    def average_iterate(self):
        if self.avg_count == 0:
            return self.x0.copy()
        return self.avg_sum / self.avg_count


class SAGA2VarSolver(_TableSolver):
    """Two-variable form: u tracks the table average in expectation.

    Produces the same iterate sequence as the one-variable form on
    non-composite problems.
    """

    method = "saga2var"

    def __init__(self, problem, gamma, x0=None):
        super().__init__(problem, x0)
        _require(problem.mu_in_terms, "saga2var expects the canonical convention")
        _require(problem.regularizer.kind == "none",
                 "the two-variable form is non-composite only")
        self.gamma = float(gamma)
        self._init_tables(self.x0)
        self.u = self.x0 + self.gamma * self.S
        self.x = self.x0.copy()

    def step(self, j):
        i = j - 1
        self.k += 1
        x = self.u - self.gamma * self.S
        self.u = self.u + (x - self.u) / self.n
        _, g = self.problem.eval_term(j, x)
        self.grad_evals += 1
        self.S += g - self.G[i]
        self.G[i] = g
        self.x = x
        self._refresh_if_due()

    def iterate(self):
        return self.x


class SVRGSolver(BaseSolver):
    """Recalibrated variance reduction: two term gradients per inner step,
    n extra accesses per recalibration (done lazily, before the step that
    exceeds the window)."""

    method = "svrg"
    init_accesses_all = True

    def __init__(self, problem, gamma, m=None, xtilde_mode="last", seed=0,
                 x0=None, defer_recalibration=False):
        super().__init__(problem, x0)
        _require(problem.mu_in_terms, "svrg expects the canonical convention")
        _require(not problem.regularizer.nonsmooth, "svrg has no prox support here")
        if xtilde_mode not in ("last", "avg", "sampled"):
            raise ConfigError(f"unknown xtilde mode {xtilde_mode!r}")
        self.gamma = float(gamma)
        self.m = int(m) if m is not None else self.n
        self.mode = xtilde_mode
        self._rng = CounterRng(seed ^ 0x53565247)
        self.x = self.x0.copy()
        self.xtilde = None
        self.g = None
        self.since = 0
        self._window = []
        self._window_sum = np.zeros(self.d)
        if not defer_recalibration:
            self.recalibrate()

    def recalibrate(self):
        if self.xtilde is None or self.mode == "last" or not self._window:
            xt = self.x
        elif self.mode == "avg":
            xt = self._window_sum / len(self._window)
        else:
            xt = self._window[self._rng.next_below(len(self._window))]
        self.xtilde = np.array(xt, dtype=float, copy=True)
        _, self.g = self.problem.eval_full(self.xtilde)
        self.grad_evals += self.n
        self.since = 0
        self._window = []
        self._window_sum = np.zeros(self.d)

    def step(self, j):
        if self.xtilde is None:
            raise ConfigError("svrg stepped before any recalibration")
        if self.since >= self.m:
            self.recalibrate()
        self.k += 1
        self.since += 1
        _, gx = self.problem.eval_term(j, self.x)
        _, gt = self.problem.eval_term(j, self.xtilde)
        self.grad_evals += 2
        self.x = self.x - self.gamma * (gx - gt + self.g)
        if self.mode != "last":
            self._window_sum += self.x
            if self.mode == "sampled":
                self._window.append(self.x.copy())
            else:
                self._window.append(True)

    def run_epoch(self, indices):
        dense = self._dense()
        if not (kernels.numba_enabled() and dense is not None and self.mode == "last"):
            for j in indices:
                self.step(int(j))
            return
        A, y, loss_id, mu_in = dense
        idx0 = np.asarray(indices, dtype=np.int64) - 1
        pos = 0
        while pos < len(idx0):
            if self.since >= self.m:
                self.recalibrate()
            take = min(self.m - self.since, len(idx0) - pos)
            kernels.svrg_chunk(A, y, loss_id, mu_in, self.x, self.xtilde,
                               self.g, idx0[pos:pos + take], self.gamma)
            pos += take
            self.since += take
            self.k += take
            self.grad_evals += 2 * take

    def iterate(self):
        return self.x


class FinitoSolver(BaseSolver):
    """Aggressive table-average method; inverse step alpha*mu*n.

    storage="tables" keeps (phi_i, g_i); storage="combined" keeps only
    p_i = g_i - alpha*mu*phi_i, enough to form the iterate while the step
    size stays constant (table average diagnostics are then unavailable).
    """

    method = "finito"
    init_accesses_all = True

    def __init__(self, problem, alpha, x0=None, storage="tables",
                 first_pass=False):
        super().__init__(problem, x0)
        _require(problem.mu_in_terms and problem.mu > 0,
                 "finito requires canonical per-term strong convexity")
        _require(problem.regularizer.kind == "none", "finito has no prox support")
        if storage not in ("tables", "combined"):
            raise ConfigError(f"unknown finito storage {storage!r}")
        self.alpha = float(alpha)
        self.inv_step = self.alpha * problem.mu * self.n
        self.storage = storage
        self.first_pass = first_pass
        self.seen = 0 if first_pass else self.n
        phi0 = self.x0
        if first_pass:
            self.Phi = np.tile(phi0, (self.n, 1))
            self.G = np.zeros((self.n, self.d))
            self.SPhi = np.zeros(self.d)
            self.SG = np.zeros(self.d)
            if storage == "combined":
                raise ConfigError("first-pass mode needs the two-table storage")
        else:
            vals, G = problem.terms.batch_values_grads(phi0)
            self.G = np.array(G, dtype=float)
            self.Phi = np.tile(phi0, (self.n, 1))
            self.SG = self.G.sum(axis=0)
            self.SPhi = self.Phi.sum(axis=0)
            self.grad_evals += self.n
            if storage == "combined":
                self.P = self.G - self.alpha * problem.mu * self.Phi
                self.SP = self.P.sum(axis=0)
                self.Phi = self.G = None

    def w(self):
        if self.first_pass and self.seen < self.n:
            if self.seen == 0:
                return self.x0.copy()
            denom = self.alpha * self.problem.mu * self.seen
            return self.SPhi / self.seen - self.SG / denom
        if self.storage == "combined":
            return -self.SP / self.inv_step
        return self.SPhi / self.n - self.SG / self.inv_step

    def step(self, j):
        i = j - 1
        w = self.w()
        _, g = self.problem.eval_term(j, w)
        self.grad_evals += 1
        self.k += 1
        if self.first_pass and self.seen < self.n:
            # term j enters the partial sums for the first time
            self.seen += 1
            self.SPhi += w
            self.SG += g
            self.Phi[i] = w
            self.G[i] = g
            return
        if self.storage == "combined":
            p_new = g - self.alpha * self.problem.mu * w
            self.SP += p_new - self.P[i]
            self.P[i] = p_new
        else:
            self.SPhi += w - self.Phi[i]
            self.SG += g - self.G[i]
            self.Phi[i] = w
            self.G[i] = g
        self._refresh_if_due()

    def _refresh_if_due(self):
        if self.k and self.k % (REFRESH_EVERY * self.n) == 0:
            if self.storage == "combined":
                self.SP = self.P.sum(axis=0)
            else:
                self.SPhi = self.Phi.sum(axis=0)
                self.SG = self.G.sum(axis=0)

    def _kernel_epoch(self, indices):
        dense = self._dense()
        if dense is None or self.storage != "tables" or (self.first_pass and self.seen < self.n):
            return False
        A, y, loss_id, mu_in = dense
        idx0 = np.asarray(indices, dtype=np.int64) - 1
        kernels.table_average_epoch(A, y, loss_id, mu_in, self.Phi, self.G,
                                    self.SPhi, self.SG, idx0, self.inv_step)
        self.k += len(idx0)
        self.grad_evals += len(idx0)
        self._refresh_if_due()
        return True

    def phibar(self):
        if self.storage == "combined":
            raise ConfigError("combined storage does not keep the phi table")
        denom = self.seen if (self.first_pass and self.seen < self.n) else self.n
        return self.SPhi / max(denom, 1)

    def iterate(self):
        return self.w()

    def point(self):
        # the convergence statement is about the table average
        if self.storage == "combined":
            return self.w()
        return self.phibar()


class MISOSolver(BaseSolver):
    """Finito update with the conservative inverse step L*n; robust to all
    access orders.  With track_path=True, maintains distances along the
    iterate path (the metric of the robustness analysis) and per-step
    contraction records."""

    method = "miso"
    init_accesses_all = True

    def __init__(self, problem, x0=None, track_path=False):
        super().__init__(problem, x0)
        _require(problem.mu_in_terms, "miso expects the canonical convention")
        _require(problem.regularizer.kind == "none", "miso has no prox support")
        self.inv_step = problem.L * self.n
        phi0 = self.x0
        vals, G = problem.terms.batch_values_grads(phi0)
        self.G = np.array(G, dtype=float)
        self.Phi = np.tile(phi0, (self.n, 1))
        self.SG = self.G.sum(axis=0)
        self.SPhi = self.Phi.sum(axis=0)
        self.grad_evals += self.n
        self.track_path = track_path
        self.cum = 0.0
        self.marks = np.zeros(self.n)
        self._prev_w = None
        self.last_contraction = None  # (||w_new - w||, ||w - phi_j_old||)

    def w(self):
        return self.SPhi / self.n - self.SG / self.inv_step

    def step(self, j):
        i = j - 1
        w = self.w()
        if self.track_path:
            anchor = self.x0 if self._prev_w is None else self._prev_w
            self.cum += float(np.linalg.norm(w - anchor))
            self._prev_w = w
        phi_old = self.Phi[i].copy() if self.track_path else None
        _, g = self.problem.eval_term(j, w)
        self.grad_evals += 1
        self.k += 1
        self.SPhi += w - self.Phi[i]
        self.SG += g - self.G[i]
        self.Phi[i] = w
        self.G[i] = g
        if self.track_path:
            self.marks[i] = self.cum
            w_new = self.w()
            self.last_contraction = (
                float(np.linalg.norm(w_new - w)),
                float(np.linalg.norm(w - phi_old)),
            )
        if self.k % (REFRESH_EVERY * self.n) == 0:
            self.SPhi = self.Phi.sum(axis=0)
            self.SG = self.G.sum(axis=0)

    def path_distance_mean(self):
        """Mean path distance from the current iterate back to each phi_i."""
        if not self.track_path:
            raise ConfigError("construct with track_path=True")
        end = self.cum
        if self._prev_w is not None:
            end = self.cum + float(np.linalg.norm(self.w() - self._prev_w))
        else:
            end = self.cum + float(np.linalg.norm(self.w() - self.x0))
        return float(np.mean(end - self.marks))

    def _kernel_epoch(self, indices):
        dense = self._dense()
        if dense is None or self.track_path:
            return False
        A, y, loss_id, mu_in = dense
        idx0 = np.asarray(indices, dtype=np.int64) - 1
        kernels.table_average_epoch(A, y, loss_id, mu_in, self.Phi, self.G,
                                    self.SPhi, self.SG, idx0, self.inv_step)
        self.k += len(idx0)
        self.grad_evals += len(idx0)
        return True

    def iterate(self):
        return self.w()


class ProxFinitoSolver(BaseSolver):
    """Midpoint method: replaces the chosen term's lower bound by a prox
    solve against the leave-one-out table state."""

    method = "proxfinito"
    init_accesses_all = True

    def __init__(self, problem, x0=None):
        super().__init__(problem, x0)
        _require(problem.mu_in_terms and problem.mu > 0,
                 "prox-finito requires canonical per-term strong convexity")
        _require(problem.regularizer.kind == "none", "prox-finito is non-composite")
        if self.n <= 1:
            raise ConfigError("prox-finito needs n > 1 (eta = mu (n-1) > 0)")
        self.eta = problem.mu * (self.n - 1)
        phi0 = self.x0
        vals, G = problem.terms.batch_values_grads(phi0)
        self.G = np.array(G, dtype=float)
        self.Phi = np.tile(phi0, (self.n, 1))
        self.SG = self.G.sum(axis=0)
        self.SPhi = self.Phi.sum(axis=0)
        self.grad_evals += self.n

    def step(self, j):
        i = j - 1
        self.k += 1
        z = (self.SPhi - self.Phi[i]) / (self.n - 1) - (self.SG - self.G[i]) / self.eta
        phi_new, g_new = prox_term(self.problem, j, self.eta, z)
        self.grad_evals += 1
        self.SPhi += phi_new - self.Phi[i]
        self.SG += g_new - self.G[i]
        self.Phi[i] = phi_new
        self.G[i] = g_new
        if self.k % (REFRESH_EVERY * self.n) == 0:
            self.SPhi = self.Phi.sum(axis=0)
            self.SG = self.G.sum(axis=0)

    def iterate(self):
        return self.SPhi / self.n - self.SG / (self.problem.mu * self.n)


class SDCASolver(BaseSolver):
    """Dual coordinate ascent on explicit-regularizer problems.

    Maintains dual vectors alpha_i (zero-initialized by default) and the
    primal iterate x = -(1/(mu n)) sum_i alpha_i.  The dual objective is
    tracked through per-term conjugate values, so D(alpha) is available at
    every step without touching the oracle.
    """

    method = "sdca"

    def __init__(self, problem, mode="exact", x0=None, alpha0=None):
        super().__init__(problem, x0)
        _require(not problem.mu_in_terms,
                 "sdca needs the explicit-regularizer convention")
        _require(problem.mu > 0, "sdca requires mu > 0")
        _require(problem.regularizer.kind == "l2",
                 "sdca supports a pure l2 regularizer only")
        if mode not in ("exact", "line_search", "constant"):
            raise ConfigError(f"unknown sdca mode {mode!r}")
        self.mode = mode
        self.lam = 1.0 / (problem.mu * self.n)
        self.alpha = np.zeros((self.n, self.d))
        if alpha0 is not None:
            self.alpha[:] = alpha0
        self.x = -self.lam * self.alpha.sum(axis=0)
        self.conj = np.array([problem.terms.conjugate(i, self.alpha[i])
                              for i in range(self.n)])

    def step(self, j):
        i = j - 1
        self.k += 1
        mu_n = 1.0 / self.lam
        if self.mode == "exact":
            z = self.x + self.lam * self.alpha[i]
            phi, g = prox_term(self.problem, j, mu_n, z)
            self.grad_evals += 1
            a_new = g
        else:
            _, u = self.problem.eval_term(j, self.x)
            self.grad_evals += 1
            if self.mode == "constant":
                s = mu_n / (mu_n + self.problem.L)
            else:
                s = self._line_search(i, u)
            a_new = self.alpha[i] + s * (u - self.alpha[i])
        self.x = self.x - self.lam * (a_new - self.alpha[i])
        self.alpha[i] = a_new
        self.conj[i] = self.problem.terms.conjugate(i, a_new)

    def _line_search(self, i, u):
        terms = self.problem.terms
        alpha_old = self.alpha[i]
        diff = u - alpha_old
        mu_n = 1.0 / self.lam

        def obj(s):
            a = alpha_old + s * diff
            c = terms.conjugate(i, a)
            if not np.isfinite(c):
                return 1e300
            shifted = self.x - (s * self.lam) * diff
            return c + 0.5 * mu_n * float(shifted @ shifted)

        res = minimize_scalar(obj, bounds=(0.0, 1.0), method="bounded",
                              options={"xatol": 1e-12})
        return float(res.x)

    def dual_value(self) -> float:
        return float(-np.mean(self.conj) - 0.5 * self.problem.mu * (self.x @ self.x))

    def iterate(self):
        return self.x


class PrimalSDCASolver(BaseSolver):
    """Prox-form twin of exact-mode SDCA.  Stores only the gradient table;
    with duals seeded as alpha_i = f_i'(phi_i^0) the two iterate sequences
    coincide."""

    method = "sdca-primal"
    init_accesses_all = True

    def __init__(self, problem, x0=None):
        super().__init__(problem, x0)
        _require(not problem.mu_in_terms,
                 "primal sdca needs the explicit-regularizer convention")
        _require(problem.mu > 0, "primal sdca requires mu > 0")
        _require(problem.regularizer.kind == "l2",
                 "primal sdca supports a pure l2 regularizer only")
        self.lam = 1.0 / (problem.mu * self.n)
        phi0 = np.zeros(self.d) if x0 is None else self.x0
        vals, G = problem.terms.batch_values_grads(phi0)
        self.G = np.array(G, dtype=float)
        self.SG = self.G.sum(axis=0)
        self.grad_evals += self.n

    def step(self, j):
        i = j - 1
        self.k += 1
        z = -self.lam * (self.SG - self.G[i])
        phi_new, g_new = prox_term(self.problem, j, 1.0 / self.lam, z)
        self.grad_evals += 1
        self.SG += g_new - self.G[i]
        self.G[i] = g_new
        if self.k % (REFRESH_EVERY * self.n) == 0:
            self.SG = self.G.sum(axis=0)

    def dual_value(self) -> float:
        conj = np.array([self.problem.terms.conjugate(i, self.G[i])
                         for i in range(self.n)])
        x = self.iterate()
        return float(-np.mean(conj) - 0.5 * self.problem.mu * (x @ x))

    def iterate(self):
        return -self.lam * self.SG


class JITSparseSAGASolver(BaseSolver):
    """Lazy sparse-update form of the explicit-regularizer saga variant.

    Gradient table entries are scalar loss coefficients; the dense table
    average and the (1 - mu*gamma) scaling are applied per coordinate only
    when that coordinate is next touched, using the closed-form geometric
    catch-up.  Supports h in {none, l2}; matches the dense path to float
    rounding.
    """

    method = "saga"
    init_accesses_all = True

    def __init__(self, problem, gamma, x0=None):
        super().__init__(problem, x0)
        terms = problem.terms
        _require(isinstance(terms, LinearModelTerms) and terms.mu_in == 0.0,
                 "jit saga needs bare linear-model terms")
        _require(problem.regularizer.kind in ("none", "l2"),
                 "jit saga supports none/l2 regularizers only")
        self.gamma = float(gamma)
        self.expl_mu = problem.regularizer.smooth_mu
        import scipy.sparse as sp

        A = terms.A if terms.sparse else sp.csr_matrix(terms.A)
        self.A = A
        self.x = self.x0.copy()
        s = np.asarray(A @ self.x).ravel()
        if terms.loss == "squared":
            self.c = s - terms.y
        else:
            self.c = -terms.y / (1.0 + np.exp(terms.y * s))
        self.Sg = np.asarray(A.T @ self.c).ravel()
        self.grad_evals += self.n
        self.last = np.zeros(self.d, dtype=np.int64)
        self.terms = terms

    def _catch_up(self, cols):
        t = self.k - self.last[cols]
        active = t > 0
        if not np.any(active):
            return
        cols = cols[active]
        t = t[active]
        u = -self.gamma * self.Sg[cols] / self.n
        if self.expl_mu > 0:
            rho = 1.0 - self.gamma * self.expl_mu
            p = -self.Sg[cols] / (self.n * self.expl_mu)
            self.x[cols] = rho**t * (self.x[cols] - p) + p
        else:
            self.x[cols] = self.x[cols] + t * u
        self.last[cols] = self.k

    def step(self, j):
        i = j - 1
        A = self.A
        lo, hi = A.indptr[i], A.indptr[i + 1]
        cols = A.indices[lo:hi]
        vals = A.data[lo:hi]
        self._catch_up(cols)
        s = float(vals @ self.x[cols])
        y = self.terms.y[i]
        if self.terms.loss == "squared":
            cg = s - y
        else:
            cg = -y / (1.0 + np.exp(y * s))
        self.grad_evals += 1
        c_old = self.c[i]
        w = self.x[cols] - self.gamma * ((cg - c_old) * vals + self.Sg[cols] / self.n)
        if self.expl_mu > 0:
            w = w - self.gamma * self.expl_mu * self.x[cols]
        self.x[cols] = w
        self.Sg[cols] += (cg - c_old) * vals
        self.c[i] = cg
        self.k += 1
        self.last[cols] = self.k

    def iterate(self):
        self._catch_up(np.arange(self.d))
        return self.x


# ---------------------------------------------------------------------------
# construction and the runner


def default_step(problem: FiniteSumProblem, method: str) -> float:
    """Theorem-backed default step size for the given method."""
    L = problem.L
    mu = problem.mu
    n = problem.n
    if method in ("sgd", "sag"):
        return 1.0 / L
    if method in ("saga", "saga2var"):
        if mu > 0:
            L_can = L if problem.mu_in_terms else L + mu
            return 1.0 / (2.0 * (mu * n + L_can))
        return 1.0 / (3.0 * L)
    if method == "svrg":
        return 1.0 / (4.0 * L)
    raise ConfigError(f"no step-size default for {method}")


def make_solver(problem: FiniteSumProblem, config: SolverConfig, seed: int = 0,
                x0=None):
    """Build a solver; returns (solver, echoed step size)."""
    m = config.method
    step = config.step
    explicit_step = None if step == "auto" else float(step)

    if m == "sgd":
        gamma = explicit_step if explicit_step is not None else default_step(problem, m)
        solver = SGDSolver(problem, gamma, config.schedule, config.theta, x0)
        return solver, (config.theta if config.schedule == "inv_k" else gamma)
    if m == "sag":
        gamma = explicit_step if explicit_step is not None else default_step(problem, m)
        return SAGSolver(problem, gamma, x0), gamma
    if m in ("saga", "saga2var"):
        gamma = explicit_step if explicit_step is not None else default_step(problem, m)
        if config.jit:
            return JITSparseSAGASolver(problem, gamma, x0), gamma
        if m == "saga2var":
            return SAGA2VarSolver(problem, gamma, x0), gamma
        return SAGASolver(problem, gamma, x0, config.track_average,
                          config.track_phi), gamma
    if m == "svrg":
        gamma = explicit_step if explicit_step is not None else default_step(problem, m)
        return SVRGSolver(problem, gamma, config.svrg_m, config.svrg_xtilde,
                          seed, x0), gamma
    if m == "finito":
        if config.alpha is not None:
            alpha = float(config.alpha)
        elif explicit_step is not None:
            alpha = 1.0 / (explicit_step * problem.mu * problem.n)
        else:
            if not problem.big_data_check(2.0):
                raise ConfigError(
                    "finito default alpha=2 needs the big-data condition with "
                    "beta=2; supply alpha explicitly otherwise")
            alpha = 2.0
        solver = FinitoSolver(problem, alpha, x0, config.finito_storage,
                              config.finito_first_pass)
        return solver, 1.0 / (alpha * problem.mu * problem.n)
    if m == "miso":
        _require(step == "auto", "miso's inverse step L*n is fixed")
        solver = MISOSolver(problem, x0, config.track_path)
        return solver, 1.0 / (problem.L * problem.n)
    if m == "proxfinito":
        _require(step == "auto", "prox-finito has no step-size knob")
        return ProxFinitoSolver(problem, x0), 1.0 / problem.mu / max(problem.n - 1, 1)
    if m == "sdca":
        _require(step == "auto", "sdca has no step-size knob")
        return SDCASolver(problem, config.sdca_mode, x0), 0.0
    if m == "sdca-primal":
        _require(step == "auto", "primal sdca has no step-size knob")
        return PrimalSDCASolver(problem, x0), 0.0
    raise ConfigError(f"unknown method {m!r}")


@dataclass
class TraceRow:
    method: str
    ordering: str
    seed: int
    epoch: int
    grad_evals: int
    wall_time_ns: int
    f_value: float
    suboptimality: float | None
    bound_value: float | None = None
    lyapunov: float | None = None
    step_size: float | None = None


@dataclass
class Trace:
    rows: list
    meta: dict = field(default_factory=dict)


DIVERGENT_COMBOS = {("finito", "cyclic"), ("sag", "cyclic")}


def run(problem: FiniteSumProblem, config: SolverConfig, ordering: str = "randomized",
        epochs: int = 10, seed: int = 0, checkpoint_every: int = 1,
        reference=None, rate_bound_obj=None, lyapunov_fn=None,
        record_average: bool = False, x0=None) -> Trace:
    """Drive a solver for epochs*n steps, checkpointing once per
    `checkpoint_every` epochs (plus the initial state).

    reference: optional (x_star, f_star) pair; enables the suboptimality
    column.  rate_bound_obj: optional RateBound evaluated at the step (or
    epoch) count of each checkpoint.  lyapunov_fn: optional callable
    solver -> float.  record_average evaluates checkpoints at the running
    average iterate (saga only).
    """
    if epochs < 0:
        raise ConfigError("epochs must be >= 0")
    run_problem = problem
    if config.method in ("sdca", "sdca-primal") and problem.mu_in_terms:
        run_problem = problem.to_sdca_convention()
    if (config.method, ordering) in DIVERGENT_COMBOS:
        warnings.warn(
            f"{config.method} is known to diverge under cyclic access; "
            "proceeding anyway", RuntimeWarning)
    if record_average and config.method == "saga":
        config = SolverConfig(**{**config.__dict__, "track_average": True})

    solver, step_size = make_solver(run_problem, config, seed, x0)
    if ordering == "weighted":
        weights = weights_from_lipschitz(run_problem.mu, run_problem.n,
                                         run_problem.lipschitz)
        stream = Ordering("weighted", run_problem.n, seed, weights)
    else:
        stream = Ordering(ordering, run_problem.n, seed)

    f_star = reference[1] if reference is not None else None
    start = time.perf_counter_ns()
    rows = []

    def checkpoint(epoch):
        x = (solver.average_iterate() if record_average and
             hasattr(solver, "average_iterate") else solver.point())
        f_val = run_problem.objective(x)
        sub = None if f_star is None else f_val - f_star
        bound = None
        if rate_bound_obj is not None:
            kk = epoch if rate_bound_obj.per_epoch else epoch * run_problem.n
            bound = rate_bound_obj.bound(kk)
        lyap = None if lyapunov_fn is None else lyapunov_fn(solver)
        rows.append(TraceRow(config.method, ordering, seed, epoch,
                             solver.grad_evals, time.perf_counter_ns() - start,
                             f_val, sub, bound, lyap, step_size))

    checkpoint(0)
    for epoch in range(1, epochs + 1):
        if config.method == "finito" and config.finito_first_pass and epoch == 1:
            first = Ordering("cyclic", run_problem.n, seed)
            solver.run_epoch(first.epoch_indices())
            for _ in range(run_problem.n):
                stream.next_index()  # keep the stream position per-epoch aligned
        else:
            solver.run_epoch(stream.epoch_indices())
        if epoch % checkpoint_every == 0 or epoch == epochs:
            checkpoint(epoch)
    return Trace(rows, {"method": config.method, "ordering": ordering,
                        "seed": seed, "n": run_problem.n, "d": run_problem.d,
                        "step_size": step_size})
