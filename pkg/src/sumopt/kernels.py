"""Jitted epoch loops for dense linear-model problems.

Each solver's inner loop over one epoch of indices is available here as a
numba kernel operating on raw arrays.  The generic per-step Python path in
`solvers` is the reference implementation and the fallback; set
SUMOPT_NUMBA=0 to force it.  Kernels keep the same per-coordinate update
order as the generic path, so the two agree to float rounding (dot products
are the only reassociated reductions).
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a normal dependency
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


def numba_enabled() -> bool:
    """Kernels are used when numba imports and SUMOPT_NUMBA != 0."""
    return HAS_NUMBA and os.environ.get("SUMOPT_NUMBA", "1") != "0"


@njit(cache=True, inline="always")
def _coeff(loss_id, s, y):
    # scalar derivative of the bare loss at margin s
    if loss_id == 0:
        return s - y
    return -y / (1.0 + np.exp(y * s))


@njit(cache=True)
def sgd_epoch(A, y, loss_id, mu_in, x, idx, gamma, theta, k0):
    n, d = A.shape
    for t in range(idx.shape[0]):
        j = idx[t]
        s = 0.0
        for c in range(d):
            s += A[j, c] * x[c]
        cg = _coeff(loss_id, s, y[j])
        g = gamma if theta <= 0.0 else theta / (k0 + t + 1.0)
        for c in range(d):
            x[c] -= g * (cg * A[j, c] + mu_in * x[c])


@njit(cache=True)
def sag_epoch(A, y, loss_id, mu_in, x, G, S, idx, gamma):
    n, d = A.shape
    for t in range(idx.shape[0]):
        j = idx[t]
        s = 0.0
        for c in range(d):
            s += A[j, c] * x[c]
        cg = _coeff(loss_id, s, y[j])
        for c in range(d):
            gnew = cg * A[j, c] + mu_in * x[c]
            gold = G[j, c]
            x[c] -= gamma * ((gnew - gold) / n + S[c] / n)
            S[c] += gnew - gold
            G[j, c] = gnew


@njit(cache=True)
def saga_epoch(A, y, loss_id, mu_in, x, G, S, idx, gamma,
               expl_mu, l1_lam, avg_sum, do_avg):
    n, d = A.shape
    for t in range(idx.shape[0]):
        j = idx[t]
        s = 0.0
        for c in range(d):
            s += A[j, c] * x[c]
        cg = _coeff(loss_id, s, y[j])
        for c in range(d):
            gnew = cg * A[j, c] + mu_in * x[c]
            gold = G[j, c]
            w = x[c] - gamma * (gnew - gold + S[c] / n)
            if expl_mu > 0.0:
                w -= gamma * expl_mu * x[c]
            if l1_lam > 0.0:
                thr = l1_lam * gamma
                if w > thr:
                    w -= thr
                elif w < -thr:
                    w += thr
                else:
                    w = 0.0
            S[c] += gnew - gold
            G[j, c] = gnew
            x[c] = w
        if do_avg:
            for c in range(d):
                avg_sum[c] += x[c]


@njit(cache=True)
def svrg_chunk(A, y, loss_id, mu_in, x, xt, gfull, idx, gamma):
    n, d = A.shape
    for t in range(idx.shape[0]):
        j = idx[t]
        s = 0.0
        st = 0.0
        for c in range(d):
            s += A[j, c] * x[c]
            st += A[j, c] * xt[c]
        cg = _coeff(loss_id, s, y[j])
        ct = _coeff(loss_id, st, y[j])
        for c in range(d):
            gx = cg * A[j, c] + mu_in * x[c]
            gt = ct * A[j, c] + mu_in * xt[c]
            x[c] -= gamma * (gx - gt + gfull[c])


@njit(cache=True)
def table_average_epoch(A, y, loss_id, mu_in, Phi, G, SPhi, SG, idx, inv_step):
    # shared loop for the two phi-table methods: w is the current table
    # minimizer, the chosen slot moves to w, its gradient is refreshed.
    # inv_step = alpha*mu*n (aggressive) or L*n (conservative).
    n, d = A.shape
    w = np.empty(d)
    for t in range(idx.shape[0]):
        j = idx[t]
        for c in range(d):
            w[c] = SPhi[c] / n - SG[c] / inv_step
        s = 0.0
        for c in range(d):
            s += A[j, c] * w[c]
        cg = _coeff(loss_id, s, y[j])
        for c in range(d):
            gnew = cg * A[j, c] + mu_in * w[c]
            SPhi[c] += w[c] - Phi[j, c]
            SG[c] += gnew - G[j, c]
            Phi[j, c] = w[c]
            G[j, c] = gnew
