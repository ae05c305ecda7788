"""Independent numeric oracles used to derive expected values in tests.

These deliberately avoid the library's own closed forms: gradients come
from central finite differences, prox results from grid search with
iterative refinement.
"""

import numpy as np


def finite_diff_grad(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for c in range(x.size):
        e = np.zeros_like(x)
        e[c] = h
        g[c] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def grid_argmin_1d(fun, lo, hi, steps=2001, rounds=4):
    """argmin of a scalar function by repeated grid refinement."""
    for _ in range(rounds):
        xs = np.linspace(lo, hi, steps)
        vals = np.array([fun(x) for x in xs])
        i = int(np.argmin(vals))
        lo = xs[max(i - 1, 0)]
        hi = xs[min(i + 1, steps - 1)]
    return 0.5 * (lo + hi)


def grid_argmin_2d(fun, lo, hi, steps=101, rounds=4):
    """argmin over a square [lo,hi]^2 by repeated grid refinement."""
    lo = np.array([lo, lo], dtype=float)
    hi = np.array([hi, hi], dtype=float)
    for _ in range(rounds):
        xs = np.linspace(lo[0], hi[0], steps)
        ys = np.linspace(lo[1], hi[1], steps)
        best = None
        for a in xs:
            for b in ys:
                v = fun(np.array([a, b]))
                if best is None or v < best[0]:
                    best = (v, a, b)
        _, a, b = best
        span_x = (hi[0] - lo[0]) / (steps - 1)
        span_y = (hi[1] - lo[1]) / (steps - 1)
        lo = np.array([a - span_x, b - span_y])
        hi = np.array([a + span_x, b + span_y])
    return 0.5 * (lo + hi)


def prox_grid_oracle(h_fun, gamma, v, radius=None, **kw):
    """Componentwise-separable prox by 1-D grid search per coordinate."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    r = radius if radius is not None else np.abs(v).max() + 3.0
    out = np.empty_like(v)
    for c, vc in enumerate(v):
        out[c] = grid_argmin_1d(
            lambda t: h_fun(t) + 0.5 * gamma * (t - vc) ** 2, vc - r, vc + r, **kw)
    return out
