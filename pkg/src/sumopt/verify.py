"""Numeric verification catalog for the convexity inequalities and the
supporting scalar/vector lemmas, run against the problem oracles.

Every inequality is written as lhs <= rhs; `slack = rhs - lhs` must stay
above -1e-9 after scaling both sides by max(1, |lhs|, |rhs|).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import make_logistic, make_ridge_least_squares, quadratic_1d

SLACK_TOL = 1e-9

INEQUALITY_TAGS = (
    "convexity_lb",     # f(y) >= f(x) + <f'(x), y-x> + (mu/2)||x-y||^2
    "lipschitz_ub",     # f(y) <= f(x) + <f'(x), y-x> + (L/2)||x-y||^2
    "strong_ub",        # f(y) <= f(x) + <f'(x), y-x> + ||df||^2/(2 mu)
    "lipschitz_lb",     # f(y) >= f(x) + <f'(x), y-x> + ||df||^2/(2L)
    "ip_smooth",        # <df, x-y> >= ||df||^2 / L
    "ip_strong",        # <df, x-y> >= mu ||x-y||^2
    "tight_ip",         # <df, x-y> >= mu L/(mu+L)||x-y||^2 + ||df||^2/(mu+L)
    "full_strong_lb",   # combined lower bound, needs L > mu
    "contraction",      # ||x-y+t(f'(y)-f'(x))|| <= max(|1-tL|,|1-t mu|)||x-y||
)

LEMMA_TAGS = (
    "squared_triangle",
    "exp_log",
    "bernoulli",
    "root_bernoulli",
    "upper_bernoulli",
    "variance_decomposition",
)


@dataclass
class InequalityCase:
    tag: str
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def normalized_slack(self) -> float:
        return self.slack / max(1.0, abs(self.lhs), abs(self.rhs))

    @property
    def ok(self) -> bool:
        return self.normalized_slack >= -SLACK_TOL


def check_inequality(tag: str, value_grad, x, y, mu: float, L: float,
                     t: float | None = None) -> InequalityCase:
    """Evaluate one catalog inequality through the given (value, gradient)
    oracle at the pair (x, y)."""
    if tag not in INEQUALITY_TAGS:
        raise KeyError(f"unknown inequality tag {tag!r}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    fx, gx = value_grad(x)
    fy, gy = value_grad(y)
    return _case(tag, fx, gx, fy, gy, x, y, mu, L, t)


def _case(tag, fx, gx, fy, gy, x, y, mu, L, t):
    df = gx - gy
    dx = x - y
    ip = float(gx @ dx - gy @ dx)
    dsq = float(dx @ dx)
    gsq = float(df @ df)
    lin = fx + float(gx @ (y - x))

    if tag == "convexity_lb":
        return InequalityCase(tag, lin + 0.5 * mu * dsq, fy)
    if tag == "lipschitz_ub":
        return InequalityCase(tag, fy, lin + 0.5 * L * dsq)
    if tag == "strong_ub":
        if mu <= 0:
            raise ValueError("strong_ub needs mu > 0")
        return InequalityCase(tag, fy, lin + gsq / (2.0 * mu))
    if tag == "lipschitz_lb":
        return InequalityCase(tag, lin + gsq / (2.0 * L), fy)
    if tag == "ip_smooth":
        return InequalityCase(tag, gsq / L, ip)
    if tag == "ip_strong":
        return InequalityCase(tag, mu * dsq, ip)
    if tag == "tight_ip":
        return InequalityCase(tag, mu * L / (mu + L) * dsq + gsq / (mu + L), ip)
    if tag == "full_strong_lb":
        if L - mu <= 1e-12:
            raise ValueError("full_strong_lb needs L > mu")
        rhs = (fy + float(gy @ dx) + gsq / (2.0 * (L - mu))
               + mu * L / (2.0 * (L - mu)) * dsq
               + mu / (L - mu) * float(df @ (y - x)))
        return InequalityCase(tag, rhs, fx)
    # contraction
    tt = 1.0 / L if t is None else t
    lhs = float(np.linalg.norm(dx + tt * (gy - gx)))
    rhs = max(abs(1.0 - tt * L), abs(1.0 - tt * mu)) * float(np.sqrt(dsq))
    return InequalityCase("contraction", lhs, rhs)


def check_pair(value_grad, x, y, mu, L, t, tags=INEQUALITY_TAGS):
    """All applicable catalog inequalities on one (x, y) pair."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    fx, gx = value_grad(x)
    fy, gy = value_grad(y)
    cases = []
    for tag in tags:
        if tag in ("strong_ub", "ip_strong", "tight_ip") and mu <= 0:
            continue
        if tag == "full_strong_lb" and L - mu <= 1e-12:
            continue
        cases.append(_case(tag, fx, gx, fy, gy, x, y, mu, L, t))
    return cases


# ---------------------------------------------------------------------------
# lemmas


def check_lemma(tag: str, **kw) -> dict:
    """Numeric verification of one scalar/vector lemma; returns a report
    dict with lhs, rhs, slack (rhs - lhs where the claim is lhs <= rhs)."""
    if tag == "squared_triangle":
        a, b, beta = np.asarray(kw["a"], float), np.asarray(kw["b"], float), kw["beta"]
        if beta <= 0:
            raise ValueError("beta must be positive")
        s = a + b
        lhs = float(s @ s)
        rhs = (1.0 + beta) * float(a @ a) + (1.0 + 1.0 / beta) * float(b @ b)
    elif tag == "exp_log":
        # exp(1+x) >= 1+x for all x; log(1+x) <= 1+x for x > -1.
        # reported slack is the tighter of the two claims.
        xv = float(kw["x"])
        slack_exp = np.exp(1.0 + xv) - (1.0 + xv)
        slack_log = (1.0 + xv) - np.log1p(xv) if xv > -1.0 else np.inf
        lhs = 0.0
        rhs = min(slack_exp, slack_log)
    elif tag == "bernoulli":
        alpha, k = float(kw["alpha"]), int(kw["k"])
        if not 0 <= alpha < 1 or k < 0:
            raise ValueError("need alpha in [0,1) and integer k >= 0")
        lhs = 1.0 - k * alpha
        rhs = (1.0 - alpha) ** k
    elif tag == "root_bernoulli":
        alpha, r = float(kw["alpha"]), float(kw["r"])
        if alpha > 1 or not 0 < r < 1:
            raise ValueError("need alpha <= 1 and r in (0,1)")
        lhs = (1.0 - alpha) ** r
        rhs = 1.0 - r * alpha
    elif tag == "upper_bernoulli":
        alpha, k = float(kw["alpha"]), float(kw["k"])
        if alpha > 1 or k < 0:
            raise ValueError("need alpha <= 1 and k >= 0")
        lhs = (1.0 - alpha) ** k
        rhs = np.exp(-k * alpha)
    elif tag == "variance_decomposition":
        X = np.asarray(kw["samples"], float)  # equally likely rows
        y = np.asarray(kw["y"], float)
        mean = X.mean(axis=0)
        lhs = float(np.mean(np.einsum("ij,ij->i", X - y, X - y)))
        rhs = float((y - mean) @ (y - mean)) + float(
            np.mean(np.einsum("ij,ij->i", X - mean, X - mean)))
        slack = rhs - lhs
        return {"tag": tag, "lhs": lhs, "rhs": rhs, "slack": slack,
                "ok": abs(slack) <= SLACK_TOL * max(1.0, abs(lhs), abs(rhs))}
    else:
        raise KeyError(f"unknown lemma tag {tag!r}")
    slack = rhs - lhs
    return {"tag": tag, "lhs": lhs, "rhs": rhs, "slack": slack,
            "ok": slack >= -SLACK_TOL * max(1.0, abs(lhs), abs(rhs))}


# ---------------------------------------------------------------------------
# full catalog over the standard instance classes


def catalog_instances(seed=0):
    """(name, problem) instance classes the catalog runs on."""
    rng = np.random.default_rng(seed)
    quad = quadratic_1d(rng.normal(size=12), curvatures=rng.uniform(0.5, 3.0, 12))
    ridge = make_ridge_least_squares(n=40, d=8, mu=0.05, seed=seed + 1,
                                     normalize_rows=False)
    logi = make_logistic(n=40, d=8, mu=0.05, seed=seed + 2)
    return [("quadratic1d", quad), ("ridge", ridge), ("logistic", logi)]


def run_inequalities(pairs=1000, seed=0, scale=2.0):
    """Catalog inequalities on `pairs` random pairs per instance class,
    alternating between whole-objective and single-term oracles."""
    rng = np.random.default_rng(seed)
    cases = []
    for name, problem in catalog_instances(seed):
        for p in range(pairs):
            x = scale * rng.standard_normal(problem.d)
            y = scale * rng.standard_normal(problem.d)
            t = rng.uniform(0.0, 3.0 / max(problem.mu, 1e-3))
            if p % 2 == 0:
                mu, L = problem.mu, problem.L
                vg = lambda z: problem.eval_full(z)
            else:
                i = int(rng.integers(1, problem.n + 1))
                mu = problem.mu if problem.mu_in_terms else 0.0
                L = float(problem.lipschitz[i - 1])
                vg = lambda z, i=i: problem.eval_term(i, z)
            for case in check_pair(vg, x, y, mu, L, t):
                cases.append((name, case))
    return cases


def run_lemma_suite(samples=200, seed=0):
    rng = np.random.default_rng(seed)
    reports = []
    for _ in range(samples):
        d = int(rng.integers(1, 8))
        reports.append(check_lemma("squared_triangle",
                                   a=rng.standard_normal(d),
                                   b=rng.standard_normal(d),
                                   beta=float(rng.uniform(0.05, 20.0))))
        reports.append(check_lemma("exp_log", x=float(rng.uniform(-0.99, 10.0))))
        reports.append(check_lemma("bernoulli",
                                   alpha=float(rng.uniform(0.0, 0.999)),
                                   k=int(rng.integers(0, 200))))
        reports.append(check_lemma("root_bernoulli",
                                   alpha=float(rng.uniform(-5.0, 1.0)),
                                   r=float(rng.uniform(0.01, 0.99))))
        reports.append(check_lemma("upper_bernoulli",
                                   alpha=float(rng.uniform(-2.0, 1.0)),
                                   k=float(rng.integers(0, 200))))
        k = int(rng.integers(2, 10))
        reports.append(check_lemma("variance_decomposition",
                                   samples=rng.standard_normal((k, 3)),
                                   y=rng.standard_normal(3)))
    return reports


def run_all(pairs=1000, seed=0, out=print):
    """Full catalog; returns True iff every case passes."""
    cases = run_inequalities(pairs, seed)
    worst: dict = {}
    bad = 0
    for name, case in cases:
        key = (name, case.tag)
        cur = worst.get(key)
        if cur is None or case.normalized_slack < cur:
            worst[key] = case.normalized_slack
        if not case.ok:
            bad += 1
    for (name, tag), slack in sorted(worst.items()):
        status = "ok" if slack >= -SLACK_TOL else "VIOLATED"
        out(f"{name:12s} {tag:16s} min slack {slack: .3e}  {status}")
    reports = run_lemma_suite(seed=seed)
    lemma_bad = [r for r in reports if not r["ok"]]
    for tag in LEMMA_TAGS:
        slacks = [r["slack"] for r in reports if r["tag"] == tag]
        status = "ok" if all(r["ok"] for r in reports if r["tag"] == tag) else "VIOLATED"
        out(f"{'lemmas':12s} {tag:24s} min slack {min(slacks): .3e}  {status}")
    ok = bad == 0 and not lemma_bad
    out(f"verify: {len(cases)} inequality cases, {len(reports)} lemma cases, "
        f"{bad + len(lemma_bad)} violations")
    return ok
