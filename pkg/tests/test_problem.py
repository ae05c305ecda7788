import numpy as np
import pytest

import sumopt as so
from sumopt.problem import LinearModelTerms, NonFiniteError, UndefinedConditionError

from helpers import finite_diff_grad


def test_eval_term_quadratic_examples():
    p = so.quadratic_1d([0.0, 2.0])
    v, g = p.eval_term(2, np.array([0.0]))
    assert v == 2.0
    assert g[0] == -2.0


def test_eval_term_logistic_zero_feature():
    terms = LinearModelTerms(np.zeros((1, 3)), np.array([1.0]), "logistic")
    p = so.FiniteSumProblem(terms, mu=0.0)
    for x in (np.zeros(3), np.array([5.0, -1.0, 2.0])):
        v, g = p.eval_term(1, x)
        assert v == pytest.approx(np.log(2.0), abs=1e-15)
        assert np.all(g == 0)


def test_eval_term_squared_loss_example():
    terms = LinearModelTerms(np.array([[1.0, 0.0]]), np.array([1.0]), "squared")
    p = so.FiniteSumProblem(terms, mu=0.0)
    v, g = p.eval_term(1, np.zeros(2))
    assert v == 0.5
    assert np.allclose(g, [-1.0, 0.0])
    fd = finite_diff_grad(lambda z: p.eval_term(1, z)[0], np.zeros(2))
    assert np.allclose(g, fd, atol=1e-8)


def test_eval_term_errors():
    p = so.quadratic_1d([0.0, 2.0])
    with pytest.raises(IndexError):
        p.eval_term(0, np.array([0.0]))
    with pytest.raises(IndexError):
        p.eval_term(3, np.array([0.0]))
    with pytest.raises(NonFiniteError):
        p.eval_term(1, np.array([np.nan]))
    with pytest.raises(NonFiniteError):
        p.eval_full(np.array([np.inf]))


def test_eval_full_examples():
    p = so.quadratic_1d([0.0, 2.0])
    v, g = p.eval_full(np.array([1.0]))
    assert v == pytest.approx(0.5, abs=1e-15)
    assert g[0] == pytest.approx(0.0, abs=1e-15)

    single = so.quadratic_1d([0.7])
    x = np.array([0.3])
    assert single.eval_full(x)[0] == single.eval_term(1, x)[0]
    assert single.eval_full(x)[1] == single.eval_term(1, x)[1]

    wc = so.worst_case_problem(2)
    assert wc.objective(np.zeros(2)) == pytest.approx(1.0)


def test_eval_full_mean_identity():
    p = so.make_logistic(30, 4, mu=0.2, seed=1)
    rng = np.random.default_rng(2)
    for _ in range(5):
        x = rng.standard_normal(4)
        _, g = p.eval_full(x)
        grads = np.stack([p.eval_term(i, x)[1] for i in range(1, p.n + 1)])
        assert np.array_equal(g, np.mean(grads, axis=0))


def test_gradient_consistency_finite_differences():
    problems = [
        so.make_logistic(20, 5, mu=0.3, seed=4),
        so.make_ridge_least_squares(20, 5, mu=0.1, seed=5),
        so.quadratic_1d(np.linspace(-2, 2, 7)),
        so.worst_case_problem(6),
    ]
    rng = np.random.default_rng(0)
    for p in problems:
        for _ in range(50):
            i = int(rng.integers(1, p.n + 1))
            x = rng.standard_normal(p.d)
            _, g = p.eval_term(i, x)
            fd = finite_diff_grad(lambda z: p.eval_term(i, z)[0], x, h=1e-6)
            denom = max(1.0, np.linalg.norm(g))
            assert np.linalg.norm(g - fd) / denom < 1e-5


def test_estimate_constants_closed_forms():
    a = np.array([[2.0, 0.0]])  # ||a||^2 = 4
    logi = so.FiniteSumProblem(LinearModelTerms(a, np.array([1.0]), "logistic", mu_in=0.1),
                               mu=0.1)
    rep = logi.estimate_constants(samples=50, seed=0)
    assert rep.L_i[0] == pytest.approx(1.1)
    assert rep.ok

    sq = so.FiniteSumProblem(LinearModelTerms(np.array([[0.6, 0.8]]),
                                              np.array([0.0]), "squared"), mu=0.0)
    assert sq.estimate_constants(samples=20).L_i[0] == pytest.approx(1.0)

    ridge_only = so.FiniteSumProblem(
        LinearModelTerms(np.zeros((3, 2)), np.zeros(3), "squared", mu_in=0.5), mu=0.5)
    rep = ridge_only.estimate_constants(samples=20)
    assert rep.L == pytest.approx(0.5)
    assert rep.L_bar == pytest.approx(0.5)


def test_declared_lipschitz_never_violated():
    rng = np.random.default_rng(7)
    for p in (so.make_logistic(15, 4, mu=0.05, seed=8),
              so.make_ridge_least_squares(15, 4, mu=0.05, seed=9)):
        for _ in range(1000):
            i = int(rng.integers(1, p.n + 1))
            x = rng.standard_normal(p.d)
            y = rng.standard_normal(p.d)
            gx = p.eval_term(i, x)[1]
            gy = p.eval_term(i, y)[1]
            assert (np.linalg.norm(gx - gy)
                    <= p.lipschitz[i - 1] * np.linalg.norm(x - y) * (1 + 1e-9) + 1e-12)


def test_big_data_check():
    p = so.make_ridge_least_squares(100, 3, mu=1.0, seed=0)
    # force exact constants for the example: L=10, mu=1, n=100
    p.lipschitz = np.full(100, 10.0)
    assert p.big_data_check(2.0) is True
    p2 = so.make_ridge_least_squares(10, 3, mu=1.0, seed=0)
    p2.lipschitz = np.full(10, 10.0)
    assert p2.big_data_check(2.0) is False
    nonsc = so.make_underdetermined_least_squares(5, 9, seed=1)
    with pytest.raises(UndefinedConditionError):
        nonsc.big_data_check(2.0)


def test_worst_case_instance():
    wc = so.worst_case_problem(2)
    xs, fs = so.reference_minimizer(wc)
    assert fs == pytest.approx(0.5)
    assert np.allclose(xs, 0.5)

    wc1 = so.worst_case_problem(1)
    v, _ = wc1.eval_term(1, np.array([0.5]))
    assert v == pytest.approx(0.25)
    xs1, fs1 = so.reference_minimizer(wc1)
    assert fs1 == pytest.approx(0.25)

    # zero steps from w=0: suboptimality n/4
    for n in (1, 2, 5):
        wcn = so.worst_case_problem(n)
        f0 = wcn.objective(np.zeros(n))
        assert f0 - n / 4 == pytest.approx(n / 4)


def test_sdca_convention_round_trip_objective():
    p = so.make_logistic(12, 3, mu=0.4, seed=3)
    q = p.to_sdca_convention()
    rng = np.random.default_rng(0)
    for _ in range(5):
        x = rng.standard_normal(3)
        assert q.objective(x) == pytest.approx(p.objective(x), rel=1e-12)
        assert np.allclose(q.eval_full(x)[1], p.eval_full(x)[1], atol=1e-12)
    assert q.L == pytest.approx(p.L - p.mu)


def test_libsvm_parser(tmp_path):
    path = tmp_path / "toy.libsvm"
    path.write_text("+1 1:0.5 3:2.0\n-1 2:1.5\n0 1:1.0\n")
    X, y = so.datasets.parse_libsvm(path.read_text().splitlines(), loss="logistic")
    assert X.shape == (3, 3)
    assert list(y) == [1.0, -1.0, -1.0]  # 0 maps to -1 for logistic
    assert X[0, 0] == 0.5 and X[0, 2] == 2.0 and X[1, 1] == 1.5

    X2, y2 = so.datasets.parse_libsvm(["2.5 1:1.0", "-3 2:0.5"], loss="squared")
    assert list(y2) == [2.5, -3.0]

    p = so.load_libsvm(path, loss="logistic", l2=0.1)
    assert p.n == 3 and p.d == 3 and p.mu == 0.1
    p_std = so.load_libsvm(path, loss="logistic", l2=0.1, standardize=True)
    A = p_std.terms.A
    assert np.allclose(A.mean(axis=0), 0.0, atol=1e-12)
