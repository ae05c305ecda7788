"""Fast incremental gradient methods for finite-sum convex optimization."""

from .datasets import (
    load_libsvm,
    make_logistic,
    make_ridge_least_squares,
    make_sparse_logistic,
    make_underdetermined_least_squares,
    quadratic_1d,
    worst_case_problem,
)
from .diagnostics import (
    HypothesisViolation,
    RateBound,
    lyapunov,
    rate_bound,
    reference_minimizer,
    saga_constants_check,
)
from .ordering import Ordering, weights_from_lipschitz
from .problem import (
    FiniteSumProblem,
    LinearModelTerms,
    NonFiniteError,
    Quadratic1DTerms,
    UndefinedConditionError,
    WorstCaseTerms,
)
from .prox import Regularizer, prox, prox_conjugate, prox_term, soft_threshold
from .solvers import (
    METHODS,
    ConfigError,
    SolverConfig,
    Trace,
    make_solver,
    run,
)

__version__ = "0.1.0"
