"""PAGE gradient estimator.

Each step either recomputes a fresh size-b minibatch gradient (probability
p) or corrects the previous estimate with a size-b' gradient difference
taken on one shared sample. The estimator is a small state machine so
that the optimizer loop and the verifier can drive it independently.
"""

import copy
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from pageopt.core.linalg import RandomSource, Vector, bernoulli
from pageopt.core.problems.base import FiniteSumProblem, IndexArray
from pageopt.core.utils.errors import (
    DimensionMismatchError,
    InvalidParameterError,
    MissingConstantError,
)
from pageopt.core.utils.json_schema import Branch
from pageopt.core.utils.logging import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class EstimatorParams:
    """Minibatch sizes and switch probability (held constant over a run)."""
    b: int
    b_prime: int
    p: float

    def __post_init__(self) -> None:
        if self.b_prime < 1 or self.b_prime > self.b:
            raise InvalidParameterError(f"Need 1 <= b_prime <= b, got b={self.b}, b_prime={self.b_prime}")
        if not 0.0 < self.p <= 1.0:
            raise InvalidParameterError(f"p must lie in (0, 1], got {self.p}")

    def validate_for(self, problem: FiniteSumProblem) -> None:
        """
        Raises:
            InvalidParameterError: If b exceeds the component count of a finite problem
        """
        if problem.n is not None and self.b > problem.n:
            raise InvalidParameterError(f"b={self.b} exceeds n={problem.n}")

    def uses_full_gradient(self, problem: FiniteSumProblem) -> bool:
        """True when the big branch is the exact full gradient (b = n, finite problem)."""
        return problem.n is not None and self.b == problem.n


@dataclass
class EstimatorState:
    """Current estimate g, the point it was formed at, and the call counters."""
    g: Vector
    x_prev: Vector
    oracle_calls: int = 0
    paper_calls: int = 0
    big_steps: int = 0
    small_steps: int = 0
    branch: Branch = Branch.INIT
    branch_history: Optional[List[bool]] = field(default=None)

    def copy(self) -> "EstimatorState":
        clone = copy.copy(self)
        if self.branch_history is not None:
            clone.branch_history = list(self.branch_history)
        return clone


class PageEstimator:
    """Drives the estimator recursion for one problem and one parameter set."""

    def __init__(self, problem: FiniteSumProblem, params: EstimatorParams, record_branches: bool = False):
        params.validate_for(problem)
        self.problem = problem
        self.params = params
        self.record_branches = record_branches
        self.full_big_branch = params.uses_full_gradient(problem)
        self.logger = get_logger(f"{__name__}.PageEstimator")

    def big_estimate(self, x: Vector, rng: Optional[RandomSource] = None) -> Vector:
        """
        Fresh estimate at x: the exact gradient when b = n, else a size-b minibatch mean.

        Raises:
            InvalidParameterError: If a minibatch is needed and no rng is given
        """
        if self.full_big_branch:
            return self.problem.full_gradient(x)
        if rng is None:
            raise InvalidParameterError("A minibatch big step needs a random source")
        indices = self.problem.draw_indices(rng, self.params.b)
        return self.problem.minibatch_gradient(indices, x)

    def small_estimate(self, g: Vector, x_prev: Vector, x_new: Vector, indices: IndexArray) -> Vector:
        """g corrected by the minibatch gradient difference over one shared index set."""
        return g + self.problem.minibatch_difference(indices, x_new, x_prev)

    def init(self, x0: Vector, rng: RandomSource) -> EstimatorState:
        """g0 = mean of b component gradients at x0 (the exact gradient when b = n)."""
        g = self.big_estimate(x0, rng)
        b = self.params.b
        return EstimatorState(
            g=g,
            x_prev=np.array(x0, dtype=np.float64),
            oracle_calls=b,
            paper_calls=b,
            branch=Branch.INIT,
            branch_history=[] if self.record_branches else None,
        )

    def step(self, state: EstimatorState, x_new: Vector, rng: RandomSource) -> EstimatorState:
        """
        Advance the estimate to x_new, mutating and returning ``state``.

        The branch coin is drawn from ``rng`` before any index draw.

        Raises:
            DimensionMismatchError: If x_new does not match the problem dimension
        """
        if x_new.shape != state.x_prev.shape:
            raise DimensionMismatchError(
                f"x_new has shape {x_new.shape}, estimator holds {state.x_prev.shape}"
            )
        params = self.params
        if bernoulli(rng, params.p):
            state.g = self.big_estimate(x_new, rng)
            state.oracle_calls += params.b
            state.paper_calls += params.b
            state.big_steps += 1
            state.branch = Branch.BIG
        else:
            indices = self.problem.draw_indices(rng, params.b_prime)
            state.g = self.small_estimate(state.g, state.x_prev, x_new, indices)
            state.oracle_calls += 2 * params.b_prime
            state.paper_calls += params.b_prime
            state.small_steps += 1
            state.branch = Branch.SMALL
        if state.branch_history is not None:
            state.branch_history.append(state.branch is Branch.BIG)
        state.x_prev = np.array(x_new, dtype=np.float64)
        return state

    def conditional_bias(self, state: EstimatorState, x_new: Vector) -> Vector:
        """
        E[g_next | g, x_prev, x_new] - grad f(x_new), in closed form.

        Both branches are unbiased for their targets, so the bias is
        (1 - p) (g - grad f(x_prev)). Uses analytic gradients only.
        """
        if not self.problem.has_analytic_gradient:
            raise MissingConstantError("conditional_bias needs an analytic full gradient")
        return (1.0 - self.params.p) * (state.g - self.problem.full_gradient(state.x_prev))


def init(problem: FiniteSumProblem, params: EstimatorParams, x0: Vector, rng: RandomSource) -> EstimatorState:
    """Initial estimator state at x0."""
    return PageEstimator(problem, params).init(x0, rng)


def step(
    state: EstimatorState,
    problem: FiniteSumProblem,
    params: EstimatorParams,
    x_new: Vector,
    rng: RandomSource,
) -> EstimatorState:
    """One estimator step; returns a new state and leaves ``state`` untouched."""
    return PageEstimator(problem, params).step(state.copy(), x_new, rng)


def conditional_bias(
    state: EstimatorState, problem: FiniteSumProblem, x_new: Vector, params: EstimatorParams
) -> Vector:
    """Closed-form conditional bias of the next estimate."""
    return PageEstimator(problem, params).conditional_bias(state, x_new)
