"""Objective oracles with certified constants."""

from pageopt.core.problems.base import FiniteSumProblem
from pageopt.core.problems.logistic import (
    NonconvexLogistic,
    load_logistic_csv,
    make_nonconvex_logistic,
    make_synthetic_logistic_data,
)
from pageopt.core.problems.quadratic import (
    HeterogeneousQuadratic,
    SharedCurvatureQuadratic,
    make_heterogeneous_quadratic,
    make_shared_curvature_quadratic,
)
from pageopt.core.problems.registry import build_problem
from pageopt.core.problems.streaming import StreamingView, streaming_view

__all__ = [
    "FiniteSumProblem",
    "SharedCurvatureQuadratic",
    "HeterogeneousQuadratic",
    "NonconvexLogistic",
    "StreamingView",
    "make_shared_curvature_quadratic",
    "make_heterogeneous_quadratic",
    "make_nonconvex_logistic",
    "make_synthetic_logistic_data",
    "load_logistic_csv",
    "streaming_view",
    "build_problem",
]
