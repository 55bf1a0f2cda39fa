"""Build problem instances from a named family and generator parameters."""

from typing import Any, Callable, Dict

from pageopt.core.linalg import RandomSource
from pageopt.core.problems.base import FiniteSumProblem
from pageopt.core.problems.logistic import (
    load_logistic_csv,
    make_nonconvex_logistic,
    make_synthetic_logistic_data,
)
from pageopt.core.problems.quadratic import (
    make_heterogeneous_quadratic,
    make_shared_curvature_quadratic,
)
from pageopt.core.utils.errors import InvalidParameterError
from pageopt.core.utils.json_schema import ProblemSpec
from pageopt.core.utils.logging import get_logger

logger = get_logger(__name__)

DEFAULT_PARAMS: Dict[str, Dict[str, Any]] = {
    "shared_quadratic": {"d": 10, "n": 100, "spread": 1.0, "condition": 10.0, "delta0": 1.0},
    "hetero_quadratic": {"d": 10, "n": 100, "condition": 10.0, "heterogeneity": 0.5, "delta0": 1.0},
    "logistic": {"d": 10, "n": 200, "noise": 0.1, "lam": 0.1},
}


def _build_shared(rng: RandomSource, params: Dict[str, Any]) -> FiniteSumProblem:
    return make_shared_curvature_quadratic(rng, **params)


def _build_hetero(rng: RandomSource, params: Dict[str, Any]) -> FiniteSumProblem:
    return make_heterogeneous_quadratic(rng, **params)


def _build_logistic(rng: RandomSource, params: Dict[str, Any]) -> FiniteSumProblem:
    params = dict(params)
    lam = params.pop("lam", 0.1)
    path = params.pop("path", None)
    if path is not None:
        features, labels = load_logistic_csv(path)
    else:
        features, labels = make_synthetic_logistic_data(rng, **params)
    return make_nonconvex_logistic(features, labels, lam)


_BUILDERS: Dict[str, Callable[[RandomSource, Dict[str, Any]], FiniteSumProblem]] = {
    "shared_quadratic": _build_shared,
    "hetero_quadratic": _build_hetero,
    "logistic": _build_logistic,
}


def build_problem(spec: ProblemSpec) -> FiniteSumProblem:
    """
    Instantiate the problem a ProblemSpec describes.

    Missing generator parameters take the family defaults; the instance is
    drawn from ``RandomSource(spec.seed)``, so equal specs give equal problems.

    Raises:
        InvalidParameterError: On an unknown generator parameter
    """
    params = {**DEFAULT_PARAMS[spec.family], **spec.params}
    if spec.family == "logistic" and "path" in spec.params:
        params.pop("d", None)
        params.pop("n", None)
        params.pop("noise", None)
    try:
        problem = _BUILDERS[spec.family](RandomSource(spec.seed), params)
    except TypeError as e:
        raise InvalidParameterError(f"Bad parameters for {spec.family}: {e}")
    logger.info(f"Built problem {problem!r} ({problem.constants.how_certified.value})")
    return problem
