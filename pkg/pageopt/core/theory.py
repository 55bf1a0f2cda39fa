"""Closed-form parameters and complexity bounds for PAGE.

Count-valued results are ceiled to integers. The ceiling first rounds to 9
decimals so that values like 400.00000000000006 produced by floating-point
evaluation count as 400.
"""

import math
from typing import Any, Dict, Optional, Union

from pageopt.core.estimator import EstimatorParams
from pageopt.core.optimizer import PageConfig, resolve_x0
from pageopt.core.problems.base import FiniteSumProblem
from pageopt.core.utils.errors import InvalidParameterError, MissingConstantError
from pageopt.core.utils.json_schema import TheoryInputs
from pageopt.core.utils.logging import get_logger

logger = get_logger(__name__)


def _ceil(value: float) -> int:
    return int(math.ceil(round(value, 9)))


def _radical(p: float, b_prime: int) -> float:
    if not 0.0 < p <= 1.0:
        raise InvalidParameterError(f"p must lie in (0, 1], got {p}")
    if b_prime < 1:
        raise InvalidParameterError(f"b_prime must be >= 1, got {b_prime}")
    return math.sqrt((1.0 - p) / (p * b_prime))


def _indicator(b: int, n: Optional[int]) -> bool:
    """1{b < n}; a streaming problem has n = infinity."""
    return n is None or b < n


def stepsize_max(L: float, p: float, b_prime: int) -> float:
    """Largest admissible stepsize 1 / (L (1 + sqrt((1 - p) / (p b'))))."""
    if L <= 0:
        raise InvalidParameterError(f"L must be positive, got {L}")
    return 1.0 / (L * (1.0 + _radical(p, b_prime)))


def default_probability(b: int, b_prime: int) -> float:
    """p = b' / (b + b')."""
    if b < 1 or b_prime < 1:
        raise InvalidParameterError(f"Need b, b_prime >= 1, got b={b}, b_prime={b_prime}")
    return b_prime / (b + b_prime)


def online_minibatch(sigma_sq: float, epsilon: float, n: Optional[int] = None) -> int:
    """
    b = min(ceil(2 sigma^2 / epsilon^2), n), clamped to at least 1.

    Args:
        sigma_sq: Single-sample variance bound
        epsilon: Target accuracy
        n: Component count, or None for a streaming problem
    """
    if sigma_sq < 0 or epsilon <= 0:
        raise InvalidParameterError(f"Need sigma_sq >= 0 and epsilon > 0, got {sigma_sq}, {epsilon}")
    b = max(1, _ceil(2.0 * sigma_sq / epsilon ** 2))
    return b if n is None else min(b, n)


def _check_accuracy(L: float, delta0: float, epsilon: float) -> None:
    if L <= 0 or delta0 < 0 or epsilon <= 0:
        raise InvalidParameterError(
            f"Need L > 0, delta0 >= 0, epsilon > 0; got L={L}, delta0={delta0}, epsilon={epsilon}"
        )


def iterations_finite(
    L: float, delta0: float, epsilon: float, p: float, b_prime: int, integer: bool = True
) -> Union[int, float]:
    """
    T = (2 L delta0 / epsilon^2) (1 + sqrt((1 - p) / (p b'))) for the finite-sum case.

    Args:
        integer: Ceil to an iteration count (at least 1); False returns the real value
    """
    _check_accuracy(L, delta0, epsilon)
    value = (2.0 * L * delta0 / epsilon ** 2) * (1.0 + _radical(p, b_prime))
    return max(1, _ceil(value)) if integer else value


def iterations_online(
    L: float, delta0: float, epsilon: float, p: float, b_prime: int, integer: bool = True
) -> Union[int, float]:
    """T = (4 L delta0 / epsilon^2) (1 + sqrt((1 - p) / (p b'))) + 1/p for the online case."""
    _check_accuracy(L, delta0, epsilon)
    value = (4.0 * L * delta0 / epsilon ** 2) * (1.0 + _radical(p, b_prime)) + 1.0 / p
    return max(1, _ceil(value)) if integer else value


def grad_complexity(b: int, T: float, p: float, b_prime: int) -> float:
    """Expected gradient count b + T (p b + (1 - p) b') in the b'-per-small-step convention."""
    return b + T * (p * b + (1.0 - p) * b_prime)


def iterations_bound_finite(L: float, delta0: float, epsilon: float, n: int, b_prime: int) -> float:
    """Simplified finite-sum iteration bound 4 L delta0 sqrt(n) / (epsilon^2 b'), valid for b' <= sqrt(n)."""
    return 4.0 * L * delta0 * math.sqrt(n) / (epsilon ** 2 * b_prime)


def grad_complexity_bound_finite(L: float, delta0: float, epsilon: float, n: int) -> float:
    """n + 8 L delta0 sqrt(n) / epsilon^2."""
    return n + 8.0 * L * delta0 * math.sqrt(n) / epsilon ** 2


def iterations_bound_online(L: float, delta0: float, epsilon: float, b: int, b_prime: int) -> float:
    """8 L delta0 sqrt(b) / (epsilon^2 b') + (b + b') / b'."""
    return 8.0 * L * delta0 * math.sqrt(b) / (epsilon ** 2 * b_prime) + (b + b_prime) / b_prime


def grad_complexity_bound_online(L: float, delta0: float, epsilon: float, b: int) -> float:
    """3 b + 16 L delta0 sqrt(b) / epsilon^2."""
    return 3.0 * b + 16.0 * L * delta0 * math.sqrt(b) / epsilon ** 2


def lyapunov_slack(eta: float, L: float, p: float, b_prime: int) -> float:
    """
    1/(2 eta) - L/2 - (1 - p) eta L^2 / (2 p b').

    Nonnegative exactly when the potential f - f* + (eta / 2p) ||g - grad f||^2
    is guaranteed to decrease in expectation.
    """
    if eta <= 0:
        raise InvalidParameterError(f"eta must be positive, got {eta}")
    return 1.0 / (2.0 * eta) - L / 2.0 - (1.0 - p) * eta * L ** 2 / (2.0 * p * b_prime)


def expected_grad_norm_sq_bound(
    delta0: float,
    eta: float,
    T: int,
    p: float,
    b: int,
    n: Optional[int],
    sigma_sq: Optional[float] = None,
) -> float:
    """
    Bound on E||grad f(x_hat)||^2: 2 delta0 / (eta T) + 1{b<n} (sigma^2 / (p b T) + sigma^2 / b).

    Raises:
        MissingConstantError: If b < n and sigma^2 is not given
    """
    if eta <= 0 or T < 1:
        raise InvalidParameterError(f"Need eta > 0 and T >= 1, got eta={eta}, T={T}")
    bound = 2.0 * delta0 / (eta * T)
    if _indicator(b, n):
        if sigma_sq is None:
            raise MissingConstantError("sigma^2 is required when b < n")
        bound += sigma_sq / (p * b * T) + sigma_sq / b
    return bound


def initial_gap(problem: FiniteSumProblem, x0: Union[str, Any] = "zeros", seed: int = 0) -> float:
    """
    Delta0 = f(x0) - f*, or f(x0) - (certified lower bound) when f* is unknown.

    Raises:
        MissingConstantError: If neither f* nor a lower bound is certified
    """
    lower = problem.constants.lower_bound
    if lower is None:
        raise MissingConstantError(f"{problem.family} certifies neither f* nor a lower bound")
    point = resolve_x0(x0, problem.d, seed)
    return max(0.0, problem.value(point) - lower)


def auto_config(
    problem: FiniteSumProblem,
    epsilon: float,
    mode: str = "finite",
    x0: Union[str, Any] = "zeros",
    seed: int = 0,
    delta0: Optional[float] = None,
    b_prime: Optional[int] = None,
    diagnostics_interval: int = 0,
) -> PageConfig:
    """
    Fill every tunable from the certified constants.

    Finite mode takes b = n; online mode takes b = online_minibatch(sigma^2,
    epsilon, n). Then b' = floor(sqrt(b)) unless given, p = b' / (b + b'),
    eta = stepsize_max (with equality) and T from the mode's formula.

    Raises:
        MissingConstantError: If a constant the mode needs is not certified
        InvalidParameterError: On finite mode over a streaming problem
    """
    c = problem.constants
    if mode == "finite":
        if problem.n is None:
            raise InvalidParameterError("Finite mode needs a finite-sum problem")
        b = problem.n
    elif mode == "online":
        if c.sigma_sq is None:
            raise MissingConstantError(f"Online mode needs a certified sigma^2 ({problem.family} has none)")
        b = online_minibatch(c.sigma_sq, epsilon, problem.n)
    else:
        raise InvalidParameterError(f"mode must be 'finite' or 'online', got {mode!r}")

    bp = b_prime if b_prime is not None else max(1, math.isqrt(b))
    p = default_probability(b, bp)
    eta = stepsize_max(c.L, p, bp)
    gap = delta0 if delta0 is not None else initial_gap(problem, x0, seed)
    iterations = iterations_finite if mode == "finite" else iterations_online
    T = int(iterations(c.L, gap, epsilon, p, bp))

    logger.debug(f"auto_config({mode}): b={b}, b'={bp}, p={p:.6g}, eta={eta:.6g}, T={T}, delta0={gap:.6g}")
    return PageConfig(
        eta=eta, params=EstimatorParams(b=b, b_prime=bp, p=p), T=T,
        epsilon=epsilon, seed=seed, x0=x0, diagnostics_interval=diagnostics_interval, mode=mode,
    )


def theory_inputs(problem: FiniteSumProblem, config: PageConfig, delta0: Optional[float] = None) -> TheoryInputs:
    """Collect the symbols the formulas above consume for one problem and config."""
    if config.epsilon is None:
        raise InvalidParameterError("Theory quantities need a target epsilon")
    gap = delta0 if delta0 is not None else initial_gap(problem, config.x0, config.seed)
    return TheoryInputs(
        L=problem.constants.L, delta0=gap, epsilon=config.epsilon, n=problem.n,
        sigma_sq=problem.constants.sigma_sq,
        b=config.params.b, b_prime=config.params.b_prime, p=config.params.p,
    )


def theory_summary(inputs: TheoryInputs, mode: str = "finite", T: Optional[int] = None) -> Dict[str, Any]:
    """
    Every closed-form quantity for one set of inputs.

    Args:
        inputs: Problem constants and chosen tunables
        mode: finite | online; selects the iteration formula
        T: Iteration count actually run; defaults to the theoretical one
    """
    iterations = iterations_finite if mode == "finite" else iterations_online
    theory_T = int(iterations(inputs.L, inputs.delta0, inputs.epsilon, inputs.p, inputs.b_prime))
    eta = stepsize_max(inputs.L, inputs.p, inputs.b_prime)
    summary: Dict[str, Any] = {
        "mode": mode,
        "stepsize_max": eta,
        "default_probability": default_probability(inputs.b, inputs.b_prime),
        "theory_T": theory_T,
        "theory_grad_complexity": grad_complexity(inputs.b, theory_T, inputs.p, inputs.b_prime),
        "lyapunov_slack": lyapunov_slack(eta, inputs.L, inputs.p, inputs.b_prime),
    }
    if inputs.sigma_sq is not None:
        summary["online_minibatch"] = online_minibatch(inputs.sigma_sq, inputs.epsilon, inputs.n)
    if inputs.n is not None:
        summary["iterations_bound_finite"] = iterations_bound_finite(
            inputs.L, inputs.delta0, inputs.epsilon, inputs.n, inputs.b_prime
        )
        summary["grad_complexity_bound_finite"] = grad_complexity_bound_finite(
            inputs.L, inputs.delta0, inputs.epsilon, inputs.n
        )
    summary["iterations_bound_online"] = iterations_bound_online(
        inputs.L, inputs.delta0, inputs.epsilon, inputs.b, inputs.b_prime
    )
    summary["grad_complexity_bound_online"] = grad_complexity_bound_online(
        inputs.L, inputs.delta0, inputs.epsilon, inputs.b
    )
    if inputs.sigma_sq is not None or not _indicator(inputs.b, inputs.n):
        summary["expected_grad_norm_sq_bound"] = expected_grad_norm_sq_bound(
            inputs.delta0, eta, T or theory_T, inputs.p, inputs.b, inputs.n, inputs.sigma_sq
        )
    return summary
