"""Executable checks of the inequalities behind PAGE's convergence guarantee.

Three kinds of check live here:

* deterministic audits that evaluate both sides of an inequality at one
  state (descent lemma, smoothness and variance assumptions, finite
  differences, stepsize condition);
* exact checks that enumerate every outcome of one estimator step on a
  tiny finite-sum instance;
* Monte Carlo checks that compare a sample mean against a bound and pass
  when the bound is not exceeded by more than three standard errors.

``VerificationSuite`` builds a small problem zoo and runs all of them.
"""

import dataclasses
import itertools
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from pageopt.core.estimator import EstimatorParams, EstimatorState, PageEstimator
from pageopt.core.linalg import RandomSource, Vector, norm_sq, sample_indices
from pageopt.core.optimizer import PageConfig, RunResult, run_page
from pageopt.core.problems.base import FiniteSumProblem
from pageopt.core.problems.logistic import make_nonconvex_logistic, make_synthetic_logistic_data
from pageopt.core.problems.quadratic import (
    make_heterogeneous_quadratic,
    make_shared_curvature_quadratic,
)
from pageopt.core.problems.streaming import streaming_view
from pageopt.core.theory import (
    auto_config,
    default_probability,
    expected_grad_norm_sq_bound,
    initial_gap,
    lyapunov_slack,
    stepsize_max,
)
from pageopt.core.utils.errors import (
    EnumerationTooLargeError,
    InvalidParameterError,
    MissingConstantError,
)
from pageopt.core.utils.json_schema import CheckReport
from pageopt.core.utils.logging import get_logger
from pageopt.core.utils.stats import mean_and_se

logger = get_logger(__name__)

MAX_ENUMERATION_N = 12
MAX_OUTCOMES = 250_000
MIN_REPLICATES = 10_000


def _base(problem: FiniteSumProblem) -> FiniteSumProblem:
    return problem.base if problem.is_streaming else problem  # type: ignore[attr-defined]


def _component_matrix(problem: FiniteSumProblem, x: Vector) -> NDArray[np.float64]:
    """Rows grad f_i(x) for every component of the (base) finite sum."""
    base = _base(problem)
    return base.component_gradients(base.all_indices(), x)


def _has_sampling_noise(b: int, n: Optional[int]) -> bool:
    return n is None or b < n


def _worst(name: str, reports: Sequence[CheckReport], **details) -> CheckReport:
    """Collapse per-state reports into one: the smallest margin, passed iff all passed."""
    worst = min(reports, key=lambda r: r.margin)
    return worst.model_copy(update={
        "name": name,
        "passed": all(r.passed for r in reports),
        "replicates": len(reports),
        "details": {**worst.details, **details, "failures": sum(not r.passed for r in reports)},
    })


# -- deterministic audits ----------------------------------------------------

def check_descent_lemma(problem: FiniteSumProblem, x_t: Vector, g_t: Vector, eta: float) -> CheckReport:
    """
    f(x+) <= f(x) - eta/2 ||grad f(x)||^2 - (1/(2 eta) - L/2) ||x+ - x||^2 + eta/2 ||g - grad f(x)||^2
    with x+ = x - eta g. Holds for every g, so it is checked per realization.
    """
    if eta <= 0:
        raise InvalidParameterError(f"eta must be positive, got {eta}")
    L = problem.constants.L
    x_next = x_t - eta * g_t
    f_t = problem.value(x_t)
    grad = problem.full_gradient(x_t)
    rhs = (
        f_t
        - 0.5 * eta * norm_sq(grad)
        - (1.0 / (2.0 * eta) - 0.5 * L) * norm_sq(x_next - x_t)
        + 0.5 * eta * norm_sq(g_t - grad)
    )
    return CheckReport.deterministic(
        "descent_lemma", problem.value(x_next), rhs, tolerance=1e-9 * (1.0 + abs(f_t)), eta=eta
    )


def check_average_smoothness(problem: FiniteSumProblem, rng: RandomSource, pairs: int = 100) -> CheckReport:
    """mean_i ||grad f_i(x) - grad f_i(y)||^2 <= L^2 ||x - y||^2 over random pairs (worst pair reported)."""
    L = problem.constants.L
    reports = []
    for _ in range(pairs):
        x, y = rng.gaussian(problem.d), rng.gaussian(problem.d)
        diff = _component_matrix(problem, x) - _component_matrix(problem, y)
        lhs = float(np.mean(np.sum(diff ** 2, axis=1)))
        rhs = L ** 2 * norm_sq(x - y)
        reports.append(CheckReport.deterministic("average_smoothness", lhs, rhs, tolerance=1e-9 * rhs))
    return _worst(f"average_smoothness[{problem.family}]", reports)


def check_bounded_variance(problem: FiniteSumProblem, rng: RandomSource, points: int = 100) -> CheckReport:
    """
    mean_i ||grad f_i(x) - grad f(x)||^2 <= sigma^2 at random points.

    Raises:
        MissingConstantError: If the problem certifies no sigma^2
    """
    sigma_sq = problem.constants.sigma_sq
    if sigma_sq is None:
        raise MissingConstantError(f"{problem.family} certifies no sigma^2")
    reports = []
    for _ in range(points):
        x = rng.gaussian(problem.d)
        dev = _component_matrix(problem, x) - problem.full_gradient(x)
        lhs = float(np.mean(np.sum(dev ** 2, axis=1)))
        reports.append(
            CheckReport.deterministic("bounded_variance", lhs, sigma_sq, tolerance=1e-9 * sigma_sq + 1e-15)
        )
    return _worst(f"bounded_variance[{problem.family}]", reports)


def check_gradient_fd(
    problem: FiniteSumProblem,
    rng: RandomSource,
    points: int = 20,
    components: int = 5,
    step: float = 1e-6,
    rtol: float = 1e-5,
) -> CheckReport:
    """
    Component gradients against central differences of component values.

    The error at a point is ||g - g_fd|| / max(1, ||g||); the worst over all
    points and sampled components must not exceed ``rtol``.
    """
    base = _base(problem)
    n = base.n
    eye = np.eye(base.d)
    worst_err = 0.0
    for _ in range(points):
        x = rng.gaussian(base.d)
        idx = base.all_indices() if n <= components else sample_indices(rng, n, components, with_replacement=False)
        analytic = base.component_gradients(idx, x)
        plus = np.stack([base.component_values(idx, x + step * e) for e in eye], axis=1)
        minus = np.stack([base.component_values(idx, x - step * e) for e in eye], axis=1)
        numeric = (plus - minus) / (2.0 * step)
        err = np.linalg.norm(analytic - numeric, axis=1) / np.maximum(1.0, np.linalg.norm(analytic, axis=1))
        worst_err = max(worst_err, float(err.max()))
    report = CheckReport.deterministic(
        f"gradient_fd[{problem.family}]", worst_err, rtol, tolerance=0.0, step=step
    )
    return report.model_copy(update={"replicates": points})


def check_stepsize_condition(L: float, eta: float, p: float, b_prime: int) -> CheckReport:
    """1/(2 eta) - L/2 - (1 - p) eta L^2 / (2 p b') >= 0."""
    slack = lyapunov_slack(eta, L, p, b_prime)
    return CheckReport.deterministic(
        "stepsize_condition", 0.0, slack, tolerance=1e-12 / eta, eta=eta, p=p, b_prime=b_prime
    )


# -- single-step estimator checks --------------------------------------------

def _recursion_rhs(
    problem: FiniteSumProblem, g_t: Vector, x_t: Vector, x_next: Vector, p: float, b_prime: int
) -> float:
    err_sq = norm_sq(g_t - problem.full_gradient(x_t))
    L = problem.constants.L
    return (1.0 - p) * err_sq + (1.0 - p) * L ** 2 / b_prime * norm_sq(x_next - x_t)


def _require_replicates(replicates: int) -> None:
    if replicates < MIN_REPLICATES:
        raise InvalidParameterError(f"Need at least {MIN_REPLICATES} replicates, got {replicates}")


def exact_recursion_lhs(
    problem: FiniteSumProblem, g_t: Vector, x_t: Vector, x_next: Vector, p: float, b_prime: int
) -> float:
    """
    E||g_next - grad f(x_next)||^2 by enumerating every outcome of one step with b = n.

    Each outcome is produced by the estimator's own branch updates: the big
    branch (the exact gradient) with weight p, and the small branch on every
    one of the n^b' ordered index tuples, each with weight (1 - p) n^-b'.

    Raises:
        EnumerationTooLargeError: If n > 12 or the outcome tree is too large
    """
    n = problem.n
    if n is None:
        raise EnumerationTooLargeError("A streaming problem has no finite outcome tree")
    outcomes = n ** b_prime
    if n > MAX_ENUMERATION_N or outcomes > MAX_OUTCOMES:
        raise EnumerationTooLargeError(
            f"Outcome tree n^b' = {n}^{b_prime} = {outcomes} exceeds the enumeration limit"
        )
    estimator = PageEstimator(problem, EstimatorParams(b=n, b_prime=b_prime, p=p))
    true_next = problem.full_gradient(x_next)
    big = norm_sq(estimator.big_estimate(x_next) - true_next)
    if p == 1.0:
        return big
    small = sum(
        norm_sq(estimator.small_estimate(g_t, x_t, x_next, np.array(tup, dtype=np.int64)) - true_next)
        for tup in itertools.product(range(n), repeat=b_prime)
    )
    return p * big + (1.0 - p) * small / outcomes


def check_variance_recursion_exact(
    problem: FiniteSumProblem, g_t: Vector, x_t: Vector, x_next: Vector, p: float, b_prime: int
) -> CheckReport:
    """
    E||g_next - grad f(x_next)||^2 <= (1-p) ||g - grad f(x)||^2 + (1-p) L^2 / b' ||x_next - x||^2,
    with the left side computed exactly (b = n).
    """
    lhs = exact_recursion_lhs(problem, g_t, x_t, x_next, p, b_prime)
    rhs = _recursion_rhs(problem, g_t, x_t, x_next, p, b_prime)
    return CheckReport.deterministic(
        "variance_recursion_exact", lhs, rhs, tolerance=1e-10 * (1.0 + abs(rhs)), p=p, b_prime=b_prime
    )


def _replicate_streams(rng: RandomSource, replicates: int) -> Iterator[RandomSource]:
    """One child stream per replicate, under a root drawn from ``rng``."""
    root = rng.child(int(rng.generator.integers(0, 2**32)))
    return (root.child(i) for i in range(replicates))


def _estimator_for(problem: FiniteSumProblem, params: EstimatorParams, stream: RandomSource) -> PageEstimator:
    if problem.is_streaming:
        problem = problem.with_rng(stream.child(0))  # type: ignore[attr-defined]
    return PageEstimator(problem, params)


def step_errors(
    problem: FiniteSumProblem,
    g_t: Vector,
    x_t: Vector,
    x_next: Vector,
    params: EstimatorParams,
    replicates: int,
    rng: RandomSource,
) -> NDArray[np.float64]:
    """
    ||g_next - grad f(x_next)||^2 over independent ``PageEstimator.step`` calls.

    Every replicate starts from (g_t, x_t) and owns one child stream; a
    streaming problem is re-seeded from that stream as well.
    """
    true_next = problem.full_gradient(x_next)
    errors = np.empty(replicates)
    for i, stream in enumerate(_replicate_streams(rng, replicates)):
        estimator = _estimator_for(problem, params, stream)
        state = EstimatorState(g=np.array(g_t, dtype=np.float64), x_prev=np.array(x_t, dtype=np.float64))
        state = estimator.step(state, x_next, stream)
        errors[i] = norm_sq(state.g - true_next)
    return errors


def check_variance_recursion_online(
    problem: FiniteSumProblem,
    g_t: Vector,
    x_t: Vector,
    x_next: Vector,
    p: float,
    b: int,
    b_prime: int,
    replicates: int,
    rng: RandomSource,
) -> CheckReport:
    """
    Monte Carlo version of the recursion with the sampling term 1{b<n} p sigma^2 / b added.

    Raises:
        InvalidParameterError: If fewer than MIN_REPLICATES replicates are requested
        MissingConstantError: If b < n and sigma^2 is not certified
    """
    _require_replicates(replicates)
    params = EstimatorParams(b=b, b_prime=b_prime, p=p)
    params.validate_for(problem)
    rhs = _recursion_rhs(problem, g_t, x_t, x_next, p, b_prime)
    if _has_sampling_noise(b, problem.n):
        sigma_sq = problem.constants.sigma_sq
        if sigma_sq is None:
            raise MissingConstantError(f"{problem.family} certifies no sigma^2")
        rhs += p * sigma_sq / b
    errors = step_errors(problem, g_t, x_t, x_next, params, replicates, rng)
    lhs, se = float(errors.mean()), float(errors.std(ddof=1) / math.sqrt(replicates))
    return CheckReport.monte_carlo(
        "variance_recursion_online", lhs, rhs, se, replicates,
        tolerance=1e-12 * (1.0 + abs(rhs)), b=b, b_prime=b_prime, p=p,
    )


def check_enumeration_cross_validation(
    problem: FiniteSumProblem,
    g_t: Vector,
    x_t: Vector,
    x_next: Vector,
    p: float,
    b_prime: int,
    replicates: int,
    rng: RandomSource,
) -> CheckReport:
    """The enumerated expectation agrees with the mean of real step() outcomes within 4 standard errors."""
    _require_replicates(replicates)
    exact = exact_recursion_lhs(problem, g_t, x_t, x_next, p, b_prime)
    params = EstimatorParams(b=problem.n, b_prime=b_prime, p=p)
    errors = step_errors(problem, g_t, x_t, x_next, params, replicates, rng)
    estimate, se = float(errors.mean()), float(errors.std(ddof=1) / math.sqrt(replicates))
    gap = abs(estimate - exact)
    margin = 4.0 * se - gap
    return CheckReport(
        name="enumeration_cross_validation", lhs=gap, rhs=4.0 * se, margin=margin,
        passed=bool(margin >= -1e-12 * (1.0 + exact)), replicates=replicates,
        standard_error=se, details={"exact": exact, "monte_carlo": estimate},
    )


def check_phi0_bound(
    problem: FiniteSumProblem,
    b: int,
    p: float,
    eta: float,
    replicates: int,
    rng: RandomSource,
    x0: Optional[Vector] = None,
) -> CheckReport:
    """
    E[Phi_0] <= f(x0) - f* + 1{b<n} eta sigma^2 / (2 p b).

    Phi_0 = f(x0) - f* + (eta / 2p) ||g0 - grad f(x0)||^2, with g0 from
    ``PageEstimator.init`` on one child stream per replicate.

    Raises:
        InvalidParameterError: If b < n and fewer than MIN_REPLICATES replicates are requested
        MissingConstantError: If f* (or, when b < n, sigma^2) is not certified
    """
    c = problem.constants
    if c.f_star is None:
        raise MissingConstantError(f"{problem.family} certifies no f*")
    x0 = np.zeros(problem.d) if x0 is None else x0
    gap = problem.value(x0) - c.f_star
    rhs = gap
    noisy = _has_sampling_noise(b, problem.n)
    if not noisy:
        # b = n: g0 is the exact gradient
        return CheckReport.deterministic("phi0_bound", gap, rhs, tolerance=1e-12 * (1.0 + abs(rhs)), b=b)
    _require_replicates(replicates)
    if c.sigma_sq is None:
        raise MissingConstantError(f"{problem.family} certifies no sigma^2")
    rhs += eta * c.sigma_sq / (2.0 * p * b)

    params = EstimatorParams(b=b, b_prime=1, p=p)
    true = problem.full_gradient(x0)
    phis = np.empty(replicates)
    for i, stream in enumerate(_replicate_streams(rng, replicates)):
        state = _estimator_for(problem, params, stream).init(x0, stream)
        phis[i] = gap + eta / (2.0 * p) * norm_sq(state.g - true)
    lhs, se = float(phis.mean()), float(phis.std(ddof=1) / math.sqrt(replicates))
    return CheckReport.monte_carlo(
        "phi0_bound", lhs, rhs, se, replicates, tolerance=1e-12 * (1.0 + abs(rhs)), b=b,
    )


# -- whole-run checks --------------------------------------------------------

def _runs(problem: FiniteSumProblem, config: PageConfig, seeds: Sequence[int], interval: int) -> List[RunResult]:
    results = []
    for seed in seeds:
        cfg = dataclasses.replace(config, seed=seed, diagnostics_interval=interval)
        results.append(run_page(problem, cfg))
    return results


def _aborted_report(name: str, runs: List[RunResult]) -> Optional[CheckReport]:
    aborted = [r.seed for r in runs if r.aborted]
    if not aborted:
        return None
    return CheckReport(
        name=name, lhs=math.inf, rhs=0.0, margin=-math.inf, passed=False,
        replicates=len(runs), details={"aborted_seeds": aborted},
    )


def check_lyapunov_telescoping(problem: FiniteSumProblem, config: PageConfig, seeds: Sequence[int]) -> CheckReport:
    """
    E[Phi_T] <= E[Phi_0] - eta/2 sum_{t<T} E||grad f(x_t)||^2 + 1{b<n} eta T sigma^2 / (2b),
    averaged over one run per seed with diagnostics at every step.
    """
    c = problem.constants
    if c.f_star is None:
        raise MissingConstantError(f"{problem.family} certifies no f*")
    runs = _runs(problem, config, seeds, interval=1)
    failed = _aborted_report("lyapunov_telescoping", runs)
    if failed is not None:
        return failed

    eta, T, b = config.eta, config.T, config.params.b
    noise = 0.0
    if _has_sampling_noise(b, problem.n):
        if c.sigma_sq is None:
            raise MissingConstantError(f"{problem.family} certifies no sigma^2")
        noise = eta * T * c.sigma_sq / (2.0 * b)

    phi_T, bounds = [], []
    for run in runs:
        phi0 = run.trace[0].lyapunov
        grad_sum = sum(r.grad_norm_sq for r in run.trace[:T])
        phi_T.append(run.trace[T].lyapunov)
        bounds.append(phi0 - 0.5 * eta * grad_sum + noise)
    lhs, rhs = float(np.mean(phi_T)), float(np.mean(bounds))
    _, se = mean_and_se([a - r for a, r in zip(phi_T, bounds)])
    return CheckReport.monte_carlo(
        "lyapunov_telescoping", lhs, rhs, se, len(runs),
        tolerance=1e-9 * (1.0 + abs(float(np.mean([r.trace[0].lyapunov for r in runs])))),
        T=T, eta=eta,
    )


def check_jensen_output(problem: FiniteSumProblem, config: PageConfig, seeds: Sequence[int]) -> CheckReport:
    """mean ||grad f(x_hat)|| <= sqrt(mean ||grad f(x_hat)||^2) over one run per seed."""
    runs = _runs(problem, config, seeds, interval=config.diagnostics_interval)
    failed = _aborted_report("jensen_output", runs)
    if failed is not None:
        return failed
    sq = [r.chosen_record.grad_norm_sq for r in runs]
    norms = [math.sqrt(v) for v in sq]
    lhs, se = mean_and_se(norms)
    rhs = math.sqrt(float(np.mean(sq)))
    return CheckReport.monte_carlo(
        "jensen_output", lhs, rhs, se, len(runs), tolerance=1e-12 * (1.0 + rhs)
    )


def check_output_bound(
    problem: FiniteSumProblem,
    config: PageConfig,
    seeds: Sequence[int],
    delta0: Optional[float] = None,
) -> CheckReport:
    """mean ||grad f(x_hat)||^2 <= 2 delta0 / (eta T) + 1{b<n} (sigma^2 / (p b T) + sigma^2 / b)."""
    runs = _runs(problem, config, seeds, interval=config.diagnostics_interval)
    failed = _aborted_report("output_bound", runs)
    if failed is not None:
        return failed
    gap = delta0 if delta0 is not None else initial_gap(problem, config.x0, config.seed)
    params = config.params
    rhs = expected_grad_norm_sq_bound(
        gap, config.eta, config.T, params.p, params.b, problem.n, problem.constants.sigma_sq
    )
    lhs, se = mean_and_se([r.chosen_record.grad_norm_sq for r in runs])
    return CheckReport.monte_carlo("output_bound", lhs, rhs, se, len(runs), T=config.T)


def audit_descent_along_run(problem: FiniteSumProblem, config: PageConfig) -> CheckReport:
    """Descent lemma at every diagnostics step of a real run (every step when the interval is 0)."""
    interval = config.diagnostics_interval or 1
    reports: List[CheckReport] = []

    def on_step(t: int, x_t: Vector, g_t: Vector, x_next: Vector) -> None:
        if t % interval == 0:
            reports.append(check_descent_lemma(problem, x_t, g_t, config.eta))

    run = run_page(problem, config, on_step=on_step)
    if not reports:
        raise InvalidParameterError("Run produced no audited steps")
    return _worst(f"descent_along_run[{problem.family}]", reports, aborted=run.aborted)


# -- suite -------------------------------------------------------------------

def _random_state(problem: FiniteSumProblem, rng: RandomSource, spread: float = 0.5) -> Tuple[Vector, Vector]:
    """A random point and an estimate that deviates from its gradient."""
    x = rng.gaussian(problem.d)
    g = problem.full_gradient(x) + spread * rng.gaussian(problem.d)
    return x, g


class VerificationSuite:
    """Builds a small problem zoo and runs every check against it."""

    LEVELS: Dict[str, Dict[str, int]] = {
        "quick": {"replicates": 10_000, "seeds": 50, "states": 200},
        "full": {"replicates": 100_000, "seeds": 100, "states": 1000},
    }

    def __init__(self, level: str = "quick", seed: int = 0, l_scale: float = 1.0, epsilon: float = 0.3):
        """
        Args:
            level: quick | full
            seed: Root seed for the zoo and every Monte Carlo draw
            l_scale: Multiplies every certified L (0.5 is the mutation test)
            epsilon: Target accuracy used to auto-configure whole-run checks
        """
        if level not in self.LEVELS:
            raise InvalidParameterError(f"level must be one of {list(self.LEVELS)}, got {level!r}")
        if l_scale <= 0:
            raise InvalidParameterError(f"l_scale must be positive, got {l_scale}")
        self.level = level
        self.seed = seed
        self.l_scale = l_scale
        self.epsilon = epsilon
        self.settings = self.LEVELS[level]
        self.rng = RandomSource(seed)
        self.logger = get_logger(f"{__name__}.VerificationSuite")
        self.zoo = self._build_zoo()

    def _scaled(self, problem: FiniteSumProblem) -> FiniteSumProblem:
        if self.l_scale == 1.0:
            return problem
        return problem.with_constants(L=problem.constants.L * self.l_scale)

    def _build_zoo(self) -> Dict[str, FiniteSumProblem]:
        zoo_rng = self.rng.child(0)
        features, labels = make_synthetic_logistic_data(zoo_rng.child(2), n=50, d=4)
        zoo = {
            "shared": make_shared_curvature_quadratic(zoo_rng.child(0), d=4, n=50, spread=1.0, condition=4.0, delta0=1.0),
            "hetero": make_heterogeneous_quadratic(zoo_rng.child(1), d=4, n=50, condition=4.0, heterogeneity=0.5, delta0=1.0),
            "logistic": make_nonconvex_logistic(features, labels, lam=0.1),
            "tiny": make_heterogeneous_quadratic(zoo_rng.child(3), d=2, n=4, condition=4.0, heterogeneity=1.5),
        }
        return {name: self._scaled(problem) for name, problem in zoo.items()}

    # each task returns one report; the key fixes its rng stream and report order
    def _tasks(self) -> List[Tuple[str, Callable[[RandomSource], CheckReport]]]:
        s = self.settings
        zoo = self.zoo
        tasks: List[Tuple[str, Callable[[RandomSource], CheckReport]]] = []

        for name in ("shared", "hetero", "logistic"):
            problem = zoo[name]
            tasks.append((f"gradient_fd[{name}]", lambda r, pr=problem: check_gradient_fd(pr, r)))
            tasks.append((f"average_smoothness[{name}]", lambda r, pr=problem: check_average_smoothness(pr, r)))
            tasks.append((f"descent_lemma[{name}]", lambda r, pr=problem: self._descent_states(pr, r)))
        tasks.append(("bounded_variance[shared]", lambda r: check_bounded_variance(zoo["shared"], r)))

        tasks.append(("variance_recursion_exact", lambda r: self._exact_states(zoo["tiny"], r)))
        tasks.append(("enumeration_cross_validation", lambda r: self._cross_validation(zoo["tiny"], r)))
        for b in (1, 5, 10):
            tasks.append((f"variance_recursion_online[b={b}]", lambda r, bb=b: self._online_recursion(bb, r)))
        tasks.append(("phi0_bound", lambda r: self._phi0(r)))

        tasks.append(("lyapunov_telescoping[finite]", lambda r: self._telescoping("finite")))
        tasks.append(("lyapunov_telescoping[online]", lambda r: self._telescoping("online")))
        tasks.append(("jensen_output", lambda r: self._whole_run(check_jensen_output)))
        tasks.append(("output_bound", lambda r: self._whole_run(check_output_bound)))
        tasks.append(("stepsize_condition", lambda r: self._stepsize()))
        tasks.append(("descent_along_run[logistic]", lambda r: self._run_audit()))
        return tasks

    def _descent_states(self, problem: FiniteSumProblem, rng: RandomSource) -> CheckReport:
        reports = []
        for _ in range(self.settings["states"]):
            x, g = _random_state(problem, rng)
            eta = (1.0 - rng.uniform()) / problem.constants.L
            reports.append(check_descent_lemma(problem, x, g, eta))
        return _worst(f"descent_lemma[{problem.family}]", reports)

    def _exact_states(self, problem: FiniteSumProblem, rng: RandomSource) -> CheckReport:
        reports = []
        for b_prime in (1, 2):
            p = default_probability(problem.n, b_prime)
            for _ in range(100):
                x, g = _random_state(problem, rng)
                x_next = x + rng.gaussian(problem.d)
                reports.append(check_variance_recursion_exact(problem, g, x, x_next, p, b_prime))
        return _worst("variance_recursion_exact", reports)

    def _cross_validation(self, problem: FiniteSumProblem, rng: RandomSource) -> CheckReport:
        x, g = _random_state(problem, rng)
        x_next = x + rng.gaussian(problem.d)
        p = default_probability(problem.n, 1)
        return check_enumeration_cross_validation(
            problem, g, x, x_next, p, 1, self.settings["replicates"], rng
        )

    def _online_recursion(self, b: int, rng: RandomSource) -> CheckReport:
        view = streaming_view(self.zoo["shared"], rng.child(0))
        b_prime = max(1, math.isqrt(b))
        p = default_probability(b, b_prime)
        x, g = _random_state(view, rng)
        x_next = x + 0.3 * rng.gaussian(view.d)
        report = check_variance_recursion_online(
            view, g, x, x_next, p, b, b_prime, self.settings["replicates"], rng
        )
        return report.model_copy(update={"name": f"variance_recursion_online[b={b}]"})

    def _phi0(self, rng: RandomSource) -> CheckReport:
        view = streaming_view(self.zoo["shared"], rng.child(0))
        b, b_prime = 5, 2
        p = default_probability(b, b_prime)
        eta = stepsize_max(view.constants.L, p, b_prime)
        return check_phi0_bound(view, b, p, eta, self.settings["replicates"], rng)

    def _seeds(self) -> List[int]:
        return list(range(self.settings["seeds"]))

    def _telescoping(self, mode: str) -> CheckReport:
        if mode == "finite":
            problem = self.zoo["hetero"]
        else:
            problem = streaming_view(self.zoo["shared"], self.rng.child(2))
        config = auto_config(problem, self.epsilon, mode=mode)
        report = check_lyapunov_telescoping(problem, config, self._seeds())
        return report.model_copy(update={"name": f"lyapunov_telescoping[{mode}]"})

    def _whole_run(self, check: Callable[..., CheckReport]) -> CheckReport:
        problem = self.zoo["hetero"]
        return check(problem, auto_config(problem, self.epsilon), self._seeds())

    def _stepsize(self) -> CheckReport:
        config = auto_config(self.zoo["hetero"], self.epsilon)
        return check_stepsize_condition(
            self.zoo["hetero"].constants.L, config.eta, config.params.p, config.params.b_prime
        )

    def _run_audit(self) -> CheckReport:
        problem = self.zoo["logistic"]
        config = auto_config(problem, self.epsilon, diagnostics_interval=1)
        return audit_descent_along_run(problem, config)

    def run(self, max_workers: Optional[int] = None) -> List[CheckReport]:
        """
        Run every check, concurrently when ``max_workers`` > 1.

        Returns:
            Reports in a fixed order regardless of completion order
        """
        tasks = self._tasks()
        self.logger.info(
            f"Running {len(tasks)} checks (level={self.level}, seed={self.seed}, l_scale={self.l_scale})"
        )
        streams = self.rng.child(1).split(len(tasks))
        reports: List[Optional[CheckReport]] = [None] * len(tasks)

        with ThreadPoolExecutor(max_workers=max_workers or 1) as executor:
            futures = {
                executor.submit(fn, streams[i]): (i, name)
                for i, (name, fn) in enumerate(tasks)
            }
            for future in as_completed(futures):
                i, name = futures[future]
                report = future.result()
                reports[i] = report
                status = "pass" if report.passed else "FAIL"
                self.logger.debug(f"{name}: {status} (margin {report.margin:.3g})")

        done = [r for r in reports if r is not None]
        failed = [r.name for r in done if not r.passed]
        if failed:
            self.logger.info(f"{len(failed)} of {len(done)} checks failed: {', '.join(failed)}")
        else:
            self.logger.info(f"All {len(done)} checks passed")
        return done


def run_verification(level: str = "quick", seed: int = 0, l_scale: float = 1.0,
                     max_workers: Optional[int] = None) -> List[CheckReport]:
    """Convenience wrapper: build the suite and run it."""
    return VerificationSuite(level=level, seed=seed, l_scale=l_scale).run(max_workers=max_workers)
