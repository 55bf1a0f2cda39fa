"""Outer PAGE loop, its GD/SGD reductions and the run telemetry."""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Union

import numpy as np

from pageopt.core.estimator import EstimatorParams, EstimatorState, PageEstimator
from pageopt.core.linalg import RandomSource, Vector, as_vector, axpy, norm_sq
from pageopt.core.problems.base import FiniteSumProblem
from pageopt.core.utils.errors import InvalidParameterError, NonFiniteError
from pageopt.core.utils.json_schema import Branch, TelemetryRecord
from pageopt.core.utils.logging import get_logger

logger = get_logger(__name__)

DIVERGENCE_LIMIT = 1e12
INITIALIZERS = ("zeros", "ones", "gaussian")

StepCallback = Callable[[int, Vector, Vector, Vector], None]


def resolve_x0(x0: Union[str, Vector], d: int, seed: int) -> Vector:
    """
    Turn a named initializer or an explicit point into a Vector.

    ``gaussian`` draws from child stream 0 of the run seed, so it depends
    only on the seed.
    """
    if isinstance(x0, str):
        if x0 == "zeros":
            return as_vector(np.zeros(d))
        if x0 == "ones":
            return as_vector(np.ones(d))
        if x0 == "gaussian":
            return as_vector(RandomSource(seed).child(0).gaussian(d))
        raise InvalidParameterError(f"Unknown initializer {x0!r}; expected one of {INITIALIZERS}")
    point = as_vector(x0)
    if point.shape != (d,):
        raise InvalidParameterError(f"x0 has dimension {point.shape[0]}, problem has {d}")
    return point


@dataclass
class PageConfig:
    """Tunables of one PAGE run."""
    eta: float
    params: EstimatorParams
    T: int
    epsilon: Optional[float] = None  # reporting only
    seed: int = 0
    x0: Union[str, Vector] = "zeros"
    diagnostics_interval: int = 0
    mode: str = "finite"

    def __post_init__(self) -> None:
        if not np.isfinite(self.eta) or self.eta < 0:
            raise InvalidParameterError(f"eta must be finite and >= 0, got {self.eta}")
        if self.T < 1:
            raise InvalidParameterError(f"T must be >= 1, got {self.T}")
        if self.diagnostics_interval < 0:
            raise InvalidParameterError("diagnostics_interval must be >= 0")
        if self.seed < 0:
            raise InvalidParameterError(f"seed must be non-negative, got {self.seed}")
        if self.mode not in ("finite", "online"):
            raise InvalidParameterError(f"mode must be 'finite' or 'online', got {self.mode!r}")


@dataclass
class RunResult:
    """Returned iterate, full trace and final counters of one run."""
    x_hat: Vector
    trace: List[TelemetryRecord]
    chosen_index: int
    T: int
    seed: int
    oracle_calls: int
    paper_calls: int
    big_steps: int
    small_steps: int
    aborted: bool = False
    aborted_at: Optional[int] = None
    branch_history: Optional[List[bool]] = field(default=None, repr=False)

    @property
    def chosen_record(self) -> Optional[TelemetryRecord]:
        """Trace record of the returned iterate (None if the run aborted before it)."""
        if self.chosen_index < len(self.trace):
            return self.trace[self.chosen_index]
        return None


class PageOptimizer:
    """Runs PAGE on one problem with one configuration."""

    def __init__(self, problem: FiniteSumProblem, config: PageConfig, record_branches: bool = False):
        self.problem = problem
        self.config = config
        self.record_branches = record_branches
        self.logger = get_logger(f"{__name__}.PageOptimizer")

    def _record(self, t: int, x: Vector, state: EstimatorState, with_diagnostics: bool) -> TelemetryRecord:
        record = TelemetryRecord(
            t=t, branch=state.branch,
            oracle_calls=state.oracle_calls, paper_calls=state.paper_calls,
        )
        if not with_diagnostics:
            return record
        # diagnostic passes are never charged to either counter
        grad = self.problem.full_gradient(x)
        f_val = self.problem.value(x)
        record.f_val = f_val
        record.grad_norm_sq = norm_sq(grad)
        record.est_err_sq = norm_sq(state.g - grad)
        f_star = self.problem.constants.f_star
        if f_star is not None:
            record.lyapunov = f_val - f_star + self.config.eta / (2.0 * self.config.params.p) * record.est_err_sq
        return record

    def _wants_diagnostics(self, t: int, chosen_index: int) -> bool:
        interval = self.config.diagnostics_interval
        if t == chosen_index or t == self.config.T:
            return True
        return interval > 0 and t % interval == 0

    def _diverged(self, x: Vector, g: Vector, record: TelemetryRecord) -> bool:
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(g))) or norm_sq(x) > DIVERGENCE_LIMIT ** 2:
            return True
        # f is checked every step; uncharged like the diagnostics
        f_val = record.f_val if record.f_val is not None else self.problem.value(x)
        return not np.isfinite(f_val) or abs(f_val) > DIVERGENCE_LIMIT

    def run(self, on_step: Optional[StepCallback] = None) -> RunResult:
        """
        Execute the run.

        Args:
            on_step: Called as on_step(t, x_t, g_t, x_next) before each estimator step

        Returns:
            RunResult; a diverging run comes back with ``aborted=True``
        """
        cfg = self.config
        problem = self.problem
        rng = RandomSource(cfg.seed)
        chosen_index = int(rng.generator.integers(0, cfg.T))
        if problem.is_streaming:
            problem = problem.with_rng(rng.child(1))  # type: ignore[attr-defined]
            self.problem = problem

        estimator = PageEstimator(problem, cfg.params, record_branches=self.record_branches)
        x = resolve_x0(cfg.x0, problem.d, cfg.seed)
        self.logger.debug(
            f"Run seed={cfg.seed}: T={cfg.T}, eta={cfg.eta:.6g}, b={cfg.params.b}, "
            f"b'={cfg.params.b_prime}, p={cfg.params.p:.6g}, chosen_index={chosen_index}"
        )

        state = estimator.init(x, rng)
        trace = [self._record(0, x, state, self._wants_diagnostics(0, chosen_index))]
        x_hat = x if chosen_index == 0 else None
        last_finite = x
        aborted_at: Optional[int] = None

        for t in range(cfg.T):
            try:
                x_next = axpy(-cfg.eta, state.g, x)
            except NonFiniteError:
                aborted_at = t + 1
                break
            if on_step is not None:
                on_step(t, x, state.g, x_next)
            state = estimator.step(state, x_next, rng)
            x = x_next

            record = self._record(t + 1, x, state, self._wants_diagnostics(t + 1, chosen_index))
            if self._diverged(x, state.g, record):
                aborted_at = t + 1
                break
            trace.append(record)
            last_finite = x
            if t + 1 == chosen_index:
                x_hat = x

        if aborted_at is not None:
            self.logger.warning(
                f"Run seed={cfg.seed} diverged at t={aborted_at} (eta={cfg.eta:.6g} may exceed the smoothness bound)"
            )
        if x_hat is None:
            x_hat = last_finite

        return RunResult(
            x_hat=as_vector(x_hat),
            trace=trace,
            chosen_index=chosen_index,
            T=cfg.T,
            seed=cfg.seed,
            oracle_calls=state.oracle_calls,
            paper_calls=state.paper_calls,
            big_steps=state.big_steps,
            small_steps=state.small_steps,
            aborted=aborted_at is not None,
            aborted_at=aborted_at,
            branch_history=state.branch_history,
        )


def run_page(
    problem: FiniteSumProblem,
    config: PageConfig,
    on_step: Optional[StepCallback] = None,
    record_branches: bool = False,
) -> RunResult:
    """Run PAGE with the given configuration."""
    return PageOptimizer(problem, config, record_branches=record_branches).run(on_step)


def run_sgd(
    problem: FiniteSumProblem,
    eta: float,
    b: int,
    T: int,
    x0: Union[str, Vector] = "zeros",
    seed: int = 0,
    diagnostics_interval: int = 0,
) -> RunResult:
    """Minibatch SGD: PAGE with p = 1."""
    config = PageConfig(
        eta=eta, params=EstimatorParams(b=b, b_prime=1, p=1.0), T=T,
        seed=seed, x0=x0, diagnostics_interval=diagnostics_interval,
    )
    return run_page(problem, config)


def run_gd(
    problem: FiniteSumProblem,
    eta: float,
    T: int,
    x0: Union[str, Vector] = "zeros",
    seed: int = 0,
    diagnostics_interval: int = 0,
) -> RunResult:
    """
    Full-gradient descent: PAGE with p = 1 and b = n.

    Raises:
        InvalidParameterError: On a streaming problem (no finite n)
    """
    if problem.is_streaming:
        raise InvalidParameterError("Gradient descent needs a finite-sum problem")
    return run_sgd(problem, eta, problem.n, T, x0=x0, seed=seed, diagnostics_interval=diagnostics_interval)


def branch_counts(trace: List[TelemetryRecord]) -> tuple[int, int]:
    """(#big, #small) steps recorded in a trace."""
    big = sum(1 for r in trace if r.branch is Branch.BIG)
    small = sum(1 for r in trace if r.branch is Branch.SMALL)
    return big, small
