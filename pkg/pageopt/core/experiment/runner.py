"""Experiment orchestration: seeded runs, scaling sweeps and equal-budget comparisons."""

import math
import os
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import psutil

from pageopt.core.estimator import EstimatorParams
from pageopt.core.experiment import export
from pageopt.core.linalg import RandomSource, norm_sq
from pageopt.core.optimizer import PageConfig, RunResult, run_page
from pageopt.core.problems.base import FiniteSumProblem
from pageopt.core.problems.registry import build_problem
from pageopt.core.problems.streaming import streaming_view
from pageopt.core.theory import (
    auto_config,
    default_probability,
    grad_complexity,
    initial_gap,
    iterations_finite,
    iterations_online,
    online_minibatch,
    stepsize_max,
)
from pageopt.core.utils.errors import InvalidParameterError, MissingConstantError
from pageopt.core.utils.json_schema import CompareRow, ExperimentSpec, SummaryRow, SweepRow
from pageopt.core.utils.logging import get_logger
from pageopt.core.utils.stats import mean_and_se

logger = get_logger(__name__)

THREADS_ENV = "PAGE_OPT_THREADS"


def default_workers() -> int:
    """Worker-pool bound: $PAGE_OPT_THREADS, else the physical CPU count."""
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            value = int(raw)
        except ValueError:
            raise InvalidParameterError(f"{THREADS_ENV} must be an integer, got {raw!r}")
        if value < 1:
            raise InvalidParameterError(f"{THREADS_ENV} must be >= 1, got {value}")
        return value
    return psutil.cpu_count(logical=False) or psutil.cpu_count() or 1


@dataclass
class ExperimentOutcome:
    """Everything one ``run`` produced."""
    config: PageConfig
    results: Dict[int, RunResult]
    summary: List[SummaryRow]
    files: List[Path] = field(default_factory=list)


@dataclass
class SweepOutcome:
    rows: List[SweepRow]
    slope: Optional[float]
    files: List[Path] = field(default_factory=list)


class ExperimentRunner:
    """Runs an ExperimentSpec across its seeds and persists the results."""

    def __init__(self, spec: ExperimentSpec, max_workers: Optional[int] = None):
        """
        Args:
            spec: Experiment to run
            max_workers: Worker-pool size (default: see default_workers)
        """
        self.spec = spec
        self.output_dir = Path(spec.output_dir)
        self.max_workers = max_workers or default_workers()
        self.logger = get_logger(f"{__name__}.ExperimentRunner")

    # -- setup ---------------------------------------------------------------

    def build_problem(self) -> FiniteSumProblem:
        """The experiment's problem, wrapped in a streaming view in online mode."""
        problem_spec = self.spec.problem
        problem = build_problem(problem_spec)
        if self.spec.mode == "online":
            problem = streaming_view(problem, RandomSource(problem_spec.seed))
        return problem

    def _default_b(self, problem: FiniteSumProblem) -> int:
        if self.spec.mode == "finite":
            return problem.n
        sigma_sq = problem.constants.sigma_sq
        if sigma_sq is None:
            raise MissingConstantError(f"Online mode needs a certified sigma^2 ({problem.family} has none)")
        return online_minibatch(sigma_sq, self.spec.epsilon, problem.n)

    def resolve_config(self, problem: FiniteSumProblem, algorithm: Optional[str] = None) -> PageConfig:
        """
        Fill every unset override from the closed-form theory.

        gd uses b = n and p = 1; sgd uses p = 1 and the experiment's (or the
        mode's default) b; page takes b' = floor(sqrt(b)) and
        p = b' / (b + b') unless given. eta defaults to the largest
        admissible stepsize and T to the mode's iteration formula.
        """
        spec = self.spec
        algorithm = algorithm or spec.algorithm
        if algorithm == "gd":
            if problem.is_streaming:
                raise InvalidParameterError("gd needs a finite-sum problem (mode=finite)")
            b, b_prime, p = problem.n, 1, 1.0
        elif algorithm == "sgd":
            b = spec.b or self._default_b(problem)
            b_prime, p = 1, 1.0
        else:
            b = spec.b or self._default_b(problem)
            b_prime = spec.b_prime or max(1, math.isqrt(b))
            p = spec.p or default_probability(b, b_prime)

        params = EstimatorParams(b=b, b_prime=b_prime, p=p)
        params.validate_for(problem)
        L = problem.constants.L
        eta = spec.eta or stepsize_max(L, p, b_prime)
        if spec.iters is not None:
            T = spec.iters
        else:
            iterations = iterations_finite if spec.mode == "finite" else iterations_online
            T = int(iterations(L, initial_gap(problem, spec.x0), spec.epsilon, p, b_prime))
        return PageConfig(
            eta=eta, params=params, T=T, epsilon=spec.epsilon, x0=spec.x0,
            diagnostics_interval=spec.diagnostics_interval, mode=spec.mode,
        )

    def resolved_spec(self, config: PageConfig) -> ExperimentSpec:
        """The experiment spec with every override filled in from ``config``."""
        return self.spec.model_copy(update={
            "eta": config.eta, "p": config.params.p, "b": config.params.b,
            "b_prime": config.params.b_prime, "iters": config.T,
        })

    # -- execution -----------------------------------------------------------

    def run_seeds(
        self,
        problem: FiniteSumProblem,
        config: PageConfig,
        seeds: Sequence[int],
        trace_dir: Optional[Path] = None,
    ) -> Dict[int, RunResult]:
        """
        One run per seed on a bounded worker pool.

        Each worker writes only its own trace file; results come back keyed by seed.
        """
        def work(seed: int) -> RunResult:
            result = run_page(problem, _with_seed(config, seed))
            if trace_dir is not None:
                export.write_trace(trace_dir / export.trace_filename(seed), result.trace)
            return result

        results: Dict[int, RunResult] = {}
        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            futures = {executor.submit(work, seed): seed for seed in seeds}
            for future in as_completed(futures):
                seed = futures[future]
                results[seed] = future.result()
                self.logger.debug(f"Seed {seed} finished ({results[seed].paper_calls} paper calls)")
        return results

    def summarize(
        self, problem: FiniteSumProblem, config: PageConfig, results: Dict[int, RunResult]
    ) -> List[SummaryRow]:
        """Summary rows in seed order."""
        params = config.params
        iterations = iterations_finite if config.mode == "finite" else iterations_online
        theory_T = int(iterations(
            problem.constants.L, initial_gap(problem, config.x0), self.spec.epsilon, params.p, params.b_prime
        ))
        rows = []
        for seed in sorted(results):
            result = results[seed]
            grad_sq, f_val = _final_measurements(problem, result)
            rows.append(SummaryRow(
                seed=seed,
                final_grad_norm=math.sqrt(grad_sq),
                final_f=f_val,
                chosen_index=result.chosen_index,
                T=result.T,
                oracle_calls=result.oracle_calls,
                paper_calls=result.paper_calls,
                theory_T=theory_T,
                theory_grad_complexity=grad_complexity(params.b, result.T, params.p, params.b_prime),
            ))
        return rows

    def run(self) -> ExperimentOutcome:
        """
        Run every seed, write one trace per seed, summary.csv and spec.json.

        Returns:
            ExperimentOutcome with the resolved config, per-seed results and summary
        """
        problem = self.build_problem()
        config = self.resolve_config(problem)
        spec = self.spec
        self.logger.info(
            f"Running {spec.algorithm} on {problem!r}: T={config.T}, b={config.params.b}, "
            f"b'={config.params.b_prime}, p={config.params.p:.6g}, eta={config.eta:.6g}, seeds={len(spec.seeds)}"
        )
        results = self.run_seeds(problem, config, spec.seeds, trace_dir=self.output_dir)
        summary = self.summarize(problem, config, results)

        files = [self.output_dir / export.trace_filename(s) for s in spec.seeds]
        files.append(export.write_summary(self.output_dir / "summary.csv", summary))
        files.append(export.write_spec(self.output_dir / "spec.json", self.resolved_spec(config)))

        aborted = [s for s, r in results.items() if r.aborted]
        if aborted:
            self.logger.warning(f"{len(aborted)} run(s) diverged: seeds {sorted(aborted)}")
        mean_norm, _ = mean_and_se([row.final_grad_norm for row in summary])
        self.logger.info(f"Mean final gradient norm {mean_norm:.6g} over {len(summary)} seeds")
        return ExperimentOutcome(config=config, results=results, summary=summary, files=files)

    def sweep_n(self, n_values: Sequence[int]) -> SweepOutcome:
        """
        For each n: fresh problem, auto-configured PAGE (finite mode), one run per seed.

        The cost column is paper_calls - b (the iteration part of the
        gradient count); its log-log slope against n is fitted when at
        least two distinct n are given.
        """
        if list(n_values) != sorted(n_values):
            raise InvalidParameterError(f"n values must be ascending, got {list(n_values)}")
        spec = self.spec
        rows: List[SweepRow] = []
        for n in n_values:
            problem = build_problem(spec.problem.model_copy(update={"params": {**spec.problem.params, "n": n}}))
            config = auto_config(problem, spec.epsilon, mode="finite", x0=spec.x0)
            results = self.run_seeds(problem, config, spec.seeds)
            params = config.params
            costs = [r.paper_calls - params.b for r in results.values()]
            mean_cost, se_cost = mean_and_se(costs)
            rows.append(SweepRow(
                n=n, b=params.b, b_prime=params.b_prime, p=params.p, eta=config.eta, T=config.T,
                seeds=len(results),
                theory_cost=config.T * (params.p * params.b + (1.0 - params.p) * params.b_prime),
                mean_cost=mean_cost, se_cost=se_cost,
            ))
            self.logger.info(f"n={n}: T={config.T}, mean cost {mean_cost:.6g} (theory {rows[-1].theory_cost:.6g})")

        slope = fit_loglog_slope([r.n for r in rows], [r.mean_cost for r in rows])
        if slope is None:
            self.logger.warning("Sweep has fewer than two distinct n values; slope undefined")
        files = [
            export.write_sweep(self.output_dir / "sweep_n.csv", rows),
            export.write_json(self.output_dir / "sweep_n_fit.json", {"slope": slope, "n_values": list(n_values)}),
        ]
        return SweepOutcome(rows=rows, slope=slope, files=files)

    def compare(self) -> Tuple[List[CompareRow], List[Path]]:
        """
        PAGE, SGD and GD under PAGE's expected paper-call budget and stepsize.

        SGD uses b = b' of PAGE; each baseline gets T = max(1, floor(budget / b) - 1)
        so that its b (T + 1) calls fit the budget.
        """
        problem = self.build_problem()
        page = self.resolve_config(problem, "page")
        budget = grad_complexity(page.params.b, page.T, page.params.p, page.params.b_prime)

        configs: Dict[str, PageConfig] = {"page": page}
        b_sgd = page.params.b_prime
        configs["sgd"] = _baseline(page, b_sgd, budget)
        if not problem.is_streaming:
            configs["gd"] = _baseline(page, problem.n, budget)

        rows = []
        for algorithm, config in configs.items():
            results = self.run_seeds(problem, config, self.spec.seeds)
            norms = []
            for seed in sorted(results):
                grad_sq, _ = _final_measurements(problem, results[seed])
                norms.append(math.sqrt(grad_sq))
            mean_norm, se_norm = mean_and_se(norms)
            mean_calls, _ = mean_and_se([float(r.paper_calls) for r in results.values()])
            rows.append(CompareRow(
                algorithm=algorithm, T=config.T, b=config.params.b, b_prime=config.params.b_prime,
                p=config.params.p, eta=config.eta, mean_paper_calls=mean_calls,
                mean_final_grad_norm=mean_norm, se_final_grad_norm=se_norm,
            ))
            self.logger.info(f"{algorithm}: T={config.T}, mean |grad f(x_hat)| = {mean_norm:.6g} +/- {se_norm:.2g}")
        files = [export.write_compare(self.output_dir / "compare.csv", rows)]
        return rows, files


def _with_seed(config: PageConfig, seed: int) -> PageConfig:
    return PageConfig(
        eta=config.eta, params=config.params, T=config.T, epsilon=config.epsilon, seed=seed,
        x0=config.x0, diagnostics_interval=config.diagnostics_interval, mode=config.mode,
    )


def _baseline(page: PageConfig, b: int, budget: float) -> PageConfig:
    T = max(1, int(math.floor(budget / b)) - 1)
    return PageConfig(
        eta=page.eta, params=EstimatorParams(b=b, b_prime=1, p=1.0), T=T, epsilon=page.epsilon,
        x0=page.x0, diagnostics_interval=page.diagnostics_interval, mode=page.mode,
    )


def _final_measurements(problem: FiniteSumProblem, result: RunResult) -> Tuple[float, float]:
    """(||grad f(x_hat)||^2, f(x_hat)), read from the trace when the chosen record exists."""
    record = result.chosen_record
    if record is not None and record.grad_norm_sq is not None:
        return record.grad_norm_sq, record.f_val
    return norm_sq(problem.full_gradient(result.x_hat)), problem.value(result.x_hat)


def fit_loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> Optional[float]:
    """Least-squares slope of log y against log x; None with fewer than two distinct x or non-positive y."""
    if len(set(xs)) < 2 or any(y <= 0 for y in ys):
        return None
    slope, _ = np.polyfit(np.log(xs), np.log(ys), 1)
    return float(slope)


def run_experiment(spec: ExperimentSpec, max_workers: Optional[int] = None) -> ExperimentOutcome:
    """Convenience function: run a spec and save its outputs."""
    return ExperimentRunner(spec, max_workers=max_workers).run()
