"""Command-line interface for the PAGE optimizer."""

import functools
import json
import platform
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import click
import numpy as np
import pandas as pd
import psutil
import pydantic
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from pageopt import __version__
from pageopt.core.experiment import export
from pageopt.core.experiment.runner import ExperimentRunner, default_workers
from pageopt.core.theory import initial_gap, theory_summary
from pageopt.core.theory import theory_inputs as collect_theory_inputs
from pageopt.core.utils.errors import PageOptError
from pageopt.core.utils.json_schema import CheckReport, ExperimentSpec, ProblemSpec, SummaryRow
from pageopt.core.utils.logging import get_logger, setup_logging
from pageopt.core.verifier import VerificationSuite

EXIT_FAILED_CHECK = 1
EXIT_INVALID_INPUT = 2

console = Console()


def parse_seeds(value: str) -> List[int]:
    """
    Parse "0-49", "1,2,5" or a mix such as "0-9,20".

    Raises:
        click.BadParameter: On malformed input
    """
    seeds: List[int] = []
    try:
        for part in value.split(","):
            part = part.strip()
            if not part:
                continue
            if "-" in part:
                lo, hi = (int(v) for v in part.split("-", 1))
                if hi < lo:
                    raise ValueError(f"empty range {part}")
                seeds.extend(range(lo, hi + 1))
            else:
                seeds.append(int(part))
    except ValueError as e:
        raise click.BadParameter(f"cannot parse seeds {value!r}: {e}")
    if not seeds:
        raise click.BadParameter("no seeds given")
    return seeds


def parse_int_list(value: str) -> List[int]:
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {value!r}")


def parse_params(pairs: tuple) -> Dict[str, Any]:
    """KEY=VALUE generator parameters; values are parsed as JSON when possible."""
    params: Dict[str, Any] = {}
    for pair in pairs:
        if "=" not in pair:
            raise click.BadParameter(f"expected KEY=VALUE, got {pair!r}")
        key, raw = pair.split("=", 1)
        try:
            params[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            params[key.strip()] = raw
    return params


def experiment_options(func: Callable) -> Callable:
    """Options shared by run, compare, sweep-n and theory."""
    options = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                     help="ExperimentSpec JSON file; flags override its values"),
        click.option("--problem", type=click.Choice(["shared_quadratic", "hetero_quadratic", "logistic"]),
                     help="Problem family"),
        click.option("--param", "params", multiple=True, metavar="KEY=VALUE",
                     help="Problem generator parameter (repeatable), e.g. --param n=100"),
        click.option("--problem-seed", type=int, help="Seed of the problem instance"),
        click.option("--algorithm", type=click.Choice(["page", "sgd", "gd"]), help="Algorithm (default: page)"),
        click.option("--mode", type=click.Choice(["finite", "online"]), help="Finite-sum or online setting"),
        click.option("--seeds", help="Run seeds, e.g. 0-49 or 1,2,3"),
        click.option("--epsilon", type=float, help="Target accuracy"),
        click.option("--eta", type=float, help="Stepsize (default: largest admissible)"),
        click.option("--p", "p", type=float, help="Switch probability (default: b'/(b+b'))"),
        click.option("--b", "b", type=int, help="Big minibatch size"),
        click.option("--b-prime", "b_prime", type=int, help="Small minibatch size"),
        click.option("--iters", type=int, help="Iteration count T"),
        click.option("--x0", type=click.Choice(["zeros", "ones", "gaussian"]), help="Initial point"),
        click.option("--out", "out", type=click.Path(file_okay=False), help="Output directory"),
        click.option("--diag-interval", "diag_interval", type=int, help="Diagnostics every k steps (0 = off)"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def build_spec(
    config_path: Optional[str] = None,
    problem: Optional[str] = None,
    params: tuple = (),
    problem_seed: Optional[int] = None,
    seeds: Optional[str] = None,
    out: Optional[str] = None,
    diag_interval: Optional[int] = None,
    iters: Optional[int] = None,
    **overrides: Any,
) -> ExperimentSpec:
    """
    Merge a JSON spec file with command-line overrides.

    Raises:
        ValidationError: If the merged spec is invalid
    """
    data: Dict[str, Any] = {}
    if config_path:
        data = export.load_spec(Path(config_path)).model_dump()

    problem_data = dict(data.get("problem") or ProblemSpec().model_dump())
    if problem is not None:
        if problem != problem_data.get("family"):
            problem_data["params"] = {}
        problem_data["family"] = problem
    if params:
        problem_data["params"] = {**problem_data.get("params", {}), **parse_params(params)}
    if problem_seed is not None:
        problem_data["seed"] = problem_seed
    data["problem"] = problem_data

    if seeds is not None:
        data["seeds"] = parse_seeds(seeds)
    if out is not None:
        data["output_dir"] = out
    if diag_interval is not None:
        data["diagnostics_interval"] = diag_interval
    if iters is not None:
        data["iters"] = iters
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentSpec.model_validate(data)


def handle_errors(command: str) -> Callable:
    """Map invalid input to exit 2 and unexpected failures to exit 1."""
    def decorator(func: Callable) -> Callable:
        @functools.wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            logger = get_logger(f"cli.{command}")
            try:
                return func(*args, **kwargs)
            except click.ClickException:
                raise
            except (ValidationError, PageOptError) as e:
                logger.error(f"Invalid input: {e}")
                click.echo(f"Error: {e}", err=True)
                sys.exit(EXIT_INVALID_INPUT)
            except Exception as e:
                logger.error(f"{command} failed: {e}", exc_info=True)
                click.echo(f"Error: {e}", err=True)
                sys.exit(EXIT_FAILED_CHECK)
        return wrapper
    return decorator


def _summary_table(rows: List[SummaryRow]) -> Table:
    table = Table(title="Run summary")
    for column in ("seed", "|grad f(x_hat)|", "f(x_hat)", "chosen t", "T", "paper calls", "oracle calls"):
        table.add_column(column, justify="right")
    for row in rows:
        table.add_row(
            str(row.seed), f"{row.final_grad_norm:.4g}", f"{row.final_f:.6g}", str(row.chosen_index),
            str(row.T), str(row.paper_calls), str(row.oracle_calls),
        )
    return table


def _report_table(reports: List[CheckReport]) -> Table:
    table = Table(title="Verification")
    for column in ("check", "lhs", "rhs", "margin", "SE", "result"):
        table.add_column(column, justify="right" if column != "check" else "left")
    for r in reports:
        se = "" if r.standard_error is None else f"{r.standard_error:.3g}"
        result = "[green]pass[/green]" if r.passed else "[red]FAIL[/red]"
        table.add_row(r.name, f"{r.lhs:.6g}", f"{r.rhs:.6g}", f"{r.margin:.3g}", se, result)
    return table


@click.group()
@click.version_option(version=__version__, prog_name="pageopt")
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose logging")
def cli(verbose: bool) -> None:
    """
    PAGE optimizer

    Variance-reduced SGD runs, closed-form theory and empirical verification.
    """
    setup_logging(verbose=verbose)


@cli.command()
@experiment_options
@handle_errors("run")
def run(**options: Any) -> None:
    """
    Run an experiment: one trace CSV per seed plus summary.csv.

    Examples:

      pageopt run --problem hetero_quadratic --param n=100 --seeds 0-49 --epsilon 0.1

      pageopt run --config experiment.json --algorithm gd --iters 200
    """
    spec = build_spec(**options)
    outcome = ExperimentRunner(spec).run()
    console.print(_summary_table(outcome.summary))
    mean_norm = float(np.mean([row.final_grad_norm for row in outcome.summary]))
    click.echo(f"Mean |grad f(x_hat)|: {mean_norm:.6g} (epsilon {spec.epsilon})")
    click.echo(f"Results saved to: {spec.output_dir}")


@cli.command()
@click.option("--level", type=click.Choice(["quick", "full"]), default="quick", show_default=True,
              help="quick: 10^4 replicates, full: 10^5")
@click.option("--seed", type=int, default=0, show_default=True, help="Root seed of the suite")
@click.option("--l-scale", type=float, default=1.0, show_default=True,
              help="Multiply every certified L (0.5 is the mutation test)")
@click.option("--out", "out", type=click.Path(file_okay=False), default="pageopt-out", show_default=True,
              help="Output directory for verify_report.csv")
@handle_errors("verify")
def verify(level: str, seed: int, l_scale: float, out: str) -> None:
    """
    Run every verifier check; exit 1 if any fails.

    Examples:

      pageopt verify --level quick

      pageopt verify --l-scale 0.5   # must fail
    """
    suite = VerificationSuite(level=level, seed=seed, l_scale=l_scale)
    reports = suite.run(max_workers=default_workers())
    path = export.write_reports(Path(out) / "verify_report.csv", reports)
    console.print(_report_table(reports))
    click.echo(f"Report saved to: {path}")

    failed = [r.name for r in reports if not r.passed]
    if failed:
        click.echo(f"{len(failed)} check(s) failed: {', '.join(failed)}", err=True)
        sys.exit(EXIT_FAILED_CHECK)
    click.echo(f"All {len(reports)} checks passed")


@cli.command("sweep-n")
@click.option("--n-values", default="100,1000,10000", show_default=True, help="Ascending component counts")
@experiment_options
@handle_errors("sweep-n")
def sweep_n(n_values: str, **options: Any) -> None:
    """
    Gradient cost of auto-configured PAGE as n grows; fits the log-log slope.

    Examples:

      pageopt sweep-n --n-values 100,1000,10000 --epsilon 0.1 --seeds 0-19
    """
    if options.get("problem") is None and not options.get("config_path"):
        options["problem"] = "hetero_quadratic"
    spec = build_spec(**options)
    outcome = ExperimentRunner(spec).sweep_n(parse_int_list(n_values))

    table = Table(title="Sweep over n")
    for column in ("n", "b'", "p", "T", "theory cost", "mean cost", "SE"):
        table.add_column(column, justify="right")
    for row in outcome.rows:
        table.add_row(str(row.n), str(row.b_prime), f"{row.p:.4g}", str(row.T),
                      f"{row.theory_cost:.6g}", f"{row.mean_cost:.6g}", f"{row.se_cost:.3g}")
    console.print(table)
    if outcome.slope is None:
        click.echo("Slope: undefined (need at least two distinct n)")
    else:
        click.echo(f"Log-log slope of cost vs n: {outcome.slope:.4f}")
    click.echo(f"Results saved to: {spec.output_dir}")


@cli.command()
@experiment_options
@handle_errors("compare")
def compare(**options: Any) -> None:
    """
    PAGE vs minibatch SGD vs GD under one paper-call budget.

    Examples:

      pageopt compare --problem hetero_quadratic --seeds 0-49
    """
    spec = build_spec(**options)
    rows, files = ExperimentRunner(spec).compare()

    table = Table(title="Equal-budget comparison")
    for column in ("algorithm", "T", "b", "b'", "p", "eta", "mean calls", "|grad f(x_hat)|", "SE"):
        table.add_column(column, justify="right")
    for row in rows:
        table.add_row(row.algorithm, str(row.T), str(row.b), str(row.b_prime), f"{row.p:.4g}",
                      f"{row.eta:.4g}", f"{row.mean_paper_calls:.6g}",
                      f"{row.mean_final_grad_norm:.4g}", f"{row.se_final_grad_norm:.2g}")
    console.print(table)
    click.echo(f"Results saved to: {files[0]}")


@cli.command()
@experiment_options
@handle_errors("theory")
def theory(**options: Any) -> None:
    """
    Print every closed-form quantity for a spec without running it.

    Examples:

      pageopt theory --problem hetero_quadratic --param n=100 --epsilon 0.1
    """
    spec = build_spec(**options)
    runner = ExperimentRunner(spec, max_workers=1)
    problem = runner.build_problem()
    config = runner.resolve_config(problem)
    inputs = collect_theory_inputs(problem, config, delta0=initial_gap(problem, spec.x0))
    summary = theory_summary(inputs, mode=spec.mode, T=config.T)

    table = Table(title=f"Theory for {problem!r}")
    table.add_column("quantity")
    table.add_column("value", justify="right")
    for key, value in {**inputs.model_dump(), **summary}.items():
        table.add_row(key, f"{value:.6g}" if isinstance(value, float) else str(value))
    console.print(table)


@cli.command()
def version() -> None:
    """Show version information."""
    click.echo(f"PAGE optimizer v{__version__}")
    click.echo("License: MIT")


@cli.command()
def info() -> None:
    """Show host and library information."""
    click.echo("System Information:")
    click.echo(f"  OS: {platform.system()} {platform.release()}")
    click.echo(f"  Python: {platform.python_version()}")
    click.echo(f"  CPU cores: {psutil.cpu_count(logical=False)} physical, {psutil.cpu_count()} logical")
    click.echo(f"  Memory: {psutil.virtual_memory().total / (1024**3):.1f} GB")
    click.echo(f"  Worker pool: {default_workers()} (set PAGE_OPT_THREADS to change)")

    click.echo("\nLibraries:")
    click.echo(f"  numpy: {np.__version__}")
    click.echo(f"  pandas: {pd.__version__}")
    click.echo(f"  pydantic: {pydantic.VERSION}")
    click.echo(f"  click: {click.__version__}")


if __name__ == "__main__":
    cli()
