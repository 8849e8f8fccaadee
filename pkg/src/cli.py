"""
Command-line surface for the irreducible-operator toolkit

    python src/cli.py perturb --input T.json --epsilon 0.1 --seed 0 --output T3.json --trace trace.json
    python src/cli.py check --input T.json
    python src/cli.py commutant --input T.json [--relative factor.json]
    python src/cli.py reduce --input T.json
    python src/cli.py sylvester --a A.json --b B.json --c C.json
    python src/cli.py verify --trace trace.json
    python src/cli.py experiment density --config cfg.json --out results.csv

Exit codes: 0 success, 1 error, 2 Borderline verdict.
"""

import json
import logging
import sys
from typing import List, Optional

import click

from commutant import CommutantResult, Verdict, commutant_basis, read_subalgebra, reducing_projection, relative_commutant
from config import ToolkitConfig, load_config_from_env, setup_logging
from density_experiment import ExperimentConfig, run_density_experiment, summarize, write_csv
from errors import ToolkitError
from matrix_io import array_to_json, dumps_matrix, matrix_to_json, read_array, read_matrix, write_json, write_matrix
from perturbation import perturb_to_irreducible, read_trace, verify_trace, write_trace
from rosenblum import SylvesterProblem, residual_norm, sylvester_solve

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BORDERLINE = 2

INPUT = click.Path(exists=True, dir_okay=False)


def _g(x: float) -> str:
    return f"{x:.17g}"


def _verdict_exit(result: CommutantResult) -> int:
    return EXIT_BORDERLINE if result.verdict == Verdict.BORDERLINE else EXIT_OK


def _tol(ctx: click.Context, tol: Optional[float]) -> float:
    return tol if tol is not None else ctx.obj.tol


@click.group()
@click.option("--log-level", default=None, help="Override LOG_LEVEL (DEBUG, INFO, WARNING, ...)")
@click.pass_context
def cli(ctx: click.Context, log_level: Optional[str]):
    """Perturb matrices to irreducible operators and certify the result."""
    config = load_config_from_env()
    if log_level:
        config.log_level = log_level.upper()
    setup_logging(config)
    ctx.obj = config


@cli.command()
@click.option("--input", "input_path", type=INPUT, required=True)
@click.option("--epsilon", type=float, required=True, help="Absolute perturbation budget (> 0)")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--output", type=click.Path(dir_okay=False), default=None, help="Write T3 here (stdout if omitted)")
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False), default=None)
@click.option("--tol", type=float, default=None)
@click.pass_context
def perturb(ctx, input_path, epsilon, seed, output, trace_path, tol):
    """Perturb T to an irreducible T3 with ||T - T3|| < EPSILON."""
    config: ToolkitConfig = ctx.obj
    t = read_matrix(input_path)
    trace = perturb_to_irreducible(t, epsilon, rng_seed=seed, tol=_tol(ctx, tol), robust_margin=config.robust_margin)
    if trace_path:
        write_trace(trace_path, trace)
    if output:
        write_matrix(output, trace.T3)
        click.echo(f"✅ T3 written to {output}")
        click.echo(f"distance: {_g(trace.bounds.t_t3)}")
        click.echo(f"epsilon: {_g(epsilon)}")
        click.echo(f"verdict: {trace.certificate.verdict.value}")
    else:
        click.echo(dumps_matrix(trace.T3))
    return EXIT_OK


@cli.command()
@click.option("--input", "input_path", type=INPUT, required=True)
@click.option("--tol", type=float, default=None)
@click.pass_context
def check(ctx, input_path, tol):
    """Decide whether T is irreducible."""
    result = commutant_basis(read_matrix(input_path), _tol(ctx, tol))
    click.echo(f"verdict: {result.verdict.value}")
    click.echo(f"dimension: {result.dimension}")
    click.echo(f"margin: {_g(result.singular_value_margin)}")
    return _verdict_exit(result)


@cli.command()
@click.option("--input", "input_path", type=INPUT, required=True)
@click.option("--relative", "relative_path", type=INPUT, default=None, help="SubalgebraSpec JSON of the ambient algebra")
@click.option("--tol", type=float, default=None)
@click.pass_context
def commutant(ctx, input_path, relative_path, tol):
    """Print a basis of the (relative) commutant as JSON."""
    s = read_matrix(input_path)
    if relative_path:
        result = relative_commutant(s, read_subalgebra(relative_path), _tol(ctx, tol))
    else:
        result = commutant_basis(s, _tol(ctx, tol))
    payload = result.summary()
    payload["basis"] = [matrix_to_json(x) for x in result.basis]
    click.echo(json.dumps(payload, allow_nan=False))
    return _verdict_exit(result)


@cli.command()
@click.option("--input", "input_path", type=INPUT, required=True)
@click.option("--tol", type=float, default=None)
@click.pass_context
def reduce(ctx, input_path, tol):
    """Print a nontrivial reducing projection, or "irreducible"."""
    s = read_matrix(input_path)
    tol = _tol(ctx, tol)
    result = commutant_basis(s, tol)
    if result.verdict == Verdict.BORDERLINE:
        click.echo(f"borderline (dimension {result.dimension})")
        return EXIT_BORDERLINE
    projection = reducing_projection(s, tol)
    if projection is None:
        click.echo("irreducible")
    else:
        click.echo(dumps_matrix(projection.matrix))
    return EXIT_OK


@cli.command()
@click.option("--a", "a_path", type=INPUT, required=True)
@click.option("--b", "b_path", type=INPUT, required=True)
@click.option("--c", "c_path", type=INPUT, required=True)
@click.option("--method", type=click.Choice(["dense", "schur"]), default="dense", show_default=True)
@click.option("--tol", type=float, default=None)
@click.pass_context
def sylvester(ctx, a_path, b_path, c_path, method, tol):
    """Solve AX - XB = C; print X as JSON, then a residual line."""
    problem = SylvesterProblem(read_matrix(a_path), read_matrix(b_path), read_array(c_path))
    x = sylvester_solve(problem, _tol(ctx, tol), method=method)
    residual = residual_norm(problem.A, problem.B, x, problem.C)
    click.echo(json.dumps(array_to_json(x), allow_nan=False))
    click.echo(f"residual: {_g(residual)} gap: {_g(problem.spectral_gap)}")
    return EXIT_OK


@cli.command()
@click.option("--trace", "trace_path", type=INPUT, required=True)
@click.option("--report", "report_path", type=click.Path(dir_okay=False), default=None)
def verify(trace_path, report_path):
    """Re-measure every bound of a saved trace and re-run its certificate."""
    report = verify_trace(read_trace(trace_path))
    for name, ok in report.checks.items():
        click.echo(f"{'✅' if ok else '❌'} {name}")
    if report_path:
        write_json(report_path, report.to_dict())
    return EXIT_OK if report.passed else EXIT_ERROR


@cli.group()
def experiment():
    """Empirical experiments."""


@experiment.command()
@click.option("--config", "config_path", type=INPUT, required=True, help="ExperimentConfig JSON")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--workers", type=int, default=None, help="Parallel trials (default from IRRED_WORKERS)")
@click.pass_context
def density(ctx, config_path, out_path, workers):
    """Perturb seeded random samples at every epsilon and write one CSV row per (trial, epsilon)."""
    config: ToolkitConfig = ctx.obj
    cfg = ExperimentConfig.from_json(config_path)
    records = run_density_experiment(
        cfg,
        tol=config.tol,
        robust_margin=config.robust_margin,
        workers=workers if workers is not None else config.workers,
        progress=config.progress,
    )
    write_csv(records, out_path)
    summary = summarize(records)
    click.echo(f"📊 {summary.line()}")
    return EXIT_OK


def cli_dispatch(argv: Optional[List[str]] = None) -> int:
    """Run the CLI and return its exit code instead of exiting"""
    try:
        rv = cli.main(args=argv, prog_name="irred", standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return EXIT_ERROR
    except click.Abort:
        click.echo("Aborted!", err=True)
        return EXIT_ERROR
    except (ToolkitError, ValueError, OSError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        click.echo(f"Error: {type(e).__name__}: {e}", err=True)
        return EXIT_ERROR
    return rv if isinstance(rv, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(cli_dispatch())
