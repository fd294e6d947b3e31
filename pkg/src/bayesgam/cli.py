"""CLI entry point for Bayes GAM."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any

import click
import numpy as np
import pandas as pd
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table
from rich.text import Text

from .config import Config, load_config
from .errors import BayesGamError, BudgetExhausted, SpecError
from .gam.fitting import FitResult, draw, fit, predict, term_values
from .gam.terms import GamModel, GpTerm, LinearTerm, LocalTerm
from .io.archive import archive_fit, load_archive, restore_fit, save_archive
from .io.spec import (
    ModelSpec,
    build_constraints,
    build_hyperspec,
    build_model,
    load_spec,
    resolve_spec,
)
from .io.tables import read_table, write_table
from .models import Objective
from .tracing import get_tracing, init_tracing
from .tuning.drivers import TuneResult, grid_scan, optimize
from .tuning.hyperspec import add_weak_priors
from .tuning.objectives import holdout_block

console = Console()
err_console = Console(stderr=True)
logger = logging.getLogger("bayesgam")

USER_ERRORS = (BayesGamError, ValidationError, json.JSONDecodeError, OSError)


class GamGroup(click.Group):
    """Command group mapping failures to exit codes 1 (user/data) and 2 (internal)."""

    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except (click.exceptions.Exit, click.exceptions.Abort, click.ClickException):
            raise
        except USER_ERRORS as exc:
            err_console.print(Text.assemble(("error: ", "bold red"), str(exc)))
            logger.debug("details", exc_info=True)
            ctx.exit(1)
        except Exception as exc:
            err_console.print(Text.assemble(("internal error: ", "bold red"), repr(exc)))
            logger.debug("traceback", exc_info=True)
            ctx.exit(2)
        finally:
            tracing = get_tracing()
            if tracing is not None:
                tracing.flush()


def _setup_logging(quiet: bool, verbose: bool) -> None:
    level = logging.WARNING if quiet else logging.DEBUG if verbose else logging.INFO
    handler = RichHandler(console=err_console, show_path=False, rich_tracebacks=False)
    root = logging.getLogger("bayesgam")
    root.handlers[:] = [handler]
    root.setLevel(level)
    root.propagate = False


def _config(ctx: click.Context) -> Config:
    config: Config = ctx.obj["config"]
    return config


def _fmt(value: float, digits: int = 17) -> str:
    return f"{value:.{digits}g}"


@click.group(cls=GamGroup)
@click.version_option(package_name="bayes-gam")
@click.option(
    "--config", "-c", "config_path", type=click.Path(exists=True), help="Config file path"
)
@click.option("--seed", type=click.IntRange(min=0), default=None, help="Random seed")
@click.option("--threads", type=click.IntRange(min=1), default=None, help="Worker threads")
@click.option("--quiet", "-q", is_flag=True, help="Only print warnings and errors")
@click.option("--verbose", "-v", is_flag=True, help="Print debug logging")
@click.pass_context
def main(
    ctx: click.Context,
    config_path: str | None,
    seed: int | None,
    threads: int | None,
    quiet: bool,
    verbose: bool,
) -> None:
    """Bayes GAM - Bayesian additive models as sparse linear-Gaussian systems."""
    ctx.ensure_object(dict)
    _setup_logging(quiet, verbose)

    config = load_config(Path(config_path) if config_path else None)
    updates: dict[str, int] = {}
    if seed is not None:
        updates["seed"] = seed
    if threads is not None:
        updates["threads"] = threads
    config = config.model_copy(update=updates)
    ctx.obj["config"] = config
    ctx.obj["quiet"] = quiet

    tracing = init_tracing(config)
    ctx.obj["tracing"] = tracing
    if config.langfuse.enabled:
        logger.info("Langfuse tracing enabled")


def _prepare(
    model_path: str, data_path: str, config: Config
) -> tuple[ModelSpec, pd.DataFrame, GamModel]:
    data = read_table(Path(data_path))
    spec = resolve_spec(load_spec(Path(model_path)), data)
    model = build_model(spec, energy_threshold=config.basis.energy_threshold)
    return spec, data, model


def _fit_table(result: FitResult, title: str) -> Table:
    table = Table(title=title)
    table.add_column("Term", style="cyan")
    table.add_column("Kind", style="yellow")
    table.add_column("Parameters", justify="right")
    for term in result.model.terms:
        table.add_row(term.name, term.kind, str(term.size))
    return table


def _print_summary(result: FitResult, quiet: bool) -> None:
    click.echo(f"N_obs {result.n_obs}")
    click.echo(f"N_par {result.model.n_par}")
    click.echo(f"neg_log_posterior {_fmt(result.objective)}")
    if result.constrained is not None:
        click.echo(f"active_constraints {int(result.constrained.active_set.size)}")
    if not quiet:
        console.print(_fit_table(result, "Fitted terms"))


@main.command("fit")
@click.argument("model_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("data_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_path", type=click.Path(dir_okay=False))
@click.pass_context
def fit_cmd(ctx: click.Context, model_path: str, data_path: str, out_path: str) -> None:
    """Fit MODEL_PATH to DATA_PATH and write a model archive to OUT_PATH."""
    config = _config(ctx)
    spec, data, model = _prepare(model_path, data_path, config)
    constraints = build_constraints(spec, model)
    tracing = ctx.obj["tracing"]
    with tracing.trace("fit", {"model": model_path, "rows": len(data)}) as trace:
        result = fit(
            model,
            data,
            constraints,
            jitter=config.linsys.jitter,
            pivot_tolerance=config.linsys.pivot_tolerance,
            backend=config.linsys.backend,
        )
        tracing.fit_summary(
            trace.id if trace else None,
            {"n_par": model.n_par, "neg_log_posterior": result.objective},
        )
    save_archive(Path(out_path), archive_fit(result, spec, data))
    _print_summary(result, ctx.obj["quiet"])


def _model_inputs(model: GamModel) -> list[str]:
    names: list[str] = []
    for term in model.terms:
        for name in (*term.inputs, term.multiplier):
            if name is not None and name not in names:
                names.append(name)
    return names


@main.command("predict")
@click.argument("archive_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("data_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_path", type=click.Path(dir_okay=False))
@click.option("--noise", is_flag=True, help="Add observation noise to the predictive std")
@click.pass_context
def predict_cmd(
    ctx: click.Context, archive_path: str, data_path: str, out_path: str, noise: bool
) -> None:
    """Predict at the rows of DATA_PATH; writes inputs, mean and std."""
    config = _config(ctx)
    result = restore_fit(load_archive(Path(archive_path)))
    data = read_table(Path(data_path))
    mean, var = predict(result, data, include_noise=noise)
    frame = data[_model_inputs(result.model)].copy()
    frame["mean"] = mean
    frame["std"] = np.sqrt(np.clip(var, 0.0, None))
    write_table(Path(out_path), frame, config.output.significant_digits)


@main.command("tune")
@click.argument("model_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("data_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_path", type=click.Path(dir_okay=False))
@click.option(
    "--method",
    type=click.Choice([o.value for o in Objective]),
    default=Objective.MAP.value,
    show_default=True,
    help="Tuning objective",
)
@click.option("--grid/--optimize", "use_grid", default=True, help="Grid scan or Nelder-Mead")
@click.option("--budget", type=click.IntRange(min=1), default=None, help="Optimizer evaluations")
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False), default=None,
              help="Trace CSV path (default <out>.trace.csv)")
@click.option("--holdout", type=click.IntRange(min=1), default=None,
              help="Rows held out at the end for cv")
@click.option("--weak-priors", is_flag=True, help="Add identity priors to unanchored local terms")
@click.option("--weak-prior-var", type=click.FloatRange(min=0.0, min_open=True), default=None,
              help="Variance of the weak priors (default tuning.weak_prior_var)")
@click.pass_context
def tune_cmd(
    ctx: click.Context,
    model_path: str,
    data_path: str,
    out_path: str,
    method: str,
    use_grid: bool,
    budget: int | None,
    trace_path: str | None,
    holdout: int | None,
    weak_priors: bool,
    weak_prior_var: float | None,
) -> None:
    """Tune hyperparameters, refit and write the tuned archive plus a trace CSV."""
    config = _config(ctx)
    spec, data, model = _prepare(model_path, data_path, config)
    hyper = build_hyperspec(spec)
    if hyper is None:
        raise SpecError(f"{model_path} declares no hyperparameters to tune")
    if weak_priors:
        weak_prior_var = weak_prior_var or config.tuning.weak_prior_var
        model = add_weak_priors(model, weak_prior_var)
    else:
        weak_prior_var = None
    objective = Objective(method)
    folds = None
    if objective is Objective.CV:
        folds = holdout_block(len(data), holdout or config.tuning.cv_holdout)
    tracing = ctx.obj["tracing"]

    with tracing.trace("tune", {"model": model_path, "method": method}):
        if use_grid:
            tuned = grid_scan(
                model,
                data,
                hyper,
                objective,
                folds=folds,
                threads=config.threads,
                grid_points=config.tuning.grid_points,
                pivot_tolerance=config.linsys.pivot_tolerance,
                backend=config.linsys.backend,
            )
        else:
            try:
                tuned = optimize(
                    model,
                    data,
                    hyper,
                    objective,
                    budget=budget or config.tuning.budget,
                    seed=config.seed,
                    folds=folds,
                    xatol=config.tuning.xatol,
                    fatol=config.tuning.fatol,
                    pivot_tolerance=config.linsys.pivot_tolerance,
                    backend=config.linsys.backend,
                )
            except BudgetExhausted as exc:
                logger.warning("%s; keeping the best point found", exc)
                tuned = exc.best

    trace_file = Path(trace_path) if trace_path else Path(out_path).with_suffix(".trace.csv")
    write_table(trace_file, tuned.to_frame(), config.output.significant_digits)

    final = tuned.tuned_model(model, hyper)
    result = fit(
        final,
        data,
        build_constraints(spec, final),
        jitter=config.linsys.jitter,
        pivot_tolerance=config.linsys.pivot_tolerance,
        backend=config.linsys.backend,
    )
    archive = archive_fit(result, spec, data, tuned.best, weak_prior_var)
    save_archive(Path(out_path), archive)
    _print_tuning(tuned, ctx.obj["quiet"])
    _print_summary(result, ctx.obj["quiet"])


def _print_tuning(tuned: TuneResult, quiet: bool) -> None:
    for name, value in tuned.best.items():
        click.echo(f"{name} {_fmt(value)}")
    click.echo(f"{tuned.objective.value}_objective {_fmt(tuned.objective_value)}")
    if quiet:
        return
    failed = sum(1 for p in tuned.trace if not p.ok)
    table = Table(title=f"Tuning ({tuned.method}, {tuned.objective.value})")
    table.add_column("Hyperparameter", style="cyan")
    table.add_column("Best", justify="right", style="green")
    for name, value in tuned.best.items():
        table.add_row(name, f"{value:.6g}")
    console.print(table)
    console.print(f"[dim]{len(tuned.trace)} evaluations, {failed} failed[/]")


def _query_points(
    result: FitResult, name: str, resolution: int, ranges: dict[str, tuple[float, float]]
) -> np.ndarray:
    term = result.model.term(name)
    if isinstance(term, LinearTerm):
        if name not in ranges:
            raise SpecError(f"archive has no input range for linear term '{name}'")
        lo, hi = ranges[name]
        return np.linspace(lo, hi, max(resolution, 2))[:, None]
    if isinstance(term, LocalTerm):
        return term.grid.refined(resolution).points()
    if isinstance(term, GpTerm):
        return term.basis.grid.refined(resolution).points()
    raise SpecError(f"term '{name}' of kind {term.kind} cannot be dumped")


@main.command("termdump")
@click.argument("archive_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("term_name")
@click.argument("out_path", type=click.Path(dir_okay=False))
@click.option("--resolution", type=click.IntRange(min=0), default=0, show_default=True,
              help="Points per axis; 0 uses the term's own knots")
@click.pass_context
def termdump_cmd(
    ctx: click.Context, archive_path: str, term_name: str, out_path: str, resolution: int
) -> None:
    """Write one term's posterior mean and std at query points."""
    config = _config(ctx)
    archive = load_archive(Path(archive_path))
    result = restore_fit(archive)
    points = _query_points(result, term_name, resolution, archive.input_ranges)
    mean, std = term_values(result, term_name, points)
    frame = pd.DataFrame(points, columns=list(result.model.term(term_name).inputs))
    frame["mean"] = mean
    frame["std"] = std
    write_table(Path(out_path), frame, config.output.significant_digits)


def _parameter_names(model: GamModel) -> list[str]:
    return [f"{t.name}[{i}]" for t in model.terms for i in range(t.size)]


@main.command("sample")
@click.argument("archive_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_path", type=click.Path(dir_okay=False))
@click.option("--count", "-n", type=int, default=100, show_default=True, help="Number of draws")
@click.option("--seed", type=click.IntRange(min=0), default=None, help="Overrides the global seed")
@click.pass_context
def sample_cmd(
    ctx: click.Context, archive_path: str, out_path: str, count: int, seed: int | None
) -> None:
    """Write posterior parameter draws, one row per draw."""
    config = _config(ctx)
    result = restore_fit(load_archive(Path(archive_path)))
    draws = draw(result, count, config.seed if seed is None else seed)
    frame = pd.DataFrame(draws, columns=_parameter_names(result.model))
    write_table(Path(out_path), frame, config.output.significant_digits)


@main.command("schema")
def schema_cmd() -> None:
    """Print the JSON schema of model specification documents."""
    click.echo(json.dumps(ModelSpec.model_json_schema(), indent=2))


if __name__ == "__main__":
    main()
