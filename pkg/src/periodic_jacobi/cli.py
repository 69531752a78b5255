"""Command line entry point: ``periodic-jacobi {bands,evolve,velocity,verify}``.

Exit codes: 0 when every assertion passes, 1 when one fails, 2 for a bad
configuration and 3 when a resource guard stops the run.
"""
from __future__ import annotations

import dataclasses
import logging
import sys

import click

from . import __version__
from .config import ConfigError, ExperimentConfig, SchemaError, VerifyTask, parse_config
from .errors import JacobiError, ResourceGuard
from .harness import run

EXIT_OK, EXIT_ASSERTION, EXIT_CONFIG, EXIT_RESOURCE = 0, 1, 2, 3


def _load(kind, config_path, seed):
    if config_path is None:
        if kind != "verify":
            raise click.UsageError(f"'{kind}' needs --config")
        config = ExperimentConfig(None, VerifyTask())
    else:
        with open(config_path) as fh:
            config = parse_config(fh.read())
    if config.task.kind != kind:
        raise ConfigError([SchemaError("task.kind", f"the {kind} command needs a '{kind}' task, got '{config.task.kind}'")])
    if seed is not None:
        config = dataclasses.replace(config, seed=seed)
        if kind == "verify":
            config = dataclasses.replace(config, task=dataclasses.replace(config.task, seeds=(seed,)))
    return config


def _execute(kind, config_path, out, seed, threads):
    try:
        config = _load(kind, config_path, seed)
    except ConfigError as exc:
        click.echo("error: invalid configuration", err=True)
        for e in exc.errors:
            click.echo(f"  {e}", err=True)
        sys.exit(EXIT_CONFIG)
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        report = run(config, out_dir=out, threads=threads)
    except ResourceGuard as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_RESOURCE)
    except JacobiError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    failed = [a for a in report.assertions if not a.verdict]
    click.echo(f"{kind}: {len(report.assertions) - len(failed)}/{len(report.assertions)} assertions passed "
               f"({report.wall_time:.2f}s) -> {', '.join(report.files + ['report.json'])}")
    for a in failed:
        click.echo(f"  FAIL {a.name}: {a.measured!r} {a.relation} {a.threshold!r} does not hold", err=True)
    sys.exit(EXIT_ASSERTION if failed else EXIT_OK)


def _common(fn):
    fn = click.option("--threads", type=click.IntRange(min=1), default=None,
                      help="Worker threads; affects speed only.")(fn)
    fn = click.option("--seed", type=click.IntRange(min=0), default=None,
                      help="Override the configured seed.")(fn)
    fn = click.option("--out", type=click.Path(file_okay=False), default=None,
                      help="Output directory (beats $PERIODIC_JACOBI_OUT and the config).")(fn)
    return fn


@click.group()
@click.version_option(__version__, prog_name="periodic-jacobi")
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose):
    """Band structures and ballistic transport for periodic Jacobi operators."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), required=True)
@_common
def bands(config_path, out, seed, threads):
    """Bands and velocities on a theta grid (bands.csv)."""
    _execute("bands", config_path, out, seed, threads)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), required=True)
@_common
def evolve(config_path, out, seed, threads):
    """Evolve a state on a box or torus and trace its moments (trace.csv)."""
    _execute("evolve", config_path, out, seed, threads)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), required=True)
@_common
def velocity(config_path, out, seed, threads):
    """Compare X_k(t)/t with the asymptotic velocity (velocity_axis<k>.csv)."""
    _execute("velocity", config_path, out, seed, threads)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@_common
def verify(config_path, out, seed, threads):
    """Run the self-checking suites (verify.csv); no config needed."""
    _execute("verify", config_path, out, seed, threads)


if __name__ == "__main__":
    main()
