"""Command-line entry point: ``sim KIND --config PATH [--seed N] [--out DIR]``."""

from __future__ import annotations

import logging
from collections.abc import Sequence

import click

from .config import load_config
from .enums import ExperimentKind
from .exceptions import FedSubspaceError
from .experiments import EXIT_CONFIG_ERROR, EXIT_OK, run_experiment

logger = logging.getLogger(__name__)

_LOG_LEVELS = (logging.WARNING, logging.INFO, logging.DEBUG)


def _configure_logging(verbose: int) -> None:
    level = _LOG_LEVELS[min(verbose, len(_LOG_LEVELS) - 1)]
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


@click.command(context_settings={"help_option_names": ["-h", "--help"]})
@click.argument("kind", type=click.Choice([kind.value for kind in ExperimentKind]))
@click.option(
    "--config",
    "config_path",
    required=True,
    type=click.Path(dir_okay=False, path_type=str),
    help="Experiment configuration file (key = value lines).",
)
@click.option("--seed", type=click.IntRange(min=0), default=None, help="Override the seed.")
@click.option("--out", default=None, help="Override the output directory.")
@click.option("-v", "--verbose", count=True, help="Log more (-v info, -vv debug).")
@click.pass_context
def sim(
    ctx: click.Context,
    kind: str,
    config_path: str,
    seed: int | None,
    out: str | None,
    verbose: int,
) -> int:
    """Run one simulation experiment and write its CSV and JSON artifacts."""
    _configure_logging(verbose)
    try:
        config = load_config(config_path)
    except (FedSubspaceError, OSError, UnicodeDecodeError) as exc:
        click.echo(f"error: {config_path}: {exc}", err=True)
        ctx.exit(EXIT_CONFIG_ERROR)

    config = config.replace(kind=ExperimentKind(kind))
    if seed is not None:
        config = config.replace(sim=config.sim.replace(seed=seed))
    if out is not None:
        config = config.replace(out=out)

    code = run_experiment(config)
    if code != EXIT_OK:
        ctx.exit(code)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    """Console-script wrapper mapping usage errors to exit status 1."""
    try:
        result = sim.main(args=list(argv) if argv is not None else None, standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        return EXIT_CONFIG_ERROR
    except click.exceptions.Abort:
        click.echo("Aborted!", err=True)
        return EXIT_CONFIG_ERROR
    return int(result or EXIT_OK)


if __name__ == "__main__":
    raise SystemExit(main())
