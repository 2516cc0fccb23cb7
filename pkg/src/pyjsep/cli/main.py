"""The ``pyjsep`` command.

Exit status is 0 when every analysis ran (whatever its verdict), 1 when an
analysis raised and 2 for invalid scenarios or options.

"""

from __future__ import annotations

import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path

import click

from pyjsep import __version__
from pyjsep.cli.report import ReportRecord, emit_series
from pyjsep.cli.runner import run_scenario
from pyjsep.cli.scenario import load_scenario, parse_overrides
from pyjsep.errors import ConfigInvalid, NoSeries

logger = logging.getLogger(__name__)

EXIT_ANALYSIS_ERROR = 1
EXIT_CONFIG_INVALID = 2

_LEVELS = (logging.WARNING, logging.INFO, logging.DEBUG)


@click.group()
@click.version_option(__version__, prog_name="pyjsep")
@click.option("-v", "--verbose", count=True, help="Repeat for more log output.")
def cli(verbose: int):
    """Cone-field and hyperbolicity checks driven by scenario files."""
    logging.basicConfig(
        level=_LEVELS[min(verbose, len(_LEVELS) - 1)],
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


def _scenario_options(func):
    options = [
        click.argument(
            "scenarios", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False)
        ),
        click.option("--jobs", "-j", default=1, show_default=True, type=click.IntRange(min=1),
                     help="Scenarios run in parallel."),
        click.option("--seed", type=int, default=None, help="Override the scenario seeds."),
        click.option("--tol-override", "tol_overrides", multiple=True, metavar="KEY=VALUE",
                     help="Override a tolerance; may be repeated."),
        click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
                     help="Directory for report files."),
        click.option("--series", is_flag=True, help="Also write one series file per analysis."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _execute(
    scenarios: tuple[str, ...],
    jobs: int,
    seed: int | None,
    tol_overrides: tuple[str, ...],
    out_dir: str | None,
    series: bool,
    kinds: tuple[str, ...] | None = None,
):
    try:
        overrides = parse_overrides(tol_overrides)
        # Validate every file before running any of them.
        loaded = [
            load_scenario(path).with_overrides(seed=seed, tolerances=overrides)
            for path in scenarios
        ]
    except ConfigInvalid as exc:
        click.echo(f"Invalid scenario: {exc}", err=True)
        sys.exit(EXIT_CONFIG_INVALID)

    run = partial(run_scenario, kinds=kinds)
    if jobs > 1 and len(loaded) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(run, loaded))
    else:
        records = [run(s) for s in loaded]

    for scenario, record in zip(loaded, records):
        for line in record.summary():
            click.echo(line)
        target = out_dir or scenario.output.get("dir")
        if target is None:
            continue
        directory = Path(target)
        directory.mkdir(parents=True, exist_ok=True)
        report_path = directory / f"{record.scenario}.json"
        record.to_file(report_path)
        logger.info("Wrote %s", report_path)
        if series or scenario.output.get("series", False):
            for result in record.analyses:
                if result.series is None:
                    continue
                series_path = directory / f"{record.scenario}.{result.analysis_id}.tsv"
                series_path.write_text(result.series.to_text(), encoding="utf-8")
                logger.info("Wrote %s", series_path)

    if any(r.errored for r in records):
        sys.exit(EXIT_ANALYSIS_ERROR)


@cli.command(name="run")
@_scenario_options
def run_command(**kwargs):
    """Run every analysis of the scenario files."""
    _execute(**kwargs)


def _subset_command(name: str, kinds: tuple[str, ...], help_text: str):
    @cli.command(name=name, help=help_text)
    @_scenario_options
    def command(**kwargs):
        _execute(kinds=kinds, **kwargs)

    return command


operator_command = _subset_command(
    "operator", ("operator-check",), "Run the operator-check analyses of the scenario files."
)
equilibria_command = _subset_command(
    "equilibria", ("equilibria",), "Locate equilibria listed in the scenario files."
)
orbit_command = _subset_command(
    "orbit",
    ("periodic-orbit", "orbit-check"),
    "Run the periodic-orbit and orbit-check analyses of the scenario files.",
)
star_command = _subset_command(
    "star", ("star-check",), "Run the star-check analyses of the scenario files."
)
lyapunov_command = _subset_command(
    "lyapunov", ("lyapunov",), "Run the Lyapunov exponent analyses of the scenario files."
)
bounds_command = _subset_command(
    "bounds", ("bounds-check",), "Run the exponent bounds analyses of the scenario files."
)


@cli.command(name="report")
@click.argument("report", type=click.Path(exists=True, dir_okay=False))
@click.option("--series", "series_id", default=None, metavar="ID",
              help="Print the series of one analysis instead of the summary.")
def report_command(report: str, series_id: str | None):
    """Print the summary or one series of a saved report."""
    record = ReportRecord.from_file(report)
    if series_id is None:
        for line in record.summary():
            click.echo(line)
        return
    try:
        click.echo(emit_series(record, series_id), nl=False)
    except (NoSeries, KeyError) as exc:
        click.echo(str(exc), err=True)
        sys.exit(EXIT_ANALYSIS_ERROR)
