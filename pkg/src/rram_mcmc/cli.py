"""``rram-mcmc`` command-line entry point.

Exit codes: 0 ok, 2 configuration error, 3 data error, 4 stuck chain.
Every flag can also be given through an ``RRAM_MCMC_*`` environment variable.
"""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import click

from . import __version__, experiments
from .config import ConfigError, config_from_dict, load_config, preset_dict, preset_names
from .crossbar import SnapshotError
from .mcmc import StuckChainError
from .supervised import DataError, write_breast_cancer_csv

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_STUCK = 4

log = logging.getLogger("rram_mcmc")


def _resolve(command, config, preset, seed, runs, jobs, out, no_d2d, no_lut):
    if config and preset:
        raise ConfigError("give either --config or --preset, not both")
    if not (config or preset):
        raise ConfigError("one of --config or --preset is required")
    cfg = load_config(config) if config else config_from_dict(preset_dict(preset))
    if cfg.command != command:
        raise ConfigError(f"configuration is for `{cfg.command}`, not `{command}`")
    data = cfg.to_dict()
    data["device"] = {k: v for k, v in data["device"].items() if v is not None}
    if data.get("sweep") is None:
        data.pop("sweep", None)
    if seed is not None:
        data["master_seed"] = seed
    if runs is not None:
        data["runs"] = runs
    if jobs is not None:
        data["jobs"] = jobs
    if out is not None:
        data["out"] = str(out)
    if no_d2d:
        data["mcmc"]["variability_mode"] = "cycle_only"
    if no_lut:
        data["device"]["use_lut"] = False
    return config_from_dict(data)


def _common(fn):
    opts = [
        click.option("--config", type=click.Path(dir_okay=False), envvar="RRAM_MCMC_CONFIG", help="YAML experiment file."),
        click.option("--preset", envvar="RRAM_MCMC_PRESET", help="Name of a bundled preset (see `rram-mcmc presets`)."),
        click.option("--seed", type=click.IntRange(0, 2**64 - 1), envvar="RRAM_MCMC_SEED", help="Master seed."),
        click.option("--runs", type=click.IntRange(min=1), envvar="RRAM_MCMC_RUNS", help="Independent runs R."),
        click.option("--jobs", type=click.IntRange(min=1), envvar="RRAM_MCMC_JOBS", help="Parallel worker processes."),
        click.option("--out", type=click.Path(file_okay=False), envvar="RRAM_MCMC_OUT", help="Output directory."),
        click.option("--no-d2d", is_flag=True, envvar="RRAM_MCMC_NO_D2D", help="Cycle-to-cycle variability only."),
        click.option("--no-lut", is_flag=True, envvar="RRAM_MCMC_NO_LUT", help="Program exact currents, no lookup table."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _plots_flag(fn):
    return click.option(
        "--plots/--no-plots", default=True, envvar="RRAM_MCMC_PLOTS", help="Render PNG figures next to the CSV files."
    )(fn)


def _timing_flag(fn):
    return click.option(
        "--timing", is_flag=True, envvar="RRAM_MCMC_TIMING", help="Record wall-clock time in run records (breaks byte-identity)."
    )(fn)


def _execute(command, opts, action):
    plain = {k: opts.pop(k) for k in ("config", "preset", "seed", "runs", "jobs", "out", "no_d2d", "no_lut")}
    try:
        cfg = _resolve(command, **plain)
        out = Path(cfg.out)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
        summary = action(cfg, out, **opts)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except StuckChainError as exc:
        run = getattr(exc, "run", None)
        click.echo(f"run {run} failed: {exc}", err=True)
        sys.exit(EXIT_STUCK)
    except (DataError, SnapshotError) as exc:
        click.echo(f"data error: {exc}", err=True)
        sys.exit(EXIT_DATA)
    except OSError as exc:
        click.echo(f"data error: {exc}", err=True)
        sys.exit(EXIT_DATA)
    click.echo(json.dumps({"out": str(out), **_jsonable(summary)}, sort_keys=True))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):
        return obj.item()
    return obj


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="rram-mcmc")
@click.option("-v", "--verbose", count=True, help="More logging (repeatable).")
def main(verbose):
    """Simulate in-memory MCMC sampling on resistive-memory crossbars."""
    logging.basicConfig(level=logging.WARNING - 10 * verbose, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@_common
@_plots_flag
def characterize(**opts):
    """Cycle simulated devices and refit the conductance power laws."""
    _execute("characterize", opts, experiments.run_characterize)


@main.command("train-supervised")
@_common
@_plots_flag
@_timing_flag
def train_supervised(**opts):
    """Train R supervised chains and evaluate each on its test split."""
    _execute("train-supervised", opts, experiments.run_train_supervised)


@main.command("train-rl")
@_common
@_plots_flag
@_timing_flag
def train_rl(**opts):
    """Train R cart-pole policy chains and score each on test episodes."""
    _execute("train-rl", opts, experiments.run_train_rl)


@main.command()
@_common
@click.option("--snapshot", type=click.Path(dir_okay=False), help="Override task.snapshot.")
@click.option("--inputs", type=click.Path(dir_okay=False), help="Override task.inputs (CSV of points).")
def infer(snapshot, inputs, **opts):
    """Evaluate a stored posterior on a CSV of points or a 2-D grid."""

    def action(cfg, out):
        task = cfg.task
        if snapshot:
            task = replace(task, snapshot=snapshot)
        if inputs:
            task = replace(task, inputs=inputs)
        if not task.snapshot:
            raise ConfigError("infer needs task.snapshot or --snapshot")
        return experiments.run_infer(replace(cfg, task=task), out)

    _execute("infer", opts, action)


@main.command()
@_common
@_plots_flag
def sweep(**opts):
    """Repeat an experiment for each value of one configuration parameter."""
    _execute("sweep", opts, experiments.run_sweep)


@main.command()
def presets():
    """List the bundled presets."""
    for name in preset_names():
        click.echo(name)


@main.command()
@click.argument("name", type=click.Choice(["breast-cancer"]))
@click.option("--out", type=click.Path(dir_okay=False), default="data/wdbc.csv", show_default=True)
def dataset(name, out):
    """Export a public dataset as CSV for the csv task kind."""
    path = write_breast_cancer_csv(out)
    click.echo(str(path))


if __name__ == "__main__":  # pragma: no cover
    main()
