#!/usr/bin/env python3
"""
Main CLI entry point for fracpr.
"""

import logging
import sys
from collections.abc import Callable
from pathlib import Path
from typing import Any, Optional

import click

from . import __version__
from .config import RunConfig, read_config_file
from .exceptions import ConfigurationError
from .runner import EXIT_CONFIG_ERROR, run

# Set up logging
logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
L = logging.getLogger(__name__)

# Model parameters with their own flag; any other field goes through --set
_PARAM_FLAGS = ("i_sapp", "i_dapp", "g_c")


def _parse_assignments(values: tuple[str, ...]) -> dict[str, float]:
    overrides = {}
    for item in values:
        key, sep, value = item.partition("=")
        if not sep:
            raise click.BadParameter(f"expected KEY=VALUE, got {item!r}", param_hint="--set")
        try:
            overrides[key.strip().replace("-", "_")] = float(value)
        except ValueError:
            raise click.BadParameter(
                f"{key.strip()}: not a number: {value!r}", param_hint="--set"
            ) from None
    return overrides


def common_options(func: Callable[..., Any]) -> Callable[..., Any]:
    """Model, solver and output options shared by every command."""
    options = [
        click.option(
            "--config",
            "config_file",
            type=click.Path(exists=True, dir_okay=False, path_type=Path),
            help="Flat key = value config file (flags override it)",
        ),
        click.option("--preset", type=click.Choice(["canonical", "table"]), help="Parameter preset"),
        click.option("--alpha", type=float, help="Fractional order, 0 < alpha <= 1"),
        click.option("--step-size", type=float, help="Solver step in ms"),
        click.option("--t-end", type=float, help="Integration horizon in ms"),
        click.option("--memory-window", type=int, help="Short-memory window in steps"),
        click.option("--corrector-iterations", type=int, help="Corrector passes per step"),
        click.option("--gates", type=click.Choice(["smooth", "nonsmooth"]), help="Ca-gate rate set"),
        click.option("--i-sapp", type=float, help="Somatic injected current"),
        click.option("--i-dapp", type=float, help="Dendritic injected current"),
        click.option("--g-c", type=float, help="Coupling conductance"),
        click.option(
            "--set",
            "assignments",
            multiple=True,
            metavar="KEY=VALUE",
            help="Override any model parameter, e.g. --set g_ca=12",
        ),
        click.option("--output", "-o", type=click.Path(path_type=Path), help="Output CSV path"),
        click.option("--workers", type=int, help="Parallel scan workers (env FRACPR_WORKERS)"),
        click.option("--debug", is_flag=True, help="Enable debug logging"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def scan_options(func: Callable[..., Any]) -> Callable[..., Any]:
    options = [
        click.option("--param", "scan_param", help="alpha, i-sapp or i-dapp"),
        click.option("--from", "scan_from", type=float, help="First scanned value"),
        click.option("--to", "scan_to", type=float, help="Last scanned value"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _execute(command: str, config_file: Optional[Path], assignments: tuple[str, ...],
             debug: bool, **fields: Any) -> None:
    if debug:
        logging.getLogger().setLevel(logging.DEBUG)

    overrides = {name: fields.pop(name) for name in _PARAM_FLAGS}
    overrides.update(_parse_assignments(assignments))

    # Precedence: defaults < environment < config file < flags
    try:
        config = RunConfig.from_env()
        if config_file is not None:
            values, file_overrides = read_config_file(config_file)
            config = config.apply(values, file_overrides)
        config = config.apply({"command": command, "debug": debug or None, **fields}, overrides)
    except ConfigurationError as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)

    sys.exit(run(config))


@click.group()
@click.version_option(version=__version__, prog_name="fracpr")
def main() -> None:
    """
    fracpr - fractional-order Pinsky-Rinzel neuron toolkit

    Simulate the two-compartment cell with a Caputo derivative, sweep
    bifurcation parameters and classify equilibria. Every command writes a
    CSV plus a <output>.manifest file.
    """


@main.command()
@common_options
@click.option("--currents", is_flag=True, help="Append the eight ionic/coupling current columns")
def simulate(currents: bool, **kwargs: Any) -> None:
    """Integrate the cell and write the trajectory."""
    _execute("simulate", include_currents=currents or None, **kwargs)


@main.command()
@common_options
@scan_options
@click.option("--steps", "scan_steps", type=int, help="Number of scanned values")
@click.option("--transient-cut", type=float, help="Discard samples before this time (ms)")
@click.option("--threshold-offset", type=float, help="Peak threshold above the mean V_s (mV)")
def bifurcate(**kwargs: Any) -> None:
    """Post-transient V_s peak values across a parameter sweep."""
    _execute("bifurcate", **kwargs)


@main.command("stability-scan")
@common_options
@scan_options
@click.option("--increment", type=float, help="Grid spacing")
@click.option("--seed-mode", type=click.Choice(["warm", "canonical"]), help="Newton seeding")
def stability_scan(**kwargs: Any) -> None:
    """Stable intervals of the equilibrium over I_Sapp or I_Dapp."""
    _execute("stability-scan", **kwargs)


@main.command()
@common_options
def equilibrium(**kwargs: Any) -> None:
    """Equilibrium, Jacobian spectrum and stability verdict."""
    _execute("equilibrium", **kwargs)


@main.command("spike-metrics")
@common_options
@click.option("--transient-cut", type=float, help="Discard samples before this time (ms)")
@click.option("--threshold-offset", type=float, help="Peak threshold above the mean V_s (mV)")
def spike_metrics(**kwargs: Any) -> None:
    """Somatic peaks plus ISI, periodicity and firing-mode summary."""
    _execute("spike-metrics", **kwargs)


if __name__ == "__main__":
    main()
