"""
Command routing and execution for the fracpr command line.
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

from .analysis import (
    bifurcation_scan,
    detect_peaks,
    estimate_transient,
    firing_mode,
    periodicity_test,
)
from .config import RunConfig, RunPlan
from .exceptions import (
    AnalysisError,
    ComputeError,
    ConfigurationError,
    FracPRError,
    InsufficientSpikes,
)
from .pinsky_rinzel import VD, VS, current_traces, simulate
from .stability import analyze_equilibrium, scan_stable_intervals
from .writers import (
    write_bifurcation,
    write_equilibrium,
    write_manifest,
    write_spike_metrics,
    write_stability_scan,
    write_trajectory,
)

L = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_COMPUTE_ERROR = 1
EXIT_CONFIG_ERROR = 2

TRANSIENT_WINDOW = 200.0  # ms
TRANSIENT_TOLERANCE = 0.1


@dataclass
class RouteResult:
    """What a command produced besides its CSV."""

    failed: list[tuple[float, str]] = field(default_factory=list)
    exit_code: int = EXIT_OK


class Runner:
    """Routes a validated RunConfig to the command that computes it."""

    def __init__(self, config: RunConfig, plan: RunPlan) -> None:
        """
        Initialize the runner.

        Args:
            config: The run configuration as given
            plan: Models built by ``config.validate()``
        """
        self.config = config
        self.plan = plan

        # Define the routing table
        self.routes: dict[str, Callable[[], RouteResult]] = {
            "simulate": self._simulate,
            "bifurcate": self._bifurcate,
            "stability-scan": self._stability_scan,
            "equilibrium": self._equilibrium,
            "spike-metrics": self._spike_metrics,
        }

    def execute(self) -> RouteResult:
        handler = self.routes[self.config.command]
        return handler()

    def _simulate(self) -> RouteResult:
        plan = self.plan
        trajectory = simulate(plan.params, plan.alpha, plan.solver, plan.gates)
        currents = None
        if self.config.include_currents:
            currents = current_traces(trajectory, plan.params, plan.gates)
        write_trajectory(self.config.output, trajectory, currents)
        return RouteResult()

    def _bifurcate(self) -> RouteResult:
        plan = self.plan
        assert plan.scan_param is not None
        scan = bifurcation_scan(
            plan.scan_param,
            self.config.scan_values(),
            plan.params,
            plan.alpha,
            plan.solver,
            transient_cut=self.config.transient_cut,
            gates=plan.gates,
            threshold_offset=self.config.threshold_offset,
            workers=self.config.workers,
        )
        write_bifurcation(self.config.output, scan)
        failed = [
            (float(v), e)
            for v, e in zip(scan.parameter_values, scan.errors)
            if e is not None
        ]
        return RouteResult(failed, EXIT_COMPUTE_ERROR if failed else EXIT_OK)

    def _stability_scan(self) -> RouteResult:
        plan, config = self.plan, self.config
        assert plan.scan_param is not None
        assert config.scan_from is not None and config.scan_to is not None
        assert config.increment is not None
        report = scan_stable_intervals(
            plan.scan_param,
            config.scan_from,
            config.scan_to,
            config.increment,
            plan.params,
            plan.alpha,
            gates=plan.gates,
            seed_mode=config.seed_mode,
            workers=config.workers,
        )
        write_stability_scan(config.output, report)
        # Non-converged cells are classified unstable, not treated as failures
        failed = [(v, "no convergence; counted unstable") for v in report.failed_values]
        return RouteResult(failed, EXIT_OK)

    def _equilibrium(self) -> RouteResult:
        plan = self.plan
        report = analyze_equilibrium(plan.params, plan.alpha, gates=plan.gates)
        write_equilibrium(self.config.output, report)
        L.info(
            f"equilibrium residual {report.residual_norm:.3e}, verdict "
            f"{report.verdict.value if report.verdict else 'none'}"
        )
        if report.converged:
            return RouteResult()
        return RouteResult(
            [(plan.params.i_sapp, f"Newton residual {report.residual_norm:.3e}")],
            EXIT_COMPUTE_ERROR,
        )

    def _spike_metrics(self) -> RouteResult:
        plan, config = self.plan, self.config
        trajectory = simulate(plan.params, plan.alpha, plan.solver, plan.gates)
        cut = config.transient_cut if config.transient_cut < trajectory.t_end else 0.0
        steady = trajectory.after(cut)
        threshold = float(steady.component(VS).mean()) + config.threshold_offset
        spikes = detect_peaks(steady, VS, threshold)

        metrics: list[tuple[str, Any]] = [
            ("n_spikes", len(spikes)),
            ("transient_cut", cut),
            ("threshold", threshold),
            ("mean_isi", float(spikes.isi.mean()) if len(spikes.isi) else math.nan),
            ("isi_cv", spikes.isi_cv),
            (
                "refractory_estimate",
                math.nan if spikes.refractory_estimate is None else spikes.refractory_estimate,
            ),
            ("firing_mode", firing_mode(spikes).value),
        ]
        try:
            periodicity = periodicity_test(spikes)
            metrics += [
                ("periodic", int(periodicity.is_periodic)),
                ("period", math.nan if periodicity.period is None else periodicity.period),
                ("period_order", periodicity.order),
            ]
        except InsufficientSpikes as e:
            L.warning(f"periodicity undetermined: {e}")
            metrics += [("periodic", ""), ("period", math.nan), ("period_order", 0)]
        try:
            estimate = estimate_transient(
                trajectory, VD, TRANSIENT_WINDOW, TRANSIENT_TOLERANCE
            )
            metrics += [("transient_estimate", estimate.t_transient)]
        except AnalysisError as e:
            L.debug(f"transient estimate skipped: {e}")
            metrics += [("transient_estimate", math.nan)]

        write_spike_metrics(config.output, spikes, metrics)
        return RouteResult()


def run(config: RunConfig) -> int:
    """
    Validate ``config``, run its command and write the outputs.

    Returns:
        0 on success, 1 on compute errors (partial outputs kept, manifest lists
        failed cells), 2 on configuration errors
    """
    try:
        plan = config.validate()
    except ConfigurationError as e:
        L.error(f"configuration error: {e}")
        return EXIT_CONFIG_ERROR

    L.info(f"{config.command}: alpha={plan.alpha.alpha}, output={config.output}")
    runner = Runner(config, plan)
    try:
        result = runner.execute()
    except (ComputeError, AnalysisError, ArithmeticError) as e:
        reason = str(e) if isinstance(e, FracPRError) else f"{type(e).__name__}: {e}"
        L.error(f"{config.command} failed: {reason}")
        write_manifest(config.output, config.command, config.echo(), status=f"error: {reason}")
        return EXIT_COMPUTE_ERROR

    status = "ok" if result.exit_code == EXIT_OK else "partial"
    manifest = write_manifest(
        config.output, config.command, config.echo(), result.failed, status=status
    )
    L.info(f"{config.command} finished ({status}); manifest {manifest}")
    return result.exit_code
