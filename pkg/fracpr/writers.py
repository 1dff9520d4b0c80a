"""
CSV emission for every command, plus the per-run manifest.

All floats are written with 17 significant digits so values read back
bit-identical.
"""

import logging
from collections.abc import Sequence
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional, TextIO

import numpy as np
import pandas as pd

from .analysis import BifurcationScan, SpikeTrain
from .fde_solver import Trajectory
from .pinsky_rinzel import CURRENT_LABELS, STATE_LABELS
from .stability import EquilibriumReport, StableIntervalReport

L = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"

TRAJECTORY_COLUMNS = ("t",) + STATE_LABELS
BIFURCATION_COLUMNS = ("param", "peak_value")
STABILITY_COLUMNS = ("param", "verdict", "residual", "min_arg", "threshold")
EQUILIBRIUM_COLUMNS = ("component", "value")
SPECTRUM_COLUMNS = ("eig_re", "eig_im")
SPIKE_COLUMNS = ("peak_time", "peak_value")
METRIC_COLUMNS = ("metric", "value")


def _emit(frame: pd.DataFrame, handle: TextIO) -> None:
    frame.to_csv(handle, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def _open(path: Path) -> TextIO:
    path.parent.mkdir(parents=True, exist_ok=True)
    return path.open("w", encoding="utf-8", newline="")


def write_trajectory(
    path: Path, trajectory: Trajectory, currents: Optional[np.ndarray] = None
) -> None:
    """``t,Vs,Vd,h,n,s,c,q,Ca`` and, when given, the eight current columns."""
    frame = pd.DataFrame(trajectory.states, columns=list(STATE_LABELS))
    frame.insert(0, "t", trajectory.times)
    if currents is not None:
        frame = pd.concat([frame, pd.DataFrame(currents, columns=list(CURRENT_LABELS))], axis=1)
    with _open(path) as handle:
        _emit(frame, handle)
    L.info(f"wrote trajectory ({len(trajectory)} samples) to {path}")


def write_bifurcation(path: Path, scan: BifurcationScan) -> None:
    frame = pd.DataFrame(scan.rows(), columns=list(BIFURCATION_COLUMNS))
    with _open(path) as handle:
        _emit(frame, handle)
    L.info(f"wrote {len(frame)} bifurcation samples to {path}")


def write_stability_scan(path: Path, report: StableIntervalReport) -> None:
    frame = pd.DataFrame(
        [(c.value, c.verdict.value, c.residual, c.min_arg, c.threshold) for c in report.cells],
        columns=list(STABILITY_COLUMNS),
    )
    with _open(path) as handle:
        _emit(frame, handle)
    intervals = ", ".join(f"[{lo:.4f}, {hi:.4f}]" for lo, hi in report.stable_intervals)
    L.info(f"stable intervals over {report.parameter_name}: {intervals or 'none'}")
    L.info(f"wrote {len(frame)} stability cells to {path}")


def write_equilibrium(path: Path, report: EquilibriumReport) -> None:
    """``component,value`` block, then an ``eig_re,eig_im`` block."""
    values = report.point.as_array()
    rows: list[tuple[str, Any]] = list(zip(STATE_LABELS, values.tolist()))
    rows += [
        ("residual", report.residual_norm),
        ("min_arg", report.min_arg),
        ("threshold", report.threshold),
        ("converged", int(report.converged)),
        ("verdict", report.verdict.value if report.verdict else ""),
    ]
    spectrum = report.spectrum if report.spectrum is not None else np.empty(0, dtype=complex)
    with _open(path) as handle:
        _emit(pd.DataFrame(rows, columns=list(EQUILIBRIUM_COLUMNS)), handle)
        _emit(
            pd.DataFrame({"eig_re": spectrum.real, "eig_im": spectrum.imag}),
            handle,
        )
    L.info(f"wrote equilibrium report to {path}")


def write_spike_metrics(
    path: Path, spikes: SpikeTrain, metrics: Sequence[tuple[str, Any]]
) -> None:
    """``peak_time,peak_value`` rows, then a ``metric,value`` summary block."""
    with _open(path) as handle:
        _emit(
            pd.DataFrame({"peak_time": spikes.peak_times, "peak_value": spikes.peak_values}),
            handle,
        )
        _emit(pd.DataFrame(list(metrics), columns=list(METRIC_COLUMNS)), handle)
    L.info(f"wrote {len(spikes)} peaks and {len(metrics)} metrics to {path}")


def manifest_path(output: Path) -> Path:
    return output.with_name(output.name + ".manifest")


def write_manifest(
    output: Path,
    command: str,
    config_lines: Sequence[str],
    failed: Sequence[tuple[float, str]] = (),
    status: str = "ok",
) -> Path:
    """
    Record what produced ``output``. Only the ``created:`` line varies
    between identical runs.
    """
    path = manifest_path(output)
    lines = [
        f"command: {command}",
        f"status: {status}",
        f"output: {output}",
        f"created: {datetime.now(timezone.utc).isoformat()}",
        f"failed_cells: {len(failed)}",
    ]
    lines += [f"  {value!r}: {reason}" for value, reason in failed]
    lines.append("config:")
    lines += [f"  {line}" for line in config_lines]
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
