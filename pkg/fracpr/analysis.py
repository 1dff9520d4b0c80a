"""
Trajectory post-processing: spike detection, transient estimation,
periodicity and burst classification, attractor sections and
bifurcation scans.
"""

import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from typing import Optional, Union

import numpy as np
from scipy.signal import find_peaks

from .exceptions import AnalysisError, ComputeError, InsufficientSpikes, InvalidScanError
from .fde_solver import FractionalOrder, SolverConfig, Trajectory
from .pinsky_rinzel import VD, VS, NeuronParams, RateFunctionSet, simulate

L = logging.getLogger(__name__)

DEFAULT_TRANSIENT_CUT = 500.0  # ms
DEFAULT_THRESHOLD_OFFSET = 10.0  # mV above the post-transient mean
MIN_ISIS = 5

SCAN_PARAMETERS = ("alpha", "i_sapp", "i_dapp")


def normalize_parameter(name: str) -> str:
    """Map I_Sapp / i-sapp / ISapp spellings onto alpha, i_sapp, i_dapp."""
    key = name.strip().lower().replace("-", "_")
    key = {"isapp": "i_sapp", "idapp": "i_dapp"}.get(key, key)
    if key not in SCAN_PARAMETERS:
        raise InvalidScanError(f"unknown scan parameter: {name}")
    return key


@dataclass
class SpikeTrain:
    """Detected peaks of one trajectory component."""

    peak_times: np.ndarray
    peak_values: np.ndarray
    refractory_estimate: Optional[float] = None
    isi: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.peak_times = np.asarray(self.peak_times, dtype=float)
        self.peak_values = np.asarray(self.peak_values, dtype=float)
        self.isi = np.diff(self.peak_times)

    def __len__(self) -> int:
        return len(self.peak_times)

    def between(self, t_start: float, t_stop: float) -> "SpikeTrain":
        mask = (self.peak_times >= t_start) & (self.peak_times <= t_stop)
        return SpikeTrain(self.peak_times[mask], self.peak_values[mask], self.refractory_estimate)

    def above(self, level: float) -> "SpikeTrain":
        mask = self.peak_values >= level
        return SpikeTrain(self.peak_times[mask], self.peak_values[mask], self.refractory_estimate)

    @property
    def isi_cv(self) -> float:
        if len(self.isi) < 2:
            return float("nan")
        return float(np.std(self.isi) / np.mean(self.isi))


@dataclass
class TransientEstimate:
    t_transient: float
    method: str


@dataclass
class Periodicity:
    """Outcome of periodicity_test. ``order`` is the number of spikes per period."""

    is_periodic: bool
    period: Optional[float] = None
    order: int = 0


@dataclass
class BurstSummary:
    threshold: float
    intra_mean: float
    inter_mean: float
    ratio: float
    burst_sizes: list[int]


class FiringMode(str, Enum):
    SILENT = "silent"
    REGULAR = "regular"
    BURSTING = "bursting"
    IRREGULAR = "irregular"


@dataclass
class ScanCell:
    value: float
    samples: np.ndarray
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass
class BifurcationScan:
    """Post-transient peak values per parameter value."""

    parameter_name: str
    parameter_values: np.ndarray
    samples: list[np.ndarray]
    errors: list[Optional[str]]

    @property
    def failed_values(self) -> list[float]:
        return [float(v) for v, e in zip(self.parameter_values, self.errors) if e is not None]

    def rows(self) -> list[tuple[float, float]]:
        """(param, peak_value) pairs in parameter order."""
        out = []
        for value, peaks in zip(self.parameter_values, self.samples):
            out.extend((float(value), float(pk)) for pk in peaks)
        return out

    def branch_counts(self, bin_width: float = 0.5) -> list[int]:
        return [distinct_branch_count(s, bin_width) for s in self.samples]


def _refractory_estimate(
    times: np.ndarray, y: np.ndarray, peaks: np.ndarray
) -> Optional[float]:
    """Median time from a spike's downward half-height crossing to the next upward one."""
    intervals = []
    for i, j in zip(peaks[:-1], peaks[1:]):
        segment = y[i : j + 1]
        half = 0.5 * (y[i] + segment.min())
        below = np.nonzero(segment < half)[0]
        if below.size == 0:
            continue
        down = below[0]
        above = np.nonzero(segment[down:] >= half)[0]
        if above.size == 0:
            continue
        up = down + above[0]
        intervals.append(times[i + up] - times[i + down])
    if not intervals:
        return None
    return float(np.median(intervals))


def detect_peaks(
    trajectory: Trajectory, component: int, threshold: float, refine: bool = True
) -> SpikeTrain:
    """
    Local maxima of one component at or above ``threshold``.

    A flat top counts once, at its left edge, and only when the samples on
    both sides of it are lower: a shoulder y[i-1] < y[i] == y[i+1] followed by
    a further rise is not a peak. Peak times and values are refined by a
    parabola through the three samples around each maximum.
    """
    y = np.asarray(trajectory.component(component), dtype=float)
    times = trajectory.times
    if len(y) < 3:
        return SpikeTrain(np.empty(0), np.empty(0))

    _, props = find_peaks(y, height=threshold, plateau_size=1)
    peaks = props["left_edges"].astype(int)
    if peaks.size == 0:
        return SpikeTrain(np.empty(0), np.empty(0))

    left = y[peaks - 1]
    mid = y[peaks]
    right = y[peaks + 1]
    if refine:
        curvature = left - 2.0 * mid + right
        delta = 0.5 * (left - right) / curvature
        peak_times = times[peaks] + delta * trajectory.step_size
        peak_values = mid - 0.25 * (left - right) * delta
    else:
        peak_times = times[peaks]
        peak_values = mid

    return SpikeTrain(peak_times, peak_values, _refractory_estimate(times, y, peaks))


def estimate_transient(
    trajectory: Trajectory, component: int, window: float, tolerance: float
) -> TransientEstimate:
    """
    Start of the asymptotic regime from windowed (mean, amplitude) statistics.

    Half-overlapping windows of length ``window`` are compared with the last
    one; the transient ends at the first window from which every later window
    agrees within ``tolerance`` relative to the asymptotic scale.
    """
    times = trajectory.times
    y = np.asarray(trajectory.component(component), dtype=float)
    t_end = trajectory.t_end
    if t_end < 2.0 * window:
        raise AnalysisError(f"trajectory too short ({t_end}) for window {window}")

    stride = 0.5 * window
    starts = np.arange(0.0, t_end - window + 1e-9 * window, stride)
    means = np.empty(len(starts))
    amps = np.empty(len(starts))
    for k, t0 in enumerate(starts):
        seg = y[(times >= t0) & (times <= t0 + window)]
        means[k] = seg.mean()
        amps[k] = seg.max() - seg.min()

    ref_mean, ref_amp = means[-1], amps[-1]
    scale = max(abs(ref_mean), ref_amp, 1e-12)
    agree = (np.abs(means - ref_mean) <= tolerance * scale) & (
        np.abs(amps - ref_amp) <= tolerance * scale
    )

    first = len(starts) - 1
    while first > 0 and agree[first - 1]:
        first -= 1

    if len(starts) - first < 2:
        L.debug(f"transient not converged for component {component}")
        return TransientEstimate(t_transient=0.5 * t_end, method="not-converged")
    return TransientEstimate(t_transient=float(starts[first]), method="window-stats")


def periodicity_test(spikes: SpikeTrain, rel_tol: float = 0.1, max_order: int = 6) -> Periodicity:
    """
    Decide whether a spike train is periodic.

    Order 1: ISI coefficient of variation below ``rel_tol``. Order k > 1
    (k spikes per period, e.g. bursts): the ISI sequence repeats with lag k to
    within ``rel_tol`` of the mean ISI, and k-spike block durations have CV
    below ``rel_tol``.

    Raises:
        InsufficientSpikes: Fewer than five interspike intervals
    """
    isi = spikes.isi
    if len(isi) < MIN_ISIS:
        raise InsufficientSpikes(MIN_ISIS, len(isi))

    mean_isi = float(np.mean(isi))
    if np.std(isi) / mean_isi < rel_tol:
        return Periodicity(True, mean_isi, 1)

    for k in range(2, max_order + 1):
        if len(isi) < 3 * k:
            break
        lagged = np.abs(isi[k:] - isi[:-k])
        blocks = np.convolve(isi, np.ones(k), mode="valid")
        period = float(blocks.mean())
        if lagged.max() <= rel_tol * mean_isi and blocks.std() / period < rel_tol:
            return Periodicity(True, period, k)

    return Periodicity(False)


def burst_grouping(spikes: SpikeTrain) -> BurstSummary:
    """Split ISIs into intra- and inter-burst modes at the widest gap in log ISI."""
    isi = spikes.isi
    if len(isi) < 2:
        raise InsufficientSpikes(2, len(isi))

    log_sorted = np.sort(np.log(isi))
    gaps = np.diff(log_sorted)
    cut = int(np.argmax(gaps))
    threshold = float(np.exp(0.5 * (log_sorted[cut] + log_sorted[cut + 1])))

    intra = isi[isi < threshold]
    inter = isi[isi >= threshold]
    intra_mean = float(intra.mean()) if intra.size else float("nan")
    inter_mean = float(inter.mean()) if inter.size else float("nan")
    ratio = inter_mean / intra_mean if intra.size and inter.size else 1.0

    sizes = []
    count = 1
    for interval in isi:
        if interval >= threshold:
            sizes.append(count)
            count = 1
        else:
            count += 1
    sizes.append(count)

    return BurstSummary(threshold, intra_mean, inter_mean, float(ratio), sizes)


def firing_mode(spikes: SpikeTrain, regular_cv: float = 0.2, burst_ratio: float = 3.0) -> FiringMode:
    if len(spikes.isi) < 2:
        return FiringMode.SILENT
    if spikes.isi_cv < regular_cv:
        return FiringMode.REGULAR
    if burst_grouping(spikes).ratio > burst_ratio:
        return FiringMode.BURSTING
    return FiringMode.IRREGULAR


def attractor_section(trajectory: Trajectory, t_min: float) -> np.ndarray:
    """(V_s, V_d) pairs of every sample strictly after ``t_min``; shape (M, 2)."""
    if t_min >= trajectory.t_end:
        raise AnalysisError(f"t_min ({t_min}) must be before t_end ({trajectory.t_end})")
    mask = trajectory.times > t_min + 0.5 * trajectory.step_size
    return trajectory.states[mask][:, [VS, VD]]


def distinct_branch_count(samples: Sequence[float], bin_width: float = 0.5) -> int:
    """Number of occupied bins of width ``bin_width``."""
    values = np.asarray(samples, dtype=float)
    if values.size == 0:
        return 0
    return int(np.unique(np.floor(values / bin_width)).size)


def _guarded(cell_fn: Callable[[float], np.ndarray], value: float) -> tuple[np.ndarray, Optional[str]]:
    try:
        return np.asarray(cell_fn(value), dtype=float), None
    except ComputeError as e:
        return np.empty(0), str(e)
    except ArithmeticError as e:
        return np.empty(0), f"{type(e).__name__}: {e}"


def scan_cells(
    values: Sequence[float],
    cell_fn: Callable[[float], np.ndarray],
    workers: int = 1,
) -> list[ScanCell]:
    """
    Evaluate ``cell_fn`` at every value, independently.

    Cells run in a process pool when ``workers`` > 1; results come back in the
    order of ``values`` whatever the worker count. Compute and arithmetic
    errors mark the cell failed instead of aborting the scan.
    """
    guarded = partial(_guarded, cell_fn)
    if workers > 1 and len(values) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(guarded, values))
    else:
        results = [guarded(v) for v in values]

    cells = []
    for value, (samples, error) in zip(values, results):
        if error is not None:
            L.warning(f"scan cell {value:g} failed: {error}")
        cells.append(ScanCell(float(value), samples, error))
    return cells


def _bifurcation_cell(
    value: float,
    parameter_name: str,
    base_params: NeuronParams,
    alpha: float,
    solver: SolverConfig,
    gates: RateFunctionSet,
    transient_cut: float,
    threshold_offset: float,
) -> np.ndarray:
    if parameter_name == "alpha":
        params, order = base_params, value
    else:
        params, order = base_params.model_copy(update={parameter_name: value}), alpha

    trajectory = simulate(params, order, solver, gates).after(transient_cut)
    v_s = trajectory.component(VS)
    threshold = float(v_s.mean()) + threshold_offset
    return detect_peaks(trajectory, VS, threshold).peak_values


def bifurcation_scan(
    parameter_name: str,
    values: Sequence[float],
    base_params: NeuronParams,
    alpha: Union[FractionalOrder, float],
    solver: SolverConfig,
    transient_cut: float = DEFAULT_TRANSIENT_CUT,
    gates: RateFunctionSet = RateFunctionSet.SMOOTH,
    threshold_offset: float = DEFAULT_THRESHOLD_OFFSET,
    workers: int = 1,
) -> BifurcationScan:
    """
    Post-transient V_s peak values across a parameter sweep.

    Every cell restarts from the canonical initial state; there is no
    continuation. Values are scanned in increasing order.

    Raises:
        InvalidScanError: Empty or duplicated values, or a cut beyond t_end
    """
    name = normalize_parameter(parameter_name)
    grid = np.sort(np.asarray(values, dtype=float))
    if grid.size == 0:
        raise InvalidScanError("scan needs at least one parameter value")
    if np.any(np.diff(grid) <= 0.0):
        raise InvalidScanError("scan values must be distinct")
    if transient_cut >= solver.t_end:
        raise InvalidScanError(
            f"transient_cut ({transient_cut}) must be before t_end ({solver.t_end})"
        )
    if name == "alpha" and (grid[0] <= 0.0 or grid[-1] > 1.0):
        raise InvalidScanError("alpha values must lie in (0, 1]")

    order = FractionalOrder.coerce(alpha).alpha
    L.info(f"bifurcation scan over {name}: {grid.size} cells, workers={workers}")
    cell_fn = partial(
        _bifurcation_cell,
        parameter_name=name,
        base_params=base_params,
        alpha=order,
        solver=solver,
        gates=RateFunctionSet(gates),
        transient_cut=transient_cut,
        threshold_offset=threshold_offset,
    )
    cells = scan_cells(grid.tolist(), cell_fn, workers)
    return BifurcationScan(
        parameter_name=name,
        parameter_values=grid,
        samples=[c.samples for c in cells],
        errors=[c.error for c in cells],
    )
