"""
Equilibria and their fractional-order stability.

Equilibria are found by damped Newton on the C_m-free vector field (so their
location does not depend on alpha), classified with the eigenvalue-argument
test: an equilibrium of a commensurate system of order alpha is
asymptotically stable iff every Jacobian eigenvalue has |arg| > alpha*pi/2.
"""

import logging
import math
from collections.abc import Callable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from typing import Optional, Union

import numpy as np
from scipy import linalg

from .analysis import normalize_parameter
from .exceptions import InvalidScanError, NoConvergence
from .fde_solver import FractionalOrder
from .pinsky_rinzel import (
    NeuronParams,
    NeuronState,
    RateFunctionSet,
    initial_state_for,
    rhs,
    rhs_numerator,
)

L = logging.getLogger(__name__)

EQUILIBRIUM_TOL = 1e-10
MAX_NEWTON_ITERATIONS = 200
MAX_HALVINGS = 40
EIGEN_RESIDUAL_TOL = 1e-8


class Verdict(str, Enum):
    ASYMPTOTICALLY_STABLE = "asymptotically_stable"
    UNSTABLE = "unstable"


@dataclass
class EquilibriumReport:
    """Fixed point with, once analyzed, its Jacobian, spectrum and verdict."""

    point: NeuronState
    residual_norm: float
    alpha: FractionalOrder
    converged: bool
    iterations: int = 0
    jacobian: Optional[np.ndarray] = None
    spectrum: Optional[np.ndarray] = None
    verdict: Optional[Verdict] = None

    @property
    def threshold(self) -> float:
        return self.alpha.alpha * math.pi / 2.0

    @property
    def min_arg(self) -> float:
        if self.spectrum is None:
            return float("nan")
        return float(np.min(np.abs(np.angle(self.spectrum))))


@dataclass
class StabilityCell:
    value: float
    verdict: Verdict
    residual: float
    min_arg: float
    threshold: float
    converged: bool


@dataclass
class StableIntervalReport:
    parameter_name: str
    scanned_range: tuple[float, float]
    increment: float
    stable_intervals: list[tuple[float, float]]
    cells: list[StabilityCell] = field(default_factory=list)

    @property
    def failed_values(self) -> list[float]:
        return [c.value for c in self.cells if not c.converged]


def finite_difference_jacobian(
    func: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    rel_step: float = 1e-6,
    abs_step: float = 1e-6,
) -> np.ndarray:
    """Central differences; column j uses step max(abs_step, rel_step*|x_j|)."""
    x = np.asarray(x, dtype=float)
    columns = []
    for j in range(x.size):
        delta = max(abs_step, rel_step * abs(x[j]))
        forward = x.copy()
        backward = x.copy()
        forward[j] += delta
        backward[j] -= delta
        columns.append((func(forward) - func(backward)) / (2.0 * delta))
    return np.column_stack(columns)


def numerical_jacobian(
    params: NeuronParams,
    state: Union[NeuronState, np.ndarray],
    alpha: Union[FractionalOrder, float],
    gates: RateFunctionSet = RateFunctionSet.SMOOTH,
    rel_step: float = 1e-6,
) -> np.ndarray:
    """8x8 Jacobian of ``rhs`` at ``state``; entry (i, j) is d rhs_i / d x_j."""
    x = state.as_array() if isinstance(state, NeuronState) else np.asarray(state, dtype=float)
    return finite_difference_jacobian(
        lambda y: rhs(0.0, y, params, alpha, gates), x, rel_step=rel_step, abs_step=rel_step
    )


def _residual(
    func: Callable[[np.ndarray], np.ndarray], x: np.ndarray
) -> tuple[Optional[np.ndarray], float]:
    """func(x) and its max-norm; a raising or non-finite evaluation has norm inf."""
    if not np.all(np.isfinite(x)):
        return None, math.inf
    try:
        fx = func(x)
    except ArithmeticError as e:
        L.debug(f"residual evaluation failed: {e}")
        return None, math.inf
    norm = float(np.max(np.abs(fx)))
    return (fx, norm) if np.isfinite(norm) else (None, math.inf)


def _newton(
    func: Callable[[np.ndarray], np.ndarray], x0: np.ndarray, max_iter: int
) -> tuple[np.ndarray, int]:
    """
    Damped Newton with step halving; runs until the residual stops decreasing.

    A trial point whose residual raises or is non-finite is rejected like one
    whose residual grew, so the iterate always has a finite residual.
    """
    x = np.array(x0, dtype=float)
    fx, fnorm = _residual(func, x)
    iterations = 0
    if fx is None:
        L.debug("Newton seed has no finite residual")
        return x, iterations
    for iterations in range(1, max_iter + 1):
        if fnorm == 0.0:
            break
        try:
            jac = finite_difference_jacobian(func, x)
        except ArithmeticError as e:
            L.debug(f"Newton Jacobian failed at iteration {iterations}: {e}")
            break
        if not np.all(np.isfinite(jac)):
            L.debug(f"Newton Jacobian not finite at iteration {iterations}")
            break
        try:
            dx = np.linalg.solve(jac, -fx)
        except np.linalg.LinAlgError:
            dx = np.linalg.lstsq(jac, -fx, rcond=None)[0]

        step = 1.0
        for _ in range(MAX_HALVINGS):
            candidate = x + step * dx
            fc, cnorm = _residual(func, candidate)
            if cnorm < fnorm:
                break
            step *= 0.5
        else:
            L.debug(f"Newton stalled at iteration {iterations}, residual {fnorm:.3e}")
            break

        x, fx, fnorm = candidate, fc, cnorm
    return x, iterations


def find_equilibrium(
    params: NeuronParams,
    alpha: Union[FractionalOrder, float],
    seed: Union[NeuronState, np.ndarray],
    gates: RateFunctionSet = RateFunctionSet.SMOOTH,
    tol: float = EQUILIBRIUM_TOL,
    max_iter: int = MAX_NEWTON_ITERATIONS,
    strict: bool = False,
) -> EquilibriumReport:
    """
    Locate a zero of the vector field near ``seed``.

    The residual reported is max|rhs(point)| at the given order. A report whose
    residual misses ``tol`` is returned with ``converged=False``.

    Raises:
        NoConvergence: Only when ``strict`` and the tolerance was missed
    """
    order = FractionalOrder.coerce(alpha)
    x0 = seed.as_array() if isinstance(seed, NeuronState) else np.asarray(seed, dtype=float)
    if not np.all(np.isfinite(x0)):
        raise ValueError("equilibrium seed must be finite")

    x, iterations = _newton(lambda y: rhs_numerator(y, params, gates), x0, max_iter)
    residual = float(np.max(np.abs(rhs(0.0, x, params, order, gates))))
    converged = bool(np.isfinite(residual) and residual < tol)

    if not converged:
        L.warning(
            f"equilibrium search did not converge: residual {residual:.3e} "
            f"after {iterations} iterations (I_Sapp={params.i_sapp}, I_Dapp={params.i_dapp})"
        )
        if strict:
            raise NoConvergence(
                f"Newton residual {residual:.3e} above {tol:.1e}",
                best=x,
                residual=residual,
                iterations=iterations,
            )

    return EquilibriumReport(
        point=NeuronState.from_array(x),
        residual_norm=residual,
        alpha=order,
        converged=converged,
        iterations=iterations,
    )


def eigenvalues(matrix: np.ndarray) -> np.ndarray:
    """
    Spectrum of a dense real matrix, sorted by descending real part.

    Raises:
        NoConvergence: The QR iteration failed
    """
    a = np.asarray(matrix, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    try:
        w, v = linalg.eig(a)
    except linalg.LinAlgError as e:
        raise NoConvergence(f"eigenvalue iteration failed: {e}") from e

    scale = max(np.linalg.norm(a, 2), 1.0)
    for k in range(w.size):
        residual = np.linalg.norm(a @ v[:, k] - w[k] * v[:, k])
        if residual > EIGEN_RESIDUAL_TOL * scale:
            L.warning(f"eigenpair {k} residual {residual:.2e} exceeds tolerance")

    order = np.lexsort((-w.imag, -w.real))
    return w[order]


def matignon_test(spectrum: np.ndarray, alpha: Union[FractionalOrder, float]) -> Verdict:
    """Stable iff min |arg lambda| > alpha*pi/2 strictly; lambda = 0 counts as arg 0."""
    values = np.asarray(spectrum, dtype=complex)
    if values.size == 0:
        raise ValueError("spectrum must be nonempty")
    threshold = FractionalOrder.coerce(alpha).alpha * math.pi / 2.0
    if float(np.min(np.abs(np.angle(values)))) > threshold:
        return Verdict.ASYMPTOTICALLY_STABLE
    return Verdict.UNSTABLE


def analyze_equilibrium(
    params: NeuronParams,
    alpha: Union[FractionalOrder, float],
    seed: Optional[NeuronState] = None,
    gates: RateFunctionSet = RateFunctionSet.SMOOTH,
    strict: bool = False,
) -> EquilibriumReport:
    """find_equilibrium, then Jacobian, spectrum and verdict at the point found."""
    report = find_equilibrium(
        params, alpha, seed if seed is not None else initial_state_for(params), gates, strict=strict
    )
    report.jacobian = numerical_jacobian(params, report.point, report.alpha, gates)
    if not np.all(np.isfinite(report.jacobian)):
        # only reachable off-equilibrium; the verdict stays unstable
        L.warning("Jacobian has non-finite entries; spectrum skipped")
        report.verdict = Verdict.UNSTABLE
        return report
    report.spectrum = eigenvalues(report.jacobian)
    if report.converged:
        report.verdict = matignon_test(report.spectrum, report.alpha)
    else:
        report.verdict = Verdict.UNSTABLE
    return report


def _scan_grid(lo: float, hi: float, increment: float) -> np.ndarray:
    if increment <= 0.0:
        raise InvalidScanError("increment must be positive")
    if lo >= hi:
        raise InvalidScanError(f"empty range [{lo}, {hi}]")
    n = int(math.floor((hi - lo) / increment + 1e-9))
    return lo + increment * np.arange(n + 1, dtype=float)


def _stability_cell(
    value: float,
    parameter_name: str,
    base_params: NeuronParams,
    alpha: FractionalOrder,
    seed: NeuronState,
    gates: RateFunctionSet,
) -> tuple[StabilityCell, NeuronState]:
    params = base_params.model_copy(update={parameter_name: value})
    report = analyze_equilibrium(params, alpha, seed, gates)
    cell = StabilityCell(
        value=float(value),
        verdict=report.verdict or Verdict.UNSTABLE,
        residual=report.residual_norm,
        min_arg=report.min_arg,
        threshold=report.threshold,
        converged=report.converged,
    )
    return cell, report.point


def _merge_intervals(cells: list[StabilityCell]) -> list[tuple[float, float]]:
    intervals = []
    start: Optional[float] = None
    previous = 0.0
    for cell in cells:
        stable = cell.verdict is Verdict.ASYMPTOTICALLY_STABLE
        if stable and start is None:
            start = cell.value
        elif not stable and start is not None:
            intervals.append((start, previous))
            start = None
        previous = cell.value
    if start is not None:
        intervals.append((start, previous))
    return intervals


def scan_stable_intervals(
    parameter_name: str,
    lo: float,
    hi: float,
    increment: float,
    base_params: NeuronParams,
    alpha: Union[FractionalOrder, float],
    seed: Optional[NeuronState] = None,
    gates: RateFunctionSet = RateFunctionSet.SMOOTH,
    seed_mode: str = "warm",
    workers: int = 1,
) -> StableIntervalReport:
    """
    Classify the equilibrium at every grid value of I_Sapp or I_Dapp.

    ``seed_mode="warm"`` walks the grid upward seeding each Newton solve with
    the previous converged point (falling back to ``seed``); ``"canonical"``
    seeds every cell with ``seed`` and may run cells in parallel. Cells that
    fail to converge count as unstable.
    """
    name = normalize_parameter(parameter_name)
    if name == "alpha":
        raise InvalidScanError("stable-interval scans run over I_Sapp or I_Dapp")
    if seed_mode not in ("warm", "canonical"):
        raise InvalidScanError(f"unknown seed mode: {seed_mode}")

    order = FractionalOrder.coerce(alpha)
    base_seed = seed if seed is not None else initial_state_for(base_params)
    grid = _scan_grid(lo, hi, increment)
    variant = RateFunctionSet(gates)
    L.info(f"stability scan over {name}: {grid.size} cells, seed mode {seed_mode}")

    cells: list[StabilityCell] = []
    if seed_mode == "warm":
        current = base_seed
        for value in grid:
            cell, point = _stability_cell(value, name, base_params, order, current, variant)
            cells.append(cell)
            current = point if cell.converged else base_seed
    else:
        cell_fn = partial(
            _stability_cell,
            parameter_name=name,
            base_params=base_params,
            alpha=order,
            seed=base_seed,
            gates=variant,
        )
        if workers > 1:
            chunk = max(1, grid.size // (4 * workers))
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(cell_fn, grid.tolist(), chunksize=chunk))
        else:
            results = [cell_fn(v) for v in grid.tolist()]
        cells = [cell for cell, _ in results]

    failed = sum(1 for c in cells if not c.converged)
    if failed:
        L.warning(f"{failed} of {len(cells)} cells did not converge; counted unstable")

    return StableIntervalReport(
        parameter_name=name,
        scanned_range=(float(lo), float(hi)),
        increment=float(increment),
        stable_intervals=_merge_intervals(cells),
        cells=cells,
    )


def compare_seed_modes(
    first: StableIntervalReport, second: StableIntervalReport
) -> list[float]:
    """
    Grid values whose verdicts differ between two scans of the same grid.

    Warm and canonical seeding can land on different equilibria of the same
    parameter set; every disagreement is logged at INFO.

    Raises:
        InvalidScanError: The reports cover different grids
    """
    if first.parameter_name != second.parameter_name or len(first.cells) != len(second.cells):
        raise InvalidScanError("seed modes can only be compared on the same grid")
    differing = []
    for a, b in zip(first.cells, second.cells):
        if not math.isclose(a.value, b.value, rel_tol=0.0, abs_tol=1e-9):
            raise InvalidScanError(f"grid values differ: {a.value} vs {b.value}")
        if a.verdict is not b.verdict:
            L.info(
                f"{first.parameter_name}={a.value:g}: verdict {a.verdict.value} "
                f"(converged={a.converged}) vs {b.verdict.value} (converged={b.converged})"
            )
            differing.append(a.value)
    if differing:
        L.info(f"seed modes disagree at {len(differing)} of {len(first.cells)} cells")
    return differing
