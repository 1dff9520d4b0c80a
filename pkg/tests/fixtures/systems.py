"""
Synthetic systems and signals with known answers.

Module-level functions so they can be shipped to worker processes.
"""

import math

import numpy as np

from fracpr.fde_solver import FractionalOrder, SolverConfig, Trajectory, solve_caputo_abm

LINEAR_MATRIX = np.array(
    [
        [-1.0, 0.5, 0.0],
        [0.2, -2.0, 0.3],
        [0.0, -0.4, -0.5],
    ]
)


def decay(t: float, y: np.ndarray) -> np.ndarray:
    """D^alpha y = -y."""
    return -y


def zero_field(t: float, y: np.ndarray) -> np.ndarray:
    return np.zeros_like(y)


def linear_field(x: np.ndarray) -> np.ndarray:
    return LINEAR_MATRIX @ x


def blow_up(t: float, y: np.ndarray) -> np.ndarray:
    """y' = y^2 from y0 = 1 leaves the finite domain before t = 1."""
    return y * y * 1e3


def underflow_field(t: float, y: np.ndarray) -> np.ndarray:
    """y' = 1 / exp(-y^2); once exp(-y^2) underflows to 0.0 the division raises."""
    value = float(y[0])
    return np.array([1.0 / math.exp(-value * value)])


def underflow_cell(value: float) -> np.ndarray:
    """Last sample of underflow_field from y0 = value over t in [0, 0.1]; y0 = 2 diverges."""
    config = SolverConfig(step_size=0.001, t_end=0.1)
    return solve_caputo_abm(underflow_field, [value], 1.0, config).component(0)[-1:]


def guarded_log(x: np.ndarray) -> np.ndarray:
    """log(x) with a ZeroDivisionError for x <= 0; Newton from x = 3 overshoots into it."""
    value = float(x[0])
    if value > 0.0:
        return np.array([math.log(value)])
    return np.array([1.0 / (value - value)])


def logistic_map_cell(r: float, transient: int = 2000, keep: int = 64) -> np.ndarray:
    """Attractor samples of x -> r x (1 - x) from x0 = 0.5."""
    x = 0.5
    for _ in range(transient):
        x = r * x * (1.0 - x)
    samples = np.empty(keep)
    for k in range(keep):
        x = r * x * (1.0 - x)
        samples[k] = x
    return samples


def failing_cell(value: float) -> np.ndarray:
    from fracpr.exceptions import NonFiniteState

    if value > 0.5:
        raise NonFiniteState(step=3, time=0.15)
    return np.array([value])


def component_trajectory(times: np.ndarray, signal: np.ndarray, index: int = 0) -> Trajectory:
    """Trajectory with ``signal`` in column ``index`` of an 8-wide state."""
    states = np.zeros((len(times), 8))
    states[:, index] = signal
    return Trajectory(times=times, states=states, alpha=FractionalOrder(alpha=1.0))


def sine_trajectory(
    period: float = 67.0, t_end: float = 1000.0, dt: float = 0.05, amplitude: float = 50.0
) -> Trajectory:
    times = dt * np.arange(int(round(t_end / dt)) + 1)
    return component_trajectory(times, amplitude * np.sin(2.0 * np.pi * times / period))


def burst_times(
    n_bursts: int = 12, spikes_per_burst: int = 4, intra: float = 5.0, inter: float = 60.0
) -> np.ndarray:
    """Spike times of a perfectly regular burster."""
    times = []
    t = 10.0
    for _ in range(n_bursts):
        for k in range(spikes_per_burst):
            times.append(t + k * intra)
        t += (spikes_per_burst - 1) * intra + inter
    return np.array(times)


def settling_signal(
    t_settle: float = 300.0, t_end: float = 1200.0, dt: float = 0.1
) -> Trajectory:
    """Drifting ramp with growing oscillation until ``t_settle``, then a steady sine."""
    times = dt * np.arange(int(round(t_end / dt)) + 1)
    steady = 10.0 * np.sin(2.0 * np.pi * times / 10.0)
    ramp = np.where(times < t_settle, 40.0 * (1.0 - times / t_settle), 0.0)
    envelope = np.where(times < t_settle, 0.2 + 0.8 * times / t_settle, 1.0)
    return component_trajectory(times, ramp + envelope * steady)
