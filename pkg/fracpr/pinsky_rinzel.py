"""
Fractional-order Pinsky-Rinzel two-compartment CA3 pyramidal cell.

State order is (V_s, V_d, h, n, s, c, q, Ca). Voltage-gated rates are written
in offset coordinates v = V - voltage_offset; the canonical parameter set
measures V relative to rest and shifts by 60 mV inside the rate functions.
The sodium activation m is instantaneous (m_inf), not a state.
"""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import astuple, dataclass
from enum import Enum
from typing import NamedTuple, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .fde_solver import (
    FractionalOrder,
    RhsFunction,
    SolverConfig,
    Trajectory,
    solve_caputo_abm,
)

L = logging.getLogger(__name__)

STATE_LABELS = ("Vs", "Vd", "h", "n", "s", "c", "q", "Ca")
CURRENT_LABELS = ("ILeakS", "INa", "IKDR", "ILeakD", "ICa", "IKCa", "IKAHP", "ISD")

VS, VD, H, N, S, C, Q, CA = range(8)

# math.exp raises on overflow and underflows to 0.0, which would zero a time
# constant; arguments are clipped to [-_EXP_CAP, _EXP_CAP]
_EXP_CAP = 700.0


def _exp(x: float) -> float:
    return math.exp(max(min(x, _EXP_CAP), -_EXP_CAP))


def _x_over_expm1(x: float) -> float:
    """x / (exp(x) - 1), continuous through x = 0."""
    if abs(x) < 1e-10:
        return 1.0 - 0.5 * x
    if x > _EXP_CAP:
        return x * math.exp(-x)
    return x / math.expm1(x)


def _softplus(x: float) -> float:
    if x > 0.0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


class RateFunctionSet(str, Enum):
    """Closed forms used for the calcium-dependent gates c and q and for chi."""

    SMOOTH = "smooth"
    NONSMOOTH = "nonsmooth"


@dataclass(frozen=True)
class NeuronState:
    """One point of the 8-dimensional state space."""

    v_s: float
    v_d: float
    h: float
    n: float
    s: float
    c: float
    q: float
    ca: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "NeuronState":
        if len(values) != 8:
            raise ValueError(f"expected 8 state components, got {len(values)}")
        return cls(*(float(v) for v in values))


class NeuronParams(BaseModel):
    """Model constants. Defaults are the canonical (code) values."""

    model_config = ConfigDict(frozen=True)

    # Maximal conductances (mS/cm^2)
    g_l: float = Field(default=0.1, ge=0.0)
    g_na: float = Field(default=30.0, ge=0.0)
    g_kdr: float = Field(default=15.0, ge=0.0)
    g_ca: float = Field(default=10.0, ge=0.0)
    g_kahp: float = Field(default=0.8, ge=0.0)
    g_kc: float = Field(default=15.0, ge=0.0)

    # Reversal potentials (mV)
    v_na: float = 120.0
    v_ca: float = 140.0
    v_k: float = -15.0
    v_l: float = 0.0

    # Geometry and coupling
    p: float = Field(default=0.5, gt=0.0, lt=1.0)
    g_c: float = Field(default=2.1, ge=0.0)

    # Injections (uA/cm^2)
    i_sapp: float = 2.5
    i_dapp: float = 0.0
    i_syn: float = 0.0

    # Fractional membrane: C_m(alpha) = tau_m**alpha / r_m
    r_m: float = Field(default=10.0, gt=0.0)
    tau_m: float = Field(default=30.0, gt=0.0)

    voltage_offset: float = 60.0


class CurrentBreakdown(NamedTuple):
    """Ionic and coupling currents (uA/cm^2). I_DS is -I_SD."""

    i_leak_s: float
    i_na: float
    i_kdr: float
    i_leak_d: float
    i_ca: float
    i_kca: float
    i_kahp: float
    i_sd: float


class SmoothCaGates(NamedTuple):
    c_inf: float
    tau_c: float
    q_inf: float
    tau_q: float
    chi: float


class NonsmoothCaGates(NamedTuple):
    alpha_c: float
    beta_c: float
    alpha_q: float
    beta_q: float
    chi: float


# Voltage-gated rates in offset coordinates.


def alpha_m(v: float) -> float:
    return 1.28 * _x_over_expm1((-46.9 - v) / 4.0)


def beta_m(v: float) -> float:
    return 1.4 * _x_over_expm1((v + 19.9) / 5.0)


def alpha_n(v: float) -> float:
    return 0.08 * _x_over_expm1((-24.9 - v) / 5.0)


def beta_n(v: float) -> float:
    return 0.25 * _exp(-1.0 - 0.025 * v)


def alpha_h(v: float) -> float:
    return 0.128 * _exp((-43.0 - v) / 18.0)


def beta_h(v: float) -> float:
    return 4.0 / (1.0 + _exp((-20.0 - v) / 5.0))


def alpha_s(v: float) -> float:
    return 1.6 / (1.0 + _exp(-0.072 * (v - 5.0)))


def beta_s(v: float) -> float:
    return 0.1 * _x_over_expm1((v + 8.9) / 5.0)


RATE_FUNCTIONS: dict[str, Callable[[float], float]] = {
    "alpha_m": alpha_m,
    "beta_m": beta_m,
    "alpha_n": alpha_n,
    "beta_n": beta_n,
    "alpha_h": alpha_h,
    "beta_h": beta_h,
    "alpha_s": alpha_s,
    "beta_s": beta_s,
}

GATE_RATES: dict[str, tuple[Callable[[float], float], Callable[[float], float]]] = {
    "m": (alpha_m, beta_m),
    "n": (alpha_n, beta_n),
    "h": (alpha_h, beta_h),
    "s": (alpha_s, beta_s),
}


def rate(kind: str, V: float, params: NeuronParams) -> float:
    """
    Evaluate a voltage-gated rate at membrane potential V.

    Args:
        kind: One of alpha_m, beta_m, alpha_n, beta_n, alpha_h, beta_h, alpha_s, beta_s
        V: Membrane potential in the parameter set's frame (mV)
        params: Supplies the voltage offset

    Returns:
        Rate (1/ms); removable singularities take their limits
    """
    try:
        func = RATE_FUNCTIONS[kind]
    except KeyError:
        raise ValueError(f"unknown rate kind: {kind}") from None
    return func(V - params.voltage_offset)


def gate_steady_and_tau(kind: str, V: float, params: NeuronParams) -> tuple[float, float]:
    """Steady state alpha/(alpha+beta) and time constant 1/(alpha+beta) for gate m, n, h or s."""
    try:
        fa, fb = GATE_RATES[kind]
    except KeyError:
        raise ValueError(f"unknown gate: {kind}") from None
    v = V - params.voltage_offset
    a = fa(v)
    b = fb(v)
    total = a + b
    return a / total, 1.0 / total


def smooth_ca_gates(V_d: float, Ca: float) -> SmoothCaGates:
    """Smooth c/q kinetics and chi; V_d in offset coordinates."""
    x = (-10.1 - V_d) / 0.1016
    c_inf = math.exp(-0.00925 * _softplus(x))
    tau_c = 3.627 * _exp(0.03704 * V_d)
    q_inf = 0.7894 * _exp(0.0002726 * Ca) - 0.7292 * _exp(-0.01672 * Ca)
    tau_q = 657.9 * _exp(-0.02023 * Ca) + 301.8 * _exp(-0.002381 * Ca)
    chi = (
        1.073 * math.sin(0.003453 * Ca + 0.08095)
        + 0.08408 * math.sin(0.01634 * Ca - 2.34)
        + 0.01811 * math.sin(0.0348 * Ca - 0.9918)
    )
    return SmoothCaGates(c_inf, tau_c, q_inf, tau_q, chi)


def nonsmooth_ca_gates(V_d: float, Ca: float) -> NonsmoothCaGates:
    """Heaviside/min c/q kinetics and chi; V_d in offset coordinates.

    H(V_d + 10) is right-continuous: it is 1 at V_d = -10.
    """
    decay = 2.0 * _exp((-53.5 - V_d) / 27.0)
    if V_d + 10.0 >= 0.0:
        alpha_c = decay
        beta_c = 0.0
    else:
        alpha_c = _exp((V_d + 50.0) / 11.0 - (V_d + 53.5) / 27.0) / 18.975
        beta_c = decay - alpha_c
    alpha_q = min(0.00002 * Ca, 0.01)
    beta_q = 0.001
    chi = min(Ca / 250.0, 1.0)
    return NonsmoothCaGates(alpha_c, beta_c, alpha_q, beta_q, chi)


def capacitance(alpha: Union[FractionalOrder, float], params: NeuronParams) -> float:
    """Fractional membrane capacitance tau_m**alpha / R_m."""
    a = FractionalOrder.coerce(alpha).alpha
    return params.tau_m**a / params.r_m


def _unpack(state: Union[NeuronState, Sequence[float], np.ndarray]) -> tuple[float, ...]:
    if isinstance(state, NeuronState):
        return astuple(state)
    return tuple(float(v) for v in state)


def _evaluate(
    y: tuple[float, ...], p: NeuronParams, gates: RateFunctionSet
) -> tuple[CurrentBreakdown, tuple[float, float, float, float, float]]:
    """Currents and gating derivatives (h, n, s, c, q) at one state."""
    vs, vd, h, n, s, c, q, ca = y
    us = vs - p.voltage_offset
    ud = vd - p.voltage_offset

    am = alpha_m(us)
    m_inf = am / (am + beta_m(us))

    if gates is RateFunctionSet.SMOOTH:
        c_inf, tau_c, q_inf, tau_q, chi = smooth_ca_gates(ud, ca)
        dc = (c_inf - c) / tau_c
        dq = (q_inf - q) / tau_q
    else:
        a_c, b_c, a_q, b_q, chi = nonsmooth_ca_gates(ud, ca)
        dc = a_c * (1.0 - c) - b_c * c
        dq = a_q * (1.0 - q) - b_q * q

    dh = alpha_h(us) * (1.0 - h) - beta_h(us) * h
    dn = alpha_n(us) * (1.0 - n) - beta_n(us) * n
    ds = alpha_s(ud) * (1.0 - s) - beta_s(ud) * s

    currents = CurrentBreakdown(
        i_leak_s=p.g_l * (vs - p.v_l),
        i_na=p.g_na * m_inf * m_inf * h * (vs - p.v_na),
        i_kdr=p.g_kdr * n * (vs - p.v_k),
        i_leak_d=p.g_l * (vd - p.v_l),
        i_ca=p.g_ca * s * s * (vd - p.v_ca),
        # reversal is V_K for the calcium-activated potassium current
        i_kca=p.g_kc * c * chi * (vd - p.v_k),
        i_kahp=p.g_kahp * q * (vd - p.v_k),
        i_sd=p.g_c * (vd - vs),
    )
    return currents, (dh, dn, ds, dc, dq)


def currents(
    state: Union[NeuronState, Sequence[float]],
    params: NeuronParams,
    gates: RateFunctionSet = RateFunctionSet.SMOOTH,
) -> CurrentBreakdown:
    """All membrane and coupling currents at ``state``."""
    breakdown, _ = _evaluate(_unpack(state), params, RateFunctionSet(gates))
    return breakdown


def _field(
    y: tuple[float, ...], p: NeuronParams, cm: float, gates: RateFunctionSet
) -> np.ndarray:
    cur, (dh, dn, ds, dc, dq) = _evaluate(y, p, gates)
    soma = (
        -cur.i_leak_s - cur.i_na - cur.i_kdr + cur.i_sd / p.p + p.i_sapp / p.p
    )
    dend_frac = 1.0 - p.p
    dendrite = (
        -cur.i_leak_d
        - cur.i_ca
        - cur.i_kca
        - cur.i_kahp
        - cur.i_sd / dend_frac
        + p.i_dapp / dend_frac
        - p.i_syn / dend_frac
    )
    dca = -0.13 * cur.i_ca - 0.075 * y[CA]
    return np.array([soma / cm, dendrite / cm, dh, dn, ds, dc, dq, dca])


def rhs(
    t: float,
    state: Union[NeuronState, Sequence[float], np.ndarray],
    params: NeuronParams,
    alpha: Union[FractionalOrder, float],
    gates: RateFunctionSet = RateFunctionSet.SMOOTH,
) -> np.ndarray:
    """
    Right-hand side of the fractional system D^alpha y = rhs(t, y).

    The two voltage rows are divided by C_m(alpha); gating and calcium rows
    are not. The system is autonomous; ``t`` is accepted for the solver
    contract only.
    """
    return _field(_unpack(state), params, capacitance(alpha, params), RateFunctionSet(gates))


def rhs_numerator(
    state: Union[NeuronState, Sequence[float], np.ndarray],
    params: NeuronParams,
    gates: RateFunctionSet = RateFunctionSet.SMOOTH,
) -> np.ndarray:
    """Vector field with C_m = 1. Shares its zeros with ``rhs`` for every alpha."""
    return _field(_unpack(state), params, 1.0, RateFunctionSet(gates))


def make_rhs(
    params: NeuronParams,
    alpha: Union[FractionalOrder, float],
    gates: RateFunctionSet = RateFunctionSet.SMOOTH,
) -> RhsFunction:
    """Bind parameters, order and rate set into a solver-ready vector field."""
    cm = capacitance(alpha, params)
    variant = RateFunctionSet(gates)

    def vector_field(t: float, y: np.ndarray) -> np.ndarray:
        return _field(tuple(y.tolist()), params, cm, variant)

    return vector_field


def canonical_params() -> NeuronParams:
    """Parameter set of the reference code (rest-relative voltages, 60 mV rate offset)."""
    return NeuronParams()


def table_params() -> NeuronParams:
    """Published table reversal potentials in absolute millivolts.

    Same dynamics as ``canonical_params`` shifted by -60 mV; pair it with
    ``shift_state(canonical_initial_state(), -60.0)``.
    """
    return NeuronParams(v_na=60.0, v_k=-75.0, v_ca=80.0, v_l=-60.0, voltage_offset=0.0)


PRESETS: dict[str, Callable[[], NeuronParams]] = {
    "canonical": canonical_params,
    "table": table_params,
}


def canonical_initial_state() -> NeuronState:
    return NeuronState(-4.6, -4.5, 0.999, 0.001, 0.009, 0.007, 0.01, 0.2)


def shift_state(state: NeuronState, dv: float) -> NeuronState:
    """Move both membrane potentials by ``dv`` (change of voltage frame)."""
    values = state.as_array()
    values[VS] += dv
    values[VD] += dv
    return NeuronState.from_array(values)


def initial_state_for(params: NeuronParams) -> NeuronState:
    """Canonical initial state expressed in the frame of ``params``."""
    return shift_state(canonical_initial_state(), params.voltage_offset - 60.0)


def simulate(
    params: NeuronParams,
    alpha: Union[FractionalOrder, float],
    solver: SolverConfig,
    gates: RateFunctionSet = RateFunctionSet.SMOOTH,
    y0: Optional[NeuronState] = None,
) -> Trajectory:
    """Integrate the cell from ``y0`` (default: canonical initial state in the params frame)."""
    start = y0 if y0 is not None else initial_state_for(params)
    L.debug(f"simulate: alpha={float(FractionalOrder.coerce(alpha))}, I_Sapp={params.i_sapp}, "
            f"I_Dapp={params.i_dapp}, gates={RateFunctionSet(gates).value}")
    return solve_caputo_abm(make_rhs(params, alpha, gates), start.as_array(), alpha, solver)


def current_traces(
    trajectory: Trajectory,
    params: NeuronParams,
    gates: RateFunctionSet = RateFunctionSet.SMOOTH,
) -> np.ndarray:
    """Per-sample CurrentBreakdown rows, columns ordered as CURRENT_LABELS."""
    variant = RateFunctionSet(gates)
    rows = [_evaluate(tuple(y.tolist()), params, variant)[0] for y in trajectory.states]
    return np.array(rows, dtype=float).reshape(len(rows), len(CURRENT_LABELS))
