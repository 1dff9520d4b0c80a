"""
Run configuration for the fracpr command line.
"""

import os
from collections.abc import Callable
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, NamedTuple, Optional

import numpy as np
from pydantic import ValidationError

from .analysis import normalize_parameter
from .exceptions import ConfigFileError, InvalidConfigError, InvalidScanError
from .fde_solver import DEFAULT_STEP_SIZE, DEFAULT_T_END, FractionalOrder, SolverConfig
from .pinsky_rinzel import PRESETS, NeuronParams, RateFunctionSet

COMMANDS = ("simulate", "bifurcate", "stability-scan", "equilibrium", "spike-metrics")
SEED_MODES = ("warm", "canonical")


def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off", ""):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _optional(parse: Callable[[str], Any]) -> Callable[[str], Any]:
    def parse_optional(value: str) -> Any:
        if value.strip().lower() in ("", "none"):
            return None
        return parse(value)

    return parse_optional


_SCHEMA: dict[str, Callable[[str], Any]] = {
    "command": str,
    "preset": str,
    "alpha": float,
    "step_size": float,
    "t_end": float,
    "memory_window": _optional(int),
    "corrector_iterations": int,
    "gates": str,
    "scan_param": _optional(str),
    "scan_from": _optional(float),
    "scan_to": _optional(float),
    "scan_steps": _optional(int),
    "increment": _optional(float),
    "transient_cut": float,
    "threshold_offset": float,
    "seed_mode": str,
    "include_currents": _parse_bool,
    "output": Path,
    "workers": int,
    "debug": _parse_bool,
}

# Environment variables honoured, in the order they are read
_ENV_KEYS = {
    "FRACPR_WORKERS": "workers",
    "FRACPR_STEP_SIZE": "step_size",
    "FRACPR_OUTPUT": "output",
}


class RunPlan(NamedTuple):
    """Validated objects a run computes with."""

    params: NeuronParams
    alpha: FractionalOrder
    solver: SolverConfig
    gates: RateFunctionSet
    scan_param: Optional[str]


@dataclass
class RunConfig:
    """Everything one fracpr command needs."""

    command: str = "simulate"

    # Model
    preset: str = "canonical"
    overrides: dict[str, float] = field(default_factory=dict)
    alpha: float = 0.95
    gates: str = "smooth"

    # Solver
    step_size: float = DEFAULT_STEP_SIZE
    t_end: float = DEFAULT_T_END
    memory_window: Optional[int] = None
    corrector_iterations: int = 1

    # Scans
    scan_param: Optional[str] = None
    scan_from: Optional[float] = None
    scan_to: Optional[float] = None
    scan_steps: Optional[int] = None
    increment: Optional[float] = None
    transient_cut: float = 500.0
    threshold_offset: float = 10.0
    seed_mode: str = "warm"

    # Output
    include_currents: bool = False
    output: Path = field(default_factory=lambda: Path("fracpr_output.csv"))
    workers: int = 1
    debug: bool = False

    @classmethod
    def from_cli(cls, overrides: Optional[dict[str, float]] = None, **kwargs: Any) -> "RunConfig":
        """
        Create config from command-line values.

        Options left at None are not applied, so they fall back to defaults.

        Args:
            overrides: Model parameter overrides (NeuronParams field names)
            **kwargs: RunConfig fields

        Returns:
            RunConfig instance
        """
        return cls().apply(kwargs, overrides)

    @classmethod
    def from_file(cls, path: Path) -> "RunConfig":
        """
        Load config from a flat ``key = value`` file.

        Raises:
            ConfigFileError: Unreadable file, unknown key or unparsable value
        """
        values, overrides = read_config_file(path)
        return cls().apply(values, overrides)

    @classmethod
    def from_env(cls) -> "RunConfig":
        """
        Create config from environment variables.

        Environment variables:
            FRACPR_WORKERS: Default parallelism for scans
            FRACPR_STEP_SIZE: Default solver step (ms)
            FRACPR_OUTPUT: Default output path

        Raises:
            ConfigFileError: A variable does not parse
        """
        return cls().merge_with_env()

    def apply(
        self, values: dict[str, Any], overrides: Optional[dict[str, float]] = None
    ) -> "RunConfig":
        """Copy with every non-None value in ``values`` and ``overrides`` applied."""
        known = {f.name for f in fields(self)}
        updates = {}
        for key, value in values.items():
            if key not in known or key == "overrides":
                raise InvalidConfigError(f"unknown configuration key: {key}", key=key)
            if value is not None:
                updates[key] = value
        merged = dict(self.overrides)
        merged.update({k: float(v) for k, v in (overrides or {}).items() if v is not None})
        return replace(self, overrides=merged, **updates)

    def merge_with_env(self) -> "RunConfig":
        """
        Merge current config with environment variables.

        Only variables that are set are applied.

        Returns:
            Updated RunConfig instance
        """
        updates = {}
        for variable, key in _ENV_KEYS.items():
            if variable in os.environ:
                try:
                    updates[key] = _SCHEMA[key](os.environ[variable])
                except ValueError as e:
                    raise ConfigFileError(f"{variable}: {e}", key=key) from e
        return self.apply(updates)

    def to_file(self, path: Path) -> None:
        """Write a config file that ``from_file`` reads back to an equal RunConfig."""
        lines = ["# fracpr run configuration"]
        for key in _SCHEMA:
            value = getattr(self, key)
            if value is None:
                continue
            lines.append(f"{key} = {_format_value(value)}")
        for name in sorted(self.overrides):
            lines.append(f"{name} = {self.overrides[name]!r}")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    def echo(self) -> list[str]:
        """``key = value`` lines as written by ``to_file``, without the header."""
        lines = [f"{k} = {_format_value(getattr(self, k))}" for k in _SCHEMA]
        lines.extend(f"{n} = {self.overrides[n]!r}" for n in sorted(self.overrides))
        return lines

    def validate(self) -> RunPlan:
        """
        Build and check every model the run needs before any computation.

        Raises:
            InvalidConfigError: Message and ``key`` name the offending setting
        """
        if self.command not in COMMANDS:
            raise InvalidConfigError(f"unknown command: {self.command}", key="command")
        if self.preset not in PRESETS:
            raise InvalidConfigError(f"unknown preset: {self.preset}", key="preset")
        try:
            gates = RateFunctionSet(self.gates)
        except ValueError:
            raise InvalidConfigError(
                f"unknown rate-function set: {self.gates}", key="gates"
            ) from None
        if self.seed_mode not in SEED_MODES:
            raise InvalidConfigError(f"unknown seed mode: {self.seed_mode}", key="seed_mode")
        if self.workers < 1:
            raise InvalidConfigError("workers must be at least 1", key="workers")

        unknown = set(self.overrides) - set(NeuronParams.model_fields)
        if unknown:
            key = sorted(unknown)[0]
            raise InvalidConfigError(f"unknown model parameter: {key}", key=key)

        base = PRESETS[self.preset]()
        params = _build(lambda: base.model_validate({**base.model_dump(), **self.overrides}))
        alpha = _build(lambda: FractionalOrder(alpha=self.alpha), key="alpha")
        solver = _build(
            lambda: SolverConfig(
                step_size=self.step_size,
                t_end=self.t_end,
                memory_window=self.memory_window,
                corrector_iterations=self.corrector_iterations,
            ),
            fallback="step_size",
        )

        scan_param = self._validate_scan()
        return RunPlan(params, alpha, solver, gates, scan_param)

    def _validate_scan(self) -> Optional[str]:
        if self.command not in ("bifurcate", "stability-scan"):
            return None
        for key in ("scan_param", "scan_from", "scan_to"):
            if getattr(self, key) is None:
                raise InvalidConfigError(f"{self.command} needs {key}", key=key)
        try:
            name = normalize_parameter(self.scan_param or "")
        except InvalidScanError as e:
            raise InvalidConfigError(str(e), key="scan_param") from e

        assert self.scan_from is not None and self.scan_to is not None
        if self.scan_from >= self.scan_to:
            raise InvalidConfigError("scan_from must be below scan_to", key="scan_from")

        if self.command == "bifurcate":
            if self.scan_steps is None or self.scan_steps < 1:
                raise InvalidConfigError("bifurcate needs scan_steps >= 1", key="scan_steps")
            if self.transient_cut >= self.t_end:
                raise InvalidConfigError("transient_cut must be before t_end", key="transient_cut")
            if name == "alpha" and (self.scan_from <= 0.0 or self.scan_to > 1.0):
                raise InvalidConfigError("alpha scan must lie in (0, 1]", key="scan_from")
        else:
            if name == "alpha":
                raise InvalidConfigError(
                    "stability scans run over i_sapp or i_dapp", key="scan_param"
                )
            if self.increment is None or self.increment <= 0.0:
                raise InvalidConfigError("stability-scan needs increment > 0", key="increment")
        return name

    def scan_values(self) -> np.ndarray:
        """Bifurcation grid: ``scan_steps`` evenly spaced values from scan_from to scan_to."""
        assert self.scan_from is not None and self.scan_to is not None
        steps = self.scan_steps or 1
        if steps == 1:
            return np.array([self.scan_from])
        return np.linspace(self.scan_from, self.scan_to, steps)


def _format_value(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _build(
    factory: Callable[[], Any], key: Optional[str] = None, fallback: str = "config"
) -> Any:
    try:
        return factory()
    except ValidationError as e:
        error = e.errors()[0]
        name = key or (str(error["loc"][0]) if error["loc"] else fallback)
        raise InvalidConfigError(f"{name}: {error['msg']}", key=name) from e


def read_config_file(path: Path) -> tuple[dict[str, Any], dict[str, float]]:
    """
    Parse a flat config file into RunConfig values and model overrides.

    Raises:
        ConfigFileError: Names the key and line of the first problem
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigFileError(f"cannot read config file {path}: {e}") from e

    values: dict[str, Any] = {}
    overrides: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigFileError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        try:
            if key in _SCHEMA:
                values[key] = _SCHEMA[key](value)
            elif key in NeuronParams.model_fields:
                overrides[key] = float(value)
            else:
                raise ConfigFileError(f"{path}:{lineno}: unknown key '{key}'", key=key)
        except ValueError as e:
            raise ConfigFileError(f"{path}:{lineno}: bad value for '{key}': {e}", key=key) from e
    return values, overrides
