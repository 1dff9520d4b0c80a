"""
Shared pytest fixtures and configuration for fracpr tests.
"""

import pytest

from fracpr.config import RunConfig
from fracpr.fde_solver import SolverConfig
from fracpr.pinsky_rinzel import NeuronParams, canonical_params


@pytest.fixture
def params() -> NeuronParams:
    """Canonical parameter set."""
    return canonical_params()


@pytest.fixture
def short_solver() -> SolverConfig:
    """A few hundred steps; enough for smoke runs of the full model."""
    return SolverConfig(step_size=0.05, t_end=20.0)


@pytest.fixture
def clean_env(monkeypatch):
    """Remove every FRACPR_ variable so defaults are predictable."""
    for variable in ("FRACPR_WORKERS", "FRACPR_STEP_SIZE", "FRACPR_OUTPUT"):
        monkeypatch.delenv(variable, raising=False)
    return monkeypatch


@pytest.fixture
def run_config(tmp_path, clean_env) -> RunConfig:
    """Short simulate run writing into a temp directory."""
    return RunConfig.from_cli(
        command="simulate", t_end=5.0, step_size=0.05, output=tmp_path / "out.csv"
    )
