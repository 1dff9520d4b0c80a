"""
Unit tests for run configuration: files, environment, precedence and validation.
"""

from pathlib import Path

import numpy as np
import pytest

from fracpr.config import RunConfig, read_config_file
from fracpr.exceptions import ConfigFileError, InvalidConfigError
from fracpr.pinsky_rinzel import RateFunctionSet


@pytest.mark.unit
class TestRunConfigDefaults:
    """Test default values."""

    def test_defaults(self, clean_env):
        config = RunConfig()
        assert config.command == "simulate"
        assert config.preset == "canonical"
        assert config.alpha == 0.95
        assert config.step_size == 0.05
        assert config.t_end == 1000.0
        assert config.gates == "smooth"
        assert config.seed_mode == "warm"
        assert config.workers == 1
        assert config.overrides == {}
        assert config.output == Path("fracpr_output.csv")

    def test_from_cli_skips_none(self):
        config = RunConfig.from_cli(alpha=None, t_end=50.0, overrides={"i_sapp": None})
        assert config.alpha == 0.95
        assert config.t_end == 50.0
        assert config.overrides == {}

    def test_from_cli_unknown_key(self):
        with pytest.raises(InvalidConfigError) as excinfo:
            RunConfig.from_cli(colour="blue")
        assert excinfo.value.key == "colour"


@pytest.mark.unit
class TestConfigFile:
    """Test reading and writing flat config files."""

    def test_round_trip(self, tmp_path):
        config = RunConfig.from_cli(
            command="bifurcate",
            alpha=0.9,
            t_end=1500.0,
            memory_window=2000,
            scan_param="alpha",
            scan_from=0.7,
            scan_to=1.0,
            scan_steps=150,
            include_currents=True,
            output=tmp_path / "scan.csv",
            overrides={"i_sapp": 0.75, "g_c": 2.3},
        )
        path = tmp_path / "run.cfg"
        config.to_file(path)
        assert RunConfig.from_file(path) == config

    def test_comments_dashes_and_overrides(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "# a comment\n\nstep-size = 0.01  # finer\ngates = nonsmooth\ni_dapp = -1.5\n",
            encoding="utf-8",
        )
        values, overrides = read_config_file(path)
        assert values == {"step_size": 0.01, "gates": "nonsmooth"}
        assert overrides == {"i_dapp": -1.5}

    def test_unknown_key_names_key_and_line(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("alpha = 0.9\nbogus = 1\n", encoding="utf-8")
        with pytest.raises(ConfigFileError) as excinfo:
            RunConfig.from_file(path)
        assert excinfo.value.key == "bogus"
        assert ":2:" in str(excinfo.value)
        assert "bogus" in str(excinfo.value)

    def test_bad_value(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("workers = many\n", encoding="utf-8")
        with pytest.raises(ConfigFileError) as excinfo:
            read_config_file(path)
        assert excinfo.value.key == "workers"

    def test_missing_separator(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("alpha 0.9\n", encoding="utf-8")
        with pytest.raises(ConfigFileError):
            read_config_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigFileError):
            read_config_file(tmp_path / "absent.cfg")


@pytest.mark.unit
class TestEnvironment:
    """Test environment variables and precedence."""

    def test_env_applied(self, clean_env):
        clean_env.setenv("FRACPR_WORKERS", "4")
        clean_env.setenv("FRACPR_STEP_SIZE", "0.02")
        config = RunConfig.from_env()
        assert config.workers == 4
        assert config.step_size == 0.02

    def test_unset_env_keeps_defaults(self, clean_env):
        assert RunConfig.from_env() == RunConfig()

    def test_bad_env_value(self, clean_env):
        clean_env.setenv("FRACPR_WORKERS", "four")
        with pytest.raises(ConfigFileError) as excinfo:
            RunConfig.from_env()
        assert excinfo.value.key == "workers"

    def test_precedence(self, clean_env, tmp_path):
        clean_env.setenv("FRACPR_WORKERS", "4")
        clean_env.setenv("FRACPR_STEP_SIZE", "0.02")
        path = tmp_path / "run.cfg"
        path.write_text("workers = 2\nalpha = 0.8\n", encoding="utf-8")

        values, overrides = read_config_file(path)
        config = RunConfig.from_env().apply(values, overrides).apply({"alpha": 0.9})
        assert config.step_size == 0.02
        assert config.workers == 2
        assert config.alpha == 0.9


@pytest.mark.unit
class TestValidate:
    """Test validation into a run plan."""

    def test_plan_for_defaults(self):
        plan = RunConfig.from_cli(overrides={"i_sapp": 0.75}).validate()
        assert plan.alpha.alpha == 0.95
        assert plan.params.i_sapp == 0.75
        assert plan.solver.n_steps == 20000
        assert plan.gates is RateFunctionSet.SMOOTH
        assert plan.scan_param is None

    def test_table_preset(self):
        plan = RunConfig.from_cli(preset="table").validate()
        assert plan.params.voltage_offset == 0.0

    @pytest.mark.parametrize(
        "kwargs,key",
        [
            ({"alpha": 1.5}, "alpha"),
            ({"alpha": 0.0}, "alpha"),
            ({"overrides": {"p": 1.0}}, "p"),
            ({"overrides": {"g_na": -1.0}}, "g_na"),
            ({"overrides": {"g_xyz": 1.0}}, "g_xyz"),
            ({"step_size": -0.1}, "step_size"),
            ({"step_size": 5.0, "t_end": 1.0}, "step_size"),
            ({"memory_window": 1}, "memory_window"),
            ({"command": "plot"}, "command"),
            ({"preset": "other"}, "preset"),
            ({"gates": "jagged"}, "gates"),
            ({"seed_mode": "hot"}, "seed_mode"),
            ({"workers": 0}, "workers"),
        ],
    )
    def test_errors_name_the_key(self, kwargs, key):
        with pytest.raises(InvalidConfigError) as excinfo:
            RunConfig.from_cli(**kwargs).validate()
        assert excinfo.value.key == key

    @pytest.mark.parametrize(
        "kwargs,key",
        [
            ({"command": "bifurcate", "scan_from": 0.7, "scan_to": 1.0, "scan_steps": 3}, "scan_param"),
            ({"command": "bifurcate", "scan_param": "alpha", "scan_to": 1.0}, "scan_from"),
            ({"command": "bifurcate", "scan_param": "g_c", "scan_from": 0.0, "scan_to": 1.0, "scan_steps": 3}, "scan_param"),
            ({"command": "bifurcate", "scan_param": "alpha", "scan_from": 0.9, "scan_to": 0.8, "scan_steps": 3}, "scan_from"),
            ({"command": "bifurcate", "scan_param": "alpha", "scan_from": 0.7, "scan_to": 1.0}, "scan_steps"),
            ({"command": "bifurcate", "scan_param": "alpha", "scan_from": 0.7, "scan_to": 1.2, "scan_steps": 3}, "scan_from"),
            ({"command": "bifurcate", "scan_param": "i_sapp", "scan_from": 0.0, "scan_to": 1.0, "scan_steps": 3, "t_end": 400.0}, "transient_cut"),
            ({"command": "stability-scan", "scan_param": "alpha", "scan_from": 0.5, "scan_to": 1.0, "increment": 0.1}, "scan_param"),
            ({"command": "stability-scan", "scan_param": "i_sapp", "scan_from": -2.0, "scan_to": 1.0}, "increment"),
        ],
    )
    def test_scan_errors(self, kwargs, key):
        with pytest.raises(InvalidConfigError) as excinfo:
            RunConfig.from_cli(**kwargs).validate()
        assert excinfo.value.key == key

    def test_scan_parameter_normalized(self):
        config = RunConfig.from_cli(
            command="stability-scan", scan_param="I_Sapp", scan_from=-2.0, scan_to=1.0, increment=0.1
        )
        assert config.validate().scan_param == "i_sapp"

    def test_scan_values(self):
        config = RunConfig.from_cli(
            command="bifurcate", scan_param="alpha", scan_from=0.7, scan_to=1.0, scan_steps=4
        )
        assert np.allclose(config.scan_values(), [0.7, 0.8, 0.9, 1.0])
        single = RunConfig.from_cli(scan_from=0.5, scan_to=1.0, scan_steps=1)
        assert single.scan_values().tolist() == [0.5]

    def test_echo_lists_overrides_last(self):
        lines = RunConfig.from_cli(overrides={"g_c": 2.3}).echo()
        assert lines[0] == "command = simulate"
        assert lines[-1] == "g_c = 2.3"
        assert "alpha = 0.95" in lines
