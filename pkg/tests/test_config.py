"""Tests for config module (defaults, YAML files, env resolution, unit conversion)."""

import math

import pytest

from squeezed_ladder.config import (
    CONFIG_ENV,
    DEFAULTS,
    DIM_ENV,
    canonical,
    coerce_setting,
    experiment_from_settings,
    load_config_file,
    noise_from_settings,
    resolve_settings,
    settings_from_experiment,
)
from squeezed_ladder.exceptions import RatioError, ValidationError
from squeezed_ladder.hamiltonians import NoiseParams


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    monkeypatch.delenv(CONFIG_ENV, raising=False)
    monkeypatch.delenv(DIM_ENV, raising=False)


class TestCoerce:
    # Tests that values are rounded to 12 significant digits.
    def test_canonical(self):
        assert canonical(1 / 3) == 0.333333333333
        assert coerce_setting("r", "0.1234567890123456") == 0.123456789012

    # Tests that unknown keys are rejected.
    def test_unknown_key(self):
        with pytest.raises(ValidationError, match="Unknown setting 'colour'"):
            coerce_setting("colour", "blue")

    # Tests that dim must be a whole number of at least 2.
    @pytest.mark.parametrize("value", ["12.5", "abc", "1"])
    def test_bad_dim(self, value):
        with pytest.raises(ValidationError, match="dim must be an integer"):
            coerce_setting("dim", value)

    # Tests that dim accepts integral floats.
    def test_dim_integral_float(self):
        assert coerce_setting("dim", "64.0") == 64

    # Tests that the Lamb-Dicke order is normalized to lowercase.
    def test_ld_order(self):
        assert coerce_setting("ld_order", "ALL_ORDERS") == "all_orders"
        with pytest.raises(ValidationError, match="ld_order"):
            coerce_setting("ld_order", "cubic")

    # Tests that non-finite numbers are rejected.
    def test_non_finite(self):
        with pytest.raises(ValidationError, match="finite"):
            coerce_setting("eta", "nan")


class TestResolve:
    # Tests that defaults apply when nothing else is given.
    def test_defaults(self):
        assert resolve_settings() == DEFAULTS

    # Tests that a config file overrides the defaults.
    def test_config_file(self, tmp_path):
        path = tmp_path / "lab.yaml"
        path.write_text("r: 0.5\nomega_plus: 5000\n")
        settings = resolve_settings(config_path=str(path))
        assert settings["r"] == 0.5
        assert settings["omega_plus"] == 5000.0
        assert settings["dim"] == DEFAULTS["dim"]

    # Tests that the config file can come from the environment.
    def test_config_env(self, tmp_path, monkeypatch):
        path = tmp_path / "lab.yaml"
        path.write_text("eta: 0.08\n")
        monkeypatch.setenv(CONFIG_ENV, str(path))
        assert resolve_settings()["eta"] == 0.08

    # Tests that flags beat the environment, which beats the file.
    def test_precedence(self, tmp_path, monkeypatch):
        path = tmp_path / "lab.yaml"
        path.write_text("dim: 40\nr: 0.3\n")
        monkeypatch.setenv(DIM_ENV, "48")
        settings = resolve_settings({"dim": None, "r": 0.7}, str(path))
        assert settings["dim"] == 48
        assert settings["r"] == 0.7
        assert resolve_settings({"dim": 56}, str(path))["dim"] == 56

    # Tests that a missing config file is reported.
    def test_missing_file(self, tmp_path):
        with pytest.raises(ValidationError, match="Config file not found"):
            load_config_file(str(tmp_path / "absent.yaml"))

    # Tests that a config file must hold a mapping.
    def test_not_a_mapping(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- r\n- eta\n")
        with pytest.raises(ValidationError, match="mapping"):
            load_config_file(str(path))

    # Tests that unknown keys in a config file are rejected.
    def test_file_unknown_key(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("squeeze: 1.0\n")
        with pytest.raises(ValidationError, match="Unknown setting"):
            load_config_file(str(path))


class TestConversion:
    # Tests that frequencies in Hz become angular frequencies.
    def test_hz_to_rad(self):
        config = experiment_from_settings({"omega_plus": 4300.0, "dim": 32})
        assert config.omega_plus == pytest.approx(2 * math.pi * 4300)
        assert config.space.dim == 32
        assert config.squeeze.r == DEFAULTS["r"]

    # Tests that noise rates are converted the same way.
    def test_noise(self):
        noise = noise_from_settings({"delta": 30.0, "gamma_amp": 10.7})
        assert noise.delta == pytest.approx(2 * math.pi * 30)
        assert noise.gamma_amp == pytest.approx(2 * math.pi * 10.7)
        assert noise.gamma_phase == 0.0

    # Tests that Omega_b >= Omega_r fails when the configuration is built.
    def test_ratio_error(self):
        with pytest.raises(RatioError):
            experiment_from_settings({"omega_red": 1000.0, "omega_blue": 1000.0})

    # Tests that settings survive a conversion round trip.
    def test_settings_round_trip(self):
        settings = {**DEFAULTS, "r": 0.75, "phi": 1.25, "omega_minus": 3900.0}
        config = experiment_from_settings(settings)
        back = settings_from_experiment(config)
        for key, value in back.items():
            assert value == settings[key]
        assert "delta" not in back

    # Tests that noise keys are written only when noise is given.
    def test_settings_with_noise(self):
        config = experiment_from_settings({})
        back = settings_from_experiment(config, NoiseParams(delta=2 * math.pi * 30))
        assert back["delta"] == 30.0
        assert back["gamma_amp"] == 0.0
