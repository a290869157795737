"""Experiment settings: defaults, YAML config files and flag/env resolution.

Settings are kept in laboratory units (Hz for frequencies and rates,
radians, seconds) and converted to rad/s only when the physics objects are
built. Resolution order for every key: CLI flag -> environment -> config file
-> built-in default.
"""

from __future__ import annotations

import math
import os
from typing import Any

import yaml

from squeezed_ladder.exceptions import ValidationError
from squeezed_ladder.hamiltonians import (
    LD_ORDERS,
    ExperimentConfig,
    LambDicke,
    NoiseParams,
)
from squeezed_ladder.hilbert import DEFAULT_DIM, FockSpace, SqueezeParams

CONFIG_ENV = "SQLADDER_CONFIG"
DIM_ENV = "SQLADDER_DIM"
SIGNIFICANT_DIGITS = 12

DEFAULTS: dict[str, Any] = {
    "dim": DEFAULT_DIM,
    "eta": 0.05,
    "r": 1.0,
    "phi": 0.0,
    "alpha_re": 0.0,
    "alpha_im": 0.0,
    "omega_plus": 4300.0,
    "omega_minus": 4300.0,
    "omega_carrier": 50000.0,
    "omega_red": 0.0,
    "omega_blue": 0.0,
    "delta": 0.0,
    "gamma_amp": 0.0,
    "gamma_phase": 0.0,
    "trap_frequency": 2.07e6,
    "ld_order": "linear",
}

# Trap-drive detuning and reservoir rates that reproduce the measured
# flopping decay (Hz).
REFERENCE_NOISE: dict[str, float] = {
    "delta": 30.0,
    "gamma_amp": 10.7,
    "gamma_phase": 5.0,
}

FREQUENCY_KEYS = frozenset({
    "omega_plus", "omega_minus", "omega_carrier", "omega_red", "omega_blue",
    "delta", "gamma_amp", "gamma_phase", "trap_frequency",
})
NOISE_KEYS = ("delta", "gamma_amp", "gamma_phase")


def canonical(value: float) -> float:
    """Round to the precision used when settings are written out."""
    return float(f"{value:.{SIGNIFICANT_DIGITS}g}")


def hz_to_rad(value: float) -> float:
    return 2 * math.pi * value


def coerce_setting(key: str, value: Any) -> Any:
    """Convert a raw setting to its canonical type.

    Raises:
        ValidationError: For unknown keys or values of the wrong kind.
    """
    if key not in DEFAULTS:
        raise ValidationError(f"Unknown setting {key!r}; expected one of {', '.join(DEFAULTS)}")
    if key == "ld_order":
        text = str(value).strip().lower()
        if text not in LD_ORDERS:
            raise ValidationError(f"ld_order must be one of {LD_ORDERS}, got {value!r}")
        return text
    if key == "dim":
        try:
            as_float = float(value)
        except (TypeError, ValueError):
            raise ValidationError(f"dim must be an integer, got {value!r}")
        if not as_float.is_integer() or as_float < 2:
            raise ValidationError(f"dim must be an integer >= 2, got {value!r}")
        return int(as_float)
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{key} must be a number, got {value!r}")
    if not math.isfinite(number):
        raise ValidationError(f"{key} must be finite, got {value!r}")
    return canonical(number)


def load_config_file(path: str) -> dict[str, Any]:
    """Read a YAML settings file (same keys as the sequence-file ``set`` directive)."""
    if not os.path.exists(path):
        raise ValidationError(f"Config file not found: {path}")
    with open(path, "r") as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise ValidationError(f"Config file {path} must contain a mapping of settings")
    return {str(k): coerce_setting(str(k), v) for k, v in data.items()}


def resolve_settings(overrides: dict[str, Any] | None = None,
                     config_path: str | None = None) -> dict[str, Any]:
    """Merge settings from flags -> env vars -> config file -> defaults.

    ``overrides`` holds values given on the command line; None entries are
    treated as not given.
    """
    settings = dict(DEFAULTS)
    path = config_path or os.environ.get(CONFIG_ENV)
    if path:
        settings.update(load_config_file(path))
    env_dim = os.environ.get(DIM_ENV)
    if env_dim:
        settings["dim"] = coerce_setting("dim", env_dim)
    for key, value in (overrides or {}).items():
        if value is not None:
            settings[key] = coerce_setting(key, value)
    return settings


def experiment_from_settings(settings: dict[str, Any]) -> ExperimentConfig:
    """Build the physics configuration (rad/s) from lab-unit settings."""
    s = {**DEFAULTS, **settings}

    def rad(key: str) -> float:
        return hz_to_rad(float(s[key]))

    return ExperimentConfig(
        space=FockSpace(int(s["dim"])),
        squeeze=SqueezeParams(float(s["r"]), float(s["phi"])),
        lamb_dicke=LambDicke(float(s["eta"])),
        trap_frequency=rad("trap_frequency"),
        omega_plus=rad("omega_plus"),
        omega_minus=rad("omega_minus"),
        omega_carrier=rad("omega_carrier"),
        omega_red=rad("omega_red"),
        omega_blue=rad("omega_blue"),
        alpha=complex(float(s["alpha_re"]), float(s["alpha_im"])),
        ld_order=str(s["ld_order"]),
    )


def noise_from_settings(settings: dict[str, Any]) -> NoiseParams:
    s = {**DEFAULTS, **settings}
    return NoiseParams(
        delta=hz_to_rad(float(s["delta"])),
        gamma_amp=hz_to_rad(float(s["gamma_amp"])),
        gamma_phase=hz_to_rad(float(s["gamma_phase"])),
    )


def settings_from_experiment(config: ExperimentConfig,
                             noise: NoiseParams | None = None) -> dict[str, Any]:
    """Inverse of experiment_from_settings, rounded to the written precision."""
    def hz(value: float) -> float:
        return canonical(value / (2 * math.pi))

    settings: dict[str, Any] = {
        "dim": config.space.dim,
        "eta": canonical(config.lamb_dicke.eta),
        "r": canonical(config.squeeze.r),
        "phi": canonical(config.squeeze.phi),
        "alpha_re": canonical(config.alpha.real),
        "alpha_im": canonical(config.alpha.imag),
        "omega_plus": hz(config.omega_plus),
        "omega_minus": hz(config.omega_minus),
        "omega_carrier": hz(config.omega_carrier),
        "omega_red": hz(config.omega_red),
        "omega_blue": hz(config.omega_blue),
        "trap_frequency": hz(config.trap_frequency),
        "ld_order": config.ld_order,
    }
    if noise is not None:
        settings.update({
            "delta": hz(noise.delta),
            "gamma_amp": hz(noise.gamma_amp),
            "gamma_phase": hz(noise.gamma_phase),
        })
    return settings
