"""Flat key = value experiment configuration."""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError
from .params import SystemParams

OUTPUT_DIR_ENV = "CATQEC_OUTPUT_DIR"
PLANT_KINDS = ("phenomenological", "full")
SCHEMES = ("transmon", "fock", "uncorrected", "corrected")


def _default_times() -> tuple:
    return tuple(110.0 * i / 8 for i in range(9))


def _default_transmon_times() -> tuple:
    return tuple(5.0 * i for i in range(10))


@dataclass(frozen=True)
class ExperimentConfig:
    params: SystemParams = field(default_factory=SystemParams)
    nbar0: float = 2.0
    dim: int = 20
    plant: str = "phenomenological"
    shots: int = 1000  # runs per (time, input, axis)
    seed: int | None = None
    output_dir: str | None = None
    times: tuple = field(default_factory=_default_times)
    transmon_times: tuple = field(default_factory=_default_transmon_times)
    schedule: str = "optimal"  # "optimal" or "fixed"
    step_period: float = 20.0  # used when schedule is "fixed"
    kerr_aware: bool = True
    pulse_infidelity: float = 0.04
    fock_pulse_infidelity: float = 0.02
    decode_sigma_deg: float = 24.0
    unitary_codec: bool = True
    schemes: tuple = SCHEMES
    write_records: bool = True

    def __post_init__(self):
        if self.shots < 1:
            raise ConfigError("shots must be at least 1", "shots")
        if self.nbar0 <= 0:
            raise ConfigError("nbar0 must be positive", "nbar0")
        if self.dim < 4:
            raise ConfigError("dim must be at least 4", "dim")
        if self.plant not in PLANT_KINDS:
            raise ConfigError(f"plant must be one of {PLANT_KINDS}", "plant")
        if self.schedule not in ("optimal", "fixed"):
            raise ConfigError("schedule must be 'optimal' or 'fixed'", "schedule")
        if self.step_period <= 0:
            raise ConfigError("step_period must be positive", "step_period")
        for key in ("times", "transmon_times"):
            ts = getattr(self, key)
            if not ts or any(t < 0 or not math.isfinite(t) for t in ts):
                raise ConfigError("times must be non-empty, finite and non-negative", key)
        for key in ("pulse_infidelity", "fock_pulse_infidelity"):
            if not 0.0 <= getattr(self, key) <= 0.75:
                raise ConfigError("pulse infidelity must lie in [0, 0.75]", key)
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad:
            raise ConfigError(f"unknown scheme {bad[0]!r}", "schemes")

    def resolved_output_dir(self) -> Path:
        return Path(self.output_dir or os.environ.get(OUTPUT_DIR_ENV) or "catqec_output")

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "params"}
        out.update(dataclasses.asdict(self.params))
        return {k: list(v) if isinstance(v, tuple) else v for k, v in out.items()}


_PARAM_FIELDS = {f.name: f for f in dataclasses.fields(SystemParams)}
_EXP_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig) if f.name != "params"}
_TUPLE_FLOAT = {"times", "transmon_times"}
_TUPLE_STR = {"schemes"}
_BOOL = {"kerr_aware", "unitary_codec", "write_records"}
_INT = {"dim", "shots", "seed"}
_STR = {"plant", "output_dir", "schedule"}


def _parse_value(key: str, raw: Any):
    if not isinstance(raw, str):
        return tuple(raw) if isinstance(raw, list) else raw
    text = raw.strip()
    try:
        if key in _TUPLE_FLOAT:
            return tuple(float(x) for x in text.split(",") if x.strip())
        if key in _TUPLE_STR:
            return tuple(x.strip() for x in text.split(",") if x.strip())
        if key in _BOOL:
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return low in ("true", "1", "yes")
        if key in _INT:
            return None if text.lower() == "none" else int(text)
        if key in _STR:
            return None if text.lower() == "none" else text
        if key == "Gamma_up" and text.lower() == "none":
            return None
        return float(text)
    except ValueError:
        raise ConfigError(f"cannot parse value {raw!r} for key {key!r}", key) from None


def config_from_mapping(values: Mapping[str, Any], base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Build a config from key -> value; unknown keys are errors."""
    base = base or ExperimentConfig()
    param_changes, exp_changes = {}, {}
    for key, raw in values.items():
        if key in _PARAM_FIELDS:
            param_changes[key] = _parse_value(key, raw)
        elif key in _EXP_FIELDS:
            exp_changes[key] = _parse_value(key, raw)
        else:
            raise ConfigError(f"unknown configuration key {key!r}", key)
    try:
        params = base.params.replace(**param_changes) if param_changes else base.params
    except ValueError as exc:
        key = next((k for k in param_changes if k in str(exc)), next(iter(param_changes)))
        raise ConfigError(str(exc), key) from None
    return dataclasses.replace(base, params=params, **exp_changes)


def parse_config_text(text: str) -> dict:
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'", line)
        key, value = (part.strip() for part in line.split("=", 1))
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}", key)
        values[key] = value
    return values


def load_config(path) -> ExperimentConfig:
    return config_from_mapping(parse_config_text(Path(path).read_text()))


def dump_config(config: ExperimentConfig) -> str:
    lines = []
    for key, value in config.to_dict().items():
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
