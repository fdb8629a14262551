"""TOML run configuration with fail-fast validation.

Every tunable constant lives here with its published default; unknown
keys are rejected outright so a typo cannot silently fall back to a
default mid-batch.
"""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import InvalidParameterError, SchemaError


@dataclass
class SignalConfig:
    rate_hz: float = 2150.0
    band_low_hz: float = 20.0
    band_high_hz: float = 450.0
    filter_order: int = 4
    rms_window_ms: float = 200.0

    def validate(self):
        if self.rate_hz <= 0:
            raise InvalidParameterError("signal.rate_hz must be positive")
        if not 0 < self.band_low_hz < self.band_high_hz < self.rate_hz / 2:
            raise InvalidParameterError(
                "signal band must satisfy 0 < low < high < rate/2, got "
                f"({self.band_low_hz}, {self.band_high_hz}) at {self.rate_hz} Hz"
            )
        if self.filter_order < 1:
            raise InvalidParameterError("signal.filter_order must be >= 1")
        if self.rms_window_ms <= 0:
            raise InvalidParameterError("signal.rms_window_ms must be positive")


@dataclass
class SurfacesConfig:
    weights: tuple = (0.6, 0.2, 0.2)
    grid_shape: tuple = (101, 101)
    payload_range_kg: tuple = (5.0, 15.0)

    def validate(self):
        if len(self.weights) != 3 or any(w < 0 for w in self.weights):
            raise InvalidParameterError("surfaces.weights must be 3 nonnegative numbers")
        if len(self.grid_shape) != 2 or any(int(n) < 2 for n in self.grid_shape):
            raise InvalidParameterError("surfaces.grid_shape must be 2 ints >= 2")
        lo, hi = self.payload_range_kg
        if not 0 <= lo < hi:
            raise InvalidParameterError("surfaces.payload_range_kg must be increasing and nonnegative")


@dataclass
class SelectionConfig:
    lambda_theta: float = 0.1
    lambda_d: float = 0.5
    lock_threshold_m: float = 2.0
    softmax_temperature: float = 1.0
    theta_unit: str = "deg"

    def validate(self):
        if self.lambda_theta <= 0 or self.lambda_d <= 0:
            raise InvalidParameterError("selection decay rates must be positive")
        if self.lock_threshold_m <= 0:
            raise InvalidParameterError("selection.lock_threshold_m must be positive")
        if self.softmax_temperature <= 0:
            raise InvalidParameterError("selection.softmax_temperature must be positive")
        if self.theta_unit not in ("deg", "rad"):
            raise InvalidParameterError("selection.theta_unit must be deg|rad")


@dataclass
class ControlConfig:
    k_min: float = 0.2
    k_max: float = 1.0
    medium_fraction: float = 0.65
    fallback_class: str = "light"
    cooldown_s: float = 1.0

    def validate(self):
        if not 0 < self.k_min <= self.k_max:
            raise InvalidParameterError("control needs 0 < k_min <= k_max")
        if self.k_max > 1.0:
            # scaled torque must never exceed the 30 Nm hardware nominal
            raise InvalidParameterError("control.k_max must not exceed 1.0")
        if not 0 <= self.medium_fraction <= 1:
            raise InvalidParameterError("control.medium_fraction must be in [0, 1]")
        if self.fallback_class not in ("light", "medium", "heavy"):
            raise InvalidParameterError("control.fallback_class must be light|medium|heavy")
        if self.cooldown_s < 0:
            raise InvalidParameterError("control.cooldown_s must be nonnegative")


@dataclass
class ReplayConfig:
    backend: str = "recorded"
    timeliness_required: bool = True

    def validate(self):
        if self.backend not in ("recorded", "oracle"):
            raise InvalidParameterError("replay.backend must be recorded|oracle")


@dataclass
class Config:
    seed: int = 42
    signal: SignalConfig = field(default_factory=SignalConfig)
    surfaces: SurfacesConfig = field(default_factory=SurfacesConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    control: ControlConfig = field(default_factory=ControlConfig)
    replay: ReplayConfig = field(default_factory=ReplayConfig)

    def validate(self) -> "Config":
        if not isinstance(self.seed, int) or self.seed < 0:
            raise InvalidParameterError("seed must be a nonnegative integer")
        for section in (self.signal, self.surfaces, self.selection, self.control, self.replay):
            section.validate()
        return self

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {
    "signal": SignalConfig,
    "surfaces": SurfacesConfig,
    "selection": SelectionConfig,
    "control": ControlConfig,
    "replay": ReplayConfig,
}


def _build_section(cls, data: dict, name: str):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise SchemaError(f"unknown key(s) in [{name}]: {sorted(unknown)}")
    coerced = {}
    for f in fields(cls):
        if f.name not in data:
            continue
        value = data[f.name]
        if isinstance(value, list):
            value = tuple(value)
        coerced[f.name] = value
    return cls(**coerced)


def load_config(path) -> Config:
    """Parse and fully validate a TOML config before any work starts."""
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise SchemaError(f"{path}: invalid TOML: {exc}") from exc
    top_known = set(_SECTIONS) | {"seed"}
    unknown = set(raw) - top_known
    if unknown:
        raise SchemaError(f"{path}: unknown top-level key(s): {sorted(unknown)}")
    kwargs = {}
    if "seed" in raw:
        kwargs["seed"] = raw["seed"]
    for name, cls in _SECTIONS.items():
        if name in raw:
            if not isinstance(raw[name], dict):
                raise SchemaError(f"{path}: [{name}] must be a table")
            kwargs[name] = _build_section(cls, raw[name], name)
    return Config(**kwargs).validate()
