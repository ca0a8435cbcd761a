"""FMCW radar parameterization and derived resolution figures.

The defaults reproduce a TI AWR1843-class setup: a 77 -> 80.9 GHz ramp,
256 fast-time samples, 128 chirps per frame at 10 frames/s with 3 TX and
4 RX antennas. Neither the ADC window nor the chirp repetition interval is
published for that setup; ``sampled_bandwidth_hz`` and ``chirp_interval_s``
below are back-solved from the quoted resolutions (about 4.3 cm and
7.1 cm/s) and are not measured values.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError

SPEED_OF_LIGHT = 299_792_458.0  # m/s


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class RadarConfig:
    carrier_hz: float = 77.0e9
    swept_bandwidth_hz: float = 3.9e9
    sampled_bandwidth_hz: float = 3.488e9
    chirp_interval_s: float = 214.3e-6
    samples_per_chirp: int = 256
    chirps_per_frame: int = 128
    frame_rate_hz: float = 10.0
    tx_count: int = 3
    rx_count: int = 4
    rx_spacing_m: float = SPEED_OF_LIGHT / 77.0e9 / 2.0
    snr_db: float = 20.0
    rng_seed: int = 0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float) and math.isnan(v):
                raise ConfigError(f"{f.name} is NaN")
        if not self.carrier_hz > 0:
            raise ConfigError("carrier_hz must be > 0")
        if not 0 < self.sampled_bandwidth_hz <= self.swept_bandwidth_hz:
            raise ConfigError("require 0 < sampled_bandwidth_hz <= swept_bandwidth_hz")
        if self.samples_per_chirp < 2 or not _is_pow2(self.samples_per_chirp):
            raise ConfigError("samples_per_chirp must be a power of two >= 2")
        if self.chirps_per_frame < 2 or not _is_pow2(self.chirps_per_frame):
            raise ConfigError("chirps_per_frame must be a power of two >= 2")
        if not self.chirp_interval_s > 0 or not self.frame_rate_hz > 0:
            raise ConfigError("chirp_interval_s and frame_rate_hz must be > 0")
        if self.chirp_interval_s * self.chirps_per_frame > 1.0 / self.frame_rate_hz:
            raise ConfigError("chirps of one frame do not fit in the frame period")
        if self.tx_count < 1 or self.rx_count < 1:
            raise ConfigError("tx_count and rx_count must be >= 1")
        if not self.rx_spacing_m > 0:
            raise ConfigError("rx_spacing_m must be > 0")
        if not -(2**63) <= self.rng_seed < 2**64:
            raise ConfigError("rng_seed must fit in 64 bits")

    def replace(self, **changes) -> "RadarConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        """64-bit digest (16 hex chars) binding generated data to these parameters."""
        doc = json.dumps(self.to_dict(), sort_keys=True, allow_nan=True)
        return hashlib.blake2b(doc.encode("utf-8"), digest_size=8).hexdigest()


@dataclass(frozen=True)
class DerivedParams:
    wavelength_m: float
    range_resolution_m: float
    max_range_m: float
    velocity_resolution_mps: float
    max_velocity_mps: float


def default_config() -> RadarConfig:
    return RadarConfig()


def derive(config: RadarConfig) -> DerivedParams:
    wavelength = SPEED_OF_LIGHT / config.carrier_hz
    range_res = SPEED_OF_LIGHT / (2.0 * config.sampled_bandwidth_hz)
    vel_res = wavelength / (2.0 * config.chirps_per_frame * config.chirp_interval_s)
    # Written as products so the bin-count identities hold bitwise; they equal
    # c/(2 B_valid) * N and lambda / (4 T) respectively.
    return DerivedParams(
        wavelength_m=wavelength,
        range_resolution_m=range_res,
        max_range_m=config.samples_per_chirp * range_res,
        velocity_resolution_mps=vel_res,
        max_velocity_mps=(config.chirps_per_frame / 2) * vel_res,
    )


def adc_window_s(config: RadarConfig) -> float:
    """Duration of the fast-time sampling window.

    The ramp is assumed to span the whole chirp interval, so the window is the
    fraction of it that covers ``sampled_bandwidth_hz``.
    """
    return config.chirp_interval_s * config.sampled_bandwidth_hz / config.swept_bandwidth_hz


def adc_rate_hz(config: RadarConfig) -> float:
    return config.samples_per_chirp / adc_window_s(config)


def rx_positions(config: RadarConfig) -> list[tuple[float, float, float]]:
    """Uniform linear RX array along x, centred on the origin."""
    n = config.rx_count
    s = config.rx_spacing_m
    return [((i - (n - 1) / 2.0) * s, 0.0, 0.0) for i in range(n)]


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RadarConfig)}


def _coerce(name: str, value):
    kind = _FIELD_TYPES[name]
    if kind in ("int", int):
        if isinstance(value, bool):
            raise ConfigError(f"{name}: expected integer, got {value!r}")
        if isinstance(value, str):
            try:
                return int(value, 0)
            except ValueError:
                raise ConfigError(f"{name}: expected integer, got {value!r}") from None
        if isinstance(value, float):
            if not value.is_integer():
                raise ConfigError(f"{name}: expected integer, got {value!r}")
            return int(value)
        if isinstance(value, int):
            return value
        raise ConfigError(f"{name}: expected integer, got {value!r}")
    # floats; snr may be disabled with inf / null
    if value is None and name == "snr_db":
        return math.inf
    if isinstance(value, bool):
        raise ConfigError(f"{name}: expected number, got {value!r}")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected number, got {value!r}") from None


def config_from_dict(doc: dict, base: RadarConfig | None = None) -> RadarConfig:
    unknown = sorted(set(doc) - set(_FIELD_TYPES))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    base = base or default_config()
    return base.replace(**{k: _coerce(k, v) for k, v in doc.items()})


def load_config(path) -> RadarConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"config parse error at line {e.lineno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    return config_from_dict(doc)


def save_config(config: RadarConfig, path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2) + "\n", encoding="utf-8")


def apply_overrides(config: RadarConfig, assignments) -> RadarConfig:
    """Apply ``key=value`` strings as given to ``--set``."""
    changes = {}
    for item in assignments or ():
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"override must look like key=value: {item!r}")
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config keys: {key}")
        changes[key] = _coerce(key, value.strip())
    return config.replace(**changes) if changes else config
