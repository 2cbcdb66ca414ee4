"""Experiment configuration: one JSON document per run, validated up front.

Every field error is raised as :class:`ConfigError` with the dotted path of
the offending field.  Command-line overrides use the same dotted paths
(``--set channel.snr_db=[0,5,10]``).
"""

from __future__ import annotations

import copy
import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .channel import ChannelTap
from .core import DDGridParams, SupportSet
from .exceptions import ConfigError, ZakOTFSError
from .framing import HeaderSpec
from .modem import ModemConfig
from .pilot import validate_spread_params

__all__ = [
    "MODES",
    "ModemSection",
    "TapSpec",
    "ChannelSection",
    "SyncSection",
    "PaprSection",
    "CaptureSection",
    "ExperimentConfig",
    "default_config",
    "load_config",
    "apply_overrides",
    "parse_override",
]

MODES = ("ber-sweep", "papr", "isac-sense", "loopback", "demod-capture")


def _fail(path: str, msg: str):
    raise ConfigError(msg, field=path)


def _expect_keys(data: dict, allowed, path: str) -> None:
    if not isinstance(data, dict):
        _fail(path or "<root>", f"expected an object, got {type(data).__name__}")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        where = f"{path}.{unknown[0]}" if path else unknown[0]
        _fail(where, "unknown field")


def _int(value, path: str, *, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        _fail(path, f"must be >= {minimum}, got {value}")
    return int(value)


def _float(value, path: str, *, positive: bool = False, allow_inf: bool = False) -> float:
    if isinstance(value, str) and allow_inf and value.lower() in ("inf", "+inf"):
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, f"expected a number, got {value!r}")
    value = float(value)
    if math.isnan(value) or (math.isinf(value) and not allow_inf):
        _fail(path, f"must be finite, got {value}")
    if positive and not value > 0:
        _fail(path, f"must be > 0, got {value}")
    return value


def _complex(value, path: str) -> complex:
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(_float(value[0], path + "[0]"), _float(value[1], path + "[1]"))
    return complex(_float(value, path))


@dataclass
class ModemSection:
    M: int = 32
    N: int = 48
    nu_p: float = 30e3
    pilot_mode: str = "point"
    pilot_location: list[int] | None = None
    u: int = 5
    pilot_to_data_db: float = 0.0
    support: dict = field(default_factory=lambda: {"k_min": -6, "k_max": 6, "l_min": -2, "l_max": 2})
    guard: int = 16
    prune_sigma: float = 4.0
    prune_db: float | None = None

    @classmethod
    def from_dict(cls, data: dict, path: str) -> "ModemSection":
        _expect_keys(data, {f.name for f in dataclasses.fields(cls)}, path)
        sec = cls(**data)
        sec.M = _int(sec.M, f"{path}.M", minimum=1)
        sec.N = _int(sec.N, f"{path}.N", minimum=1)
        sec.nu_p = _float(sec.nu_p, f"{path}.nu_p", positive=True)
        if sec.pilot_mode not in ("point", "spread"):
            _fail(f"{path}.pilot_mode", f"must be 'point' or 'spread', got {sec.pilot_mode!r}")
        sec.u = _int(sec.u, f"{path}.u")
        sec.pilot_to_data_db = _float(sec.pilot_to_data_db, f"{path}.pilot_to_data_db")
        sec.guard = _int(sec.guard, f"{path}.guard", minimum=0)
        sec.prune_sigma = _float(sec.prune_sigma, f"{path}.prune_sigma")
        if sec.prune_db is not None:
            sec.prune_db = _float(sec.prune_db, f"{path}.prune_db", positive=True)
        if sec.pilot_location is not None:
            loc = sec.pilot_location
            if not isinstance(loc, (list, tuple)) or len(loc) != 2:
                _fail(f"{path}.pilot_location", "expected [k_p, l_p]")
            sec.pilot_location = [_int(loc[0], f"{path}.pilot_location[0]"), _int(loc[1], f"{path}.pilot_location[1]")]
        _expect_keys(sec.support, ("k_min", "k_max", "l_min", "l_max"), f"{path}.support")
        if sec.pilot_mode == "spread":
            result = validate_spread_params(sec.M, sec.N, sec.u)
            if not result:
                _fail(f"{path}.u" if "gcd" in result.reason else f"{path}.M/N", result.reason)
        return sec

    def build(self, header: HeaderSpec, path: str) -> ModemConfig:
        try:
            support = SupportSet(**{k: int(v) for k, v in self.support.items()})
            return ModemConfig(
                grid=DDGridParams(self.M, self.N, self.nu_p),
                pilot_mode=self.pilot_mode,
                pilot_location=tuple(self.pilot_location) if self.pilot_location else None,
                u=self.u,
                pilot_to_data_db=self.pilot_to_data_db,
                support=support,
                header=header,
                guard=self.guard,
                prune_db=self.prune_db,
                prune_sigma=self.prune_sigma,
            )
        except (ValueError, ZakOTFSError) as exc:
            _fail(path, str(exc))


@dataclass
class TapSpec:
    """A channel tap given in grid bins (``delay_bins``/``doppler_bins``) or
    physical units (``delay_s``/``doppler_hz``), not both."""

    gain: Any = 1.0
    delay_bins: float | None = None
    doppler_bins: float | None = None
    delay_s: float | None = None
    doppler_hz: float | None = None

    @classmethod
    def from_dict(cls, data: dict, path: str) -> "TapSpec":
        _expect_keys(data, {f.name for f in dataclasses.fields(cls)}, path)
        tap = cls(**data)
        _complex(tap.gain, f"{path}.gain")
        bins = tap.delay_bins is not None or tap.doppler_bins is not None
        phys = tap.delay_s is not None or tap.doppler_hz is not None
        if bins and phys:
            _fail(path, "give the tap in bins or in physical units, not both")
        for name in ("delay_bins", "doppler_bins", "delay_s", "doppler_hz"):
            v = getattr(tap, name)
            if v is not None:
                _float(v, f"{path}.{name}")
        if (tap.delay_bins or 0) < 0 or (tap.delay_s or 0) < 0:
            _fail(path, "delay must be >= 0")
        return tap

    def to_tap(self, grid: DDGridParams) -> ChannelTap:
        gain = _complex(self.gain, "gain")
        if self.delay_s is not None or self.doppler_hz is not None:
            return ChannelTap(gain, float(self.delay_s or 0.0), float(self.doppler_hz or 0.0))
        return ChannelTap.from_bins(grid, float(self.delay_bins or 0.0), float(self.doppler_bins or 0.0), gain)


@dataclass
class ChannelSection:
    taps: list = field(default_factory=lambda: [{"gain": 1.0, "delay_bins": 0, "doppler_bins": 0}])
    snr_db: list = field(default_factory=lambda: [0.0, 5.0, 10.0, 15.0, 20.0])
    timing_offset: int = 0
    cfo_hz: float = 0.0
    phase: float = 0.0

    @classmethod
    def from_dict(cls, data: dict, path: str) -> "ChannelSection":
        _expect_keys(data, {f.name for f in dataclasses.fields(cls)}, path)
        sec = cls(**data)
        if not isinstance(sec.taps, list):
            _fail(f"{path}.taps", "expected a list of taps")
        sec.taps = [TapSpec.from_dict(t, f"{path}.taps[{i}]") for i, t in enumerate(sec.taps)]
        if not isinstance(sec.snr_db, list):
            _fail(f"{path}.snr_db", "expected a list of SNR values in dB")
        if not sec.snr_db:
            _fail(f"{path}.snr_db", "SNR list is empty")
        sec.snr_db = [_float(v, f"{path}.snr_db[{i}]", allow_inf=True) for i, v in enumerate(sec.snr_db)]
        sec.timing_offset = _int(sec.timing_offset, f"{path}.timing_offset", minimum=0)
        sec.cfo_hz = _float(sec.cfo_hz, f"{path}.cfo_hz")
        sec.phase = _float(sec.phase, f"{path}.phase")
        return sec

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["taps"] = [{k: v for k, v in dataclasses.asdict(t).items() if v is not None} for t in self.taps]
        out["snr_db"] = [_json_float(v) for v in self.snr_db]
        return out


def _json_float(v):
    return "inf" if isinstance(v, float) and math.isinf(v) else v


@dataclass
class SyncSection:
    """Header detection and CFO correction at the receiver.  When disabled
    the receiver is told the true packet position (genie timing)."""

    enabled: bool = False
    threshold: float = 0.6

    @classmethod
    def from_dict(cls, data: dict, path: str) -> "SyncSection":
        _expect_keys(data, {f.name for f in dataclasses.fields(cls)}, path)
        sec = cls(**data)
        if not isinstance(sec.enabled, bool):
            _fail(f"{path}.enabled", "expected true or false")
        sec.threshold = _float(sec.threshold, f"{path}.threshold")
        if not 0 < sec.threshold <= 1:
            _fail(f"{path}.threshold", f"must lie in (0, 1], got {sec.threshold}")
        return sec


@dataclass
class PaprSection:
    oversample: int = 4
    sinc_half_width: int = 64
    include_header: bool = False
    point: dict = field(default_factory=lambda: {"M": 32, "N": 48, "pilot_mode": "point"})
    spread: dict = field(default_factory=lambda: {"M": 31, "N": 37, "pilot_mode": "spread", "u": 5})

    @classmethod
    def from_dict(cls, data: dict, path: str) -> "PaprSection":
        _expect_keys(data, {f.name for f in dataclasses.fields(cls)}, path)
        sec = cls(**data)
        sec.oversample = _int(sec.oversample, f"{path}.oversample", minimum=1)
        sec.sinc_half_width = _int(sec.sinc_half_width, f"{path}.sinc_half_width", minimum=8)
        if not isinstance(sec.include_header, bool):
            _fail(f"{path}.include_header", "expected true or false")
        for name, mode in (("point", "point"), ("spread", "spread")):
            d = getattr(sec, name)
            modem = ModemSection.from_dict(d, f"{path}.{name}")
            if modem.pilot_mode != mode:
                _fail(f"{path}.{name}.pilot_mode", f"must be {mode!r}")
        return sec


@dataclass
class CaptureSection:
    """Recorded-IQ processing.  The capture is resampled by ``up/down``
    before detection; the result must be at the grid bandwidth ``B``."""

    path: str | None = None
    resample_up: int = 1
    resample_down: int = 1
    noise_var: float | None = None
    reference_seed: int | None = None
    reference_bits: str | None = None

    @classmethod
    def from_dict(cls, data: dict, path: str) -> "CaptureSection":
        _expect_keys(data, {f.name for f in dataclasses.fields(cls)}, path)
        sec = cls(**data)
        sec.resample_up = _int(sec.resample_up, f"{path}.resample_up", minimum=1)
        sec.resample_down = _int(sec.resample_down, f"{path}.resample_down", minimum=1)
        if sec.noise_var is not None:
            sec.noise_var = _float(sec.noise_var, f"{path}.noise_var")
            if sec.noise_var < 0:
                _fail(f"{path}.noise_var", "must be >= 0")
        if sec.reference_seed is not None:
            sec.reference_seed = _int(sec.reference_seed, f"{path}.reference_seed", minimum=0)
        if sec.reference_seed is not None and sec.reference_bits is not None:
            _fail(path, "give reference_seed or reference_bits, not both")
        for name in ("path", "reference_bits"):
            v = getattr(sec, name)
            if v is not None and not isinstance(v, str):
                _fail(f"{path}.{name}", "expected a file path string")
        return sec


@dataclass
class ExperimentConfig:
    mode: str = "ber-sweep"
    seed: int = 1
    trials: int = 20
    workers: int = 1
    out_dir: str = "results"
    modem: ModemSection = field(default_factory=ModemSection)
    header: dict = field(default_factory=lambda: {"roots": [1, 1, 1], "lengths": [139, 167, 199], "gaps": [0, 0, 0]})
    channel: ChannelSection = field(default_factory=ChannelSection)
    sync: SyncSection = field(default_factory=SyncSection)
    papr: PaprSection = field(default_factory=PaprSection)
    capture: CaptureSection = field(default_factory=CaptureSection)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        _expect_keys(data, {f.name for f in dataclasses.fields(cls)}, "")
        data = copy.deepcopy(data)
        cfg = cls()
        if "mode" in data:
            cfg.mode = data["mode"]
        if cfg.mode not in MODES:
            _fail("mode", f"must be one of {', '.join(MODES)}, got {cfg.mode!r}")
        cfg.seed = _int(data.get("seed", cfg.seed), "seed", minimum=0)
        if cfg.seed >= 2**64:
            _fail("seed", "must fit in 64 bits")
        cfg.trials = _int(data.get("trials", cfg.trials), "trials", minimum=1)
        cfg.workers = _int(data.get("workers", cfg.workers), "workers", minimum=1)
        cfg.out_dir = data.get("out_dir", cfg.out_dir)
        if not isinstance(cfg.out_dir, str):
            _fail("out_dir", "expected a path string")
        cfg.modem = ModemSection.from_dict(data.get("modem", {}), "modem")
        header = data.get("header", cfg.header)
        _expect_keys(header, ("roots", "lengths", "gaps"), "header")
        cfg.header = {**cls().header, **header}
        cfg.channel = ChannelSection.from_dict(data.get("channel", {}), "channel")
        cfg.sync = SyncSection.from_dict(data.get("sync", {}), "sync")
        cfg.papr = PaprSection.from_dict(data.get("papr", {}), "papr")
        cfg.capture = CaptureSection.from_dict(data.get("capture", {}), "capture")
        # build once so every referenced parameter is checked before a run
        cfg.modem_config()
        cfg.taps()
        if cfg.mode == "papr":
            cfg.papr_modems()
        if cfg.mode == "isac-sense" and cfg.modem.pilot_mode != "spread":
            _fail("modem.pilot_mode", "isac-sense needs the spread pilot")
        return cfg

    def header_spec(self) -> HeaderSpec:
        try:
            return HeaderSpec(tuple(self.header["roots"]), tuple(self.header["lengths"]), tuple(self.header["gaps"]))
        except (TypeError, ValueError, ZakOTFSError) as exc:
            _fail("header", str(exc))

    def modem_config(self) -> ModemConfig:
        return self.modem.build(self.header_spec(), "modem")

    def taps(self) -> list[ChannelTap]:
        grid = self.modem_config().grid
        return [t.to_tap(grid) for t in self.channel.taps]

    def papr_modems(self) -> tuple[ModemConfig, ModemConfig]:
        header = self.header_spec()
        point = ModemSection.from_dict(self.papr.point, "papr.point").build(header, "papr.point")
        spread = ModemSection.from_dict(self.papr.spread, "papr.spread").build(header, "papr.spread")
        return point, spread

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["channel"] = self.channel.to_dict()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def default_config(mode: str = "ber-sweep") -> ExperimentConfig:
    """Table-style defaults for ``mode``."""
    if mode not in MODES:
        _fail("mode", f"must be one of {', '.join(MODES)}, got {mode!r}")
    data: dict = {"mode": mode}
    if mode in ("isac-sense",):
        data["modem"] = {"M": 31, "N": 37, "pilot_mode": "spread", "u": 5}
        data["channel"] = {"snr_db": [20.0]}
    if mode in ("loopback", "demod-capture"):
        data["channel"] = {"snr_db": [25.0], "timing_offset": 100, "cfo_hz": 150.0}
        data["sync"] = {"enabled": True}
        data["trials"] = 1
    if mode == "demod-capture":
        data["capture"] = {"path": "capture.iq"}
    return ExperimentConfig.from_dict(data)


def parse_override(text: str) -> tuple[str, Any]:
    """``'a.b=value'`` -> ``('a.b', value)``; the value is parsed as JSON if possible."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form dotted.key=value", field="--set")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError("empty key in override", field="--set")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def apply_overrides(data: dict, overrides) -> dict:
    """Set dotted keys in a copy of the raw config dict.  List entries are
    addressed by integer segments (``channel.taps.0.gain``)."""
    data = copy.deepcopy(data)
    for key, value in overrides:
        parts = key.split(".")
        node = data
        for i, part in enumerate(parts[:-1]):
            if isinstance(node, list):
                node = node[_index(part, key, len(node))]
            else:
                node = node.setdefault(part, {})
            if not isinstance(node, (dict, list)):
                raise ConfigError("cannot descend into a scalar", field=".".join(parts[: i + 1]))
        last = parts[-1]
        if isinstance(node, list):
            node[_index(last, key, len(node))] = value
        else:
            node[last] = value
    return data


def _index(part: str, key: str, size: int) -> int:
    try:
        i = int(part)
    except ValueError:
        raise ConfigError(f"list index expected, got {part!r}", field=key) from None
    if not -size <= i < size:
        raise ConfigError(f"index {i} out of range", field=key)
    return i


def load_config(path=None, overrides=(), *, base: dict | None = None) -> ExperimentConfig:
    """Read a JSON config (or start from ``base``, else defaults), apply overrides, validate."""
    data: dict = copy.deepcopy(base) if base else {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found", field="--config") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}", field="--config") from None
    return ExperimentConfig.from_dict(apply_overrides(data, overrides))
