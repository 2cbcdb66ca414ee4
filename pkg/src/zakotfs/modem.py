"""Zak-OTFS packet transmitter and receiver for point-pilot and spread-pilot modes.

Amplitude conventions: every DD frame is built with total cell energy 1
and mapped to time by ``sqrt(N*MN) * idzt(cell)``, so each payload frame
has unit mean sample power, matching the unit-power header.  In the
point-pilot packet the pilot frame holds a unit-energy impulse and the
data frame holds ``MN`` QPSK symbols of energy ``1/MN``.  In the spread
(ISAC) frame the pilot and data share the frame with energies ``E_p`` and
``E_d`` (``E_p + E_d = 1``) set by ``pilot_to_data_db``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, NamedTuple

import numpy as np

from ._validation import check_bits, check_complex_array
from .core import (
    DDChannelEstimate,
    DDGridParams,
    DDSignal,
    SupportSet,
    TDSignal,
    cross_ambiguity,
    dzt,
    idzt,
    twisted_conv_periodic,
)
from .estimation import build_channel_matrix, mmse_equalize
from .exceptions import FrameSizeError, InvalidParameterError
from .framing import HeaderSpec, SyncResult, build_header, correct_cfo, detect_frame, estimate_cfo
from .pilot import (
    PointPilotSpec,
    SpreadPilotSpec,
    default_point_location,
    default_spread_location,
    point_pilot,
    spread_pilot,
    validate_spread_params,
)

__all__ = [
    "ModemConfig",
    "PacketLayout",
    "RxResult",
    "map_qpsk",
    "demap_qpsk",
    "bits_per_packet",
    "build_data_frame",
    "tx_point_pilot_packet",
    "tx_spread_pilot_packet",
    "tx_packet",
    "rx_demodulate",
    "receive_packet",
    "packet_layout",
    "cancel_pilot",
    "estimate_noise_floor",
    "prune_estimate",
]

PilotMode = Literal["point", "spread"]

_SQRT_HALF = 1.0 / math.sqrt(2.0)


def map_qpsk(bits) -> np.ndarray:
    """Gray-mapped unit-energy QPSK.

    Bit pairs ``00, 01, 11, 10`` map to ``(1+j), (-1+j), (-1-j), (1-j)``
    over ``sqrt(2)``.
    """
    b = check_bits(bits)
    if b.size % 2:
        raise InvalidParameterError(f"QPSK needs an even bit count, got {b.size}")
    b = b.reshape(-1, 2).astype(np.float64)
    return ((1 - 2 * b[:, 1]) + 1j * (1 - 2 * b[:, 0])) * _SQRT_HALF


def demap_qpsk(symbols) -> np.ndarray:
    """Hard-decision inverse of :func:`map_qpsk`.

    A zero real or imaginary part decides bit 0, so the origin maps to ``00``.
    """
    s = np.asarray(symbols, dtype=np.complex128).reshape(-1)
    out = np.empty((s.size, 2), dtype=np.uint8)
    out[:, 0] = s.imag < 0
    out[:, 1] = s.real < 0
    return out.reshape(-1)


@dataclass(frozen=True)
class ModemConfig:
    """Transmit/receive parameters shared by both ends of the link.

    ``pilot_location`` defaults to the grid centre convention of each mode.
    Before pilot cancellation and equalization, estimated taps are dropped
    if they are below ``prune_sigma`` standard deviations of the estimator
    noise floor (AWGN plus, in spread mode, data leakage) or more than
    ``prune_db`` below the strongest tap.  ``prune_sigma=0`` and
    ``prune_db=None`` keep every tap.
    """

    grid: DDGridParams
    pilot_mode: PilotMode = "point"
    pilot_location: tuple[int, int] | None = None
    u: int = 5
    pilot_to_data_db: float = 0.0
    support: SupportSet = field(default_factory=SupportSet)
    header: HeaderSpec = field(default_factory=HeaderSpec)
    guard: int = 16
    prune_db: float | None = None
    prune_sigma: float = 4.0
    constellation: Literal["qpsk"] = "qpsk"

    def __post_init__(self):
        if self.pilot_mode not in ("point", "spread"):
            raise InvalidParameterError(f"pilot_mode must be 'point' or 'spread', got {self.pilot_mode!r}")
        if self.constellation != "qpsk":
            raise InvalidParameterError("only QPSK is supported")
        if math.isnan(self.pilot_to_data_db) or self.pilot_to_data_db == -math.inf:
            raise InvalidParameterError("pilot_to_data_db must be a number or +inf (pilot only)")
        if self.guard < 0:
            raise InvalidParameterError("guard must be >= 0")
        self.support.check_fits(self.grid)
        if self.pilot_mode == "spread":
            result = validate_spread_params(self.grid.M, self.grid.N, self.u)
            if not result:
                raise InvalidParameterError(result.reason)
        k_p, l_p = self.location
        if not (0 <= k_p < self.grid.M and 0 <= l_p < self.grid.N):
            raise InvalidParameterError(f"pilot location ({k_p}, {l_p}) outside the grid")

    @property
    def location(self) -> tuple[int, int]:
        if self.pilot_location is not None:
            return tuple(self.pilot_location)
        if self.pilot_mode == "point":
            return default_point_location(self.grid)
        return default_spread_location(self.grid)

    @property
    def energies(self) -> tuple[float, float]:
        """``(E_p, E_d)``: pilot and data energy of the frame that carries each."""
        if self.pilot_mode == "point":
            return 1.0, 1.0
        if self.pilot_to_data_db == math.inf:
            return 1.0, 0.0
        ratio = 10.0 ** (self.pilot_to_data_db / 10.0)
        return ratio / (1.0 + ratio), 1.0 / (1.0 + ratio)

    @property
    def amplitude(self) -> float:
        """Time-domain scale taking a unit-energy cell to unit mean power."""
        return math.sqrt(self.grid.N * self.grid.MN)

    def pilot(self) -> DDSignal:
        """Pilot cell at its transmitted energy."""
        k_p, l_p = self.location
        e_p, _ = self.energies
        if self.pilot_mode == "point":
            return point_pilot(self.grid, PointPilotSpec(k_p, l_p, e_p))
        return spread_pilot(self.grid, SpreadPilotSpec(k_p, l_p, self.u, e_p))


@dataclass(frozen=True)
class PacketLayout:
    """Sample layout of one packet: header, guard, then ``frames`` of ``MN`` samples."""

    header_length: int
    guard: int
    frame_length: int
    frames: tuple[str, ...]

    @property
    def payload_start(self) -> int:
        return self.header_length + self.guard

    @property
    def total_length(self) -> int:
        return self.payload_start + self.frame_length * len(self.frames)

    def frame_slice(self, index: int, origin: int | None = None) -> slice:
        """Samples of frame ``index`` given the first-frame start ``origin``."""
        origin = self.payload_start if origin is None else origin
        start = origin + index * self.frame_length
        return slice(start, start + self.frame_length)

    @property
    def payload_slice(self) -> slice:
        return slice(self.payload_start, self.total_length)


class RxResult(NamedTuple):
    bits: np.ndarray
    estimate: DDChannelEstimate
    equalized: DDSignal


def bits_per_packet(cfg: ModemConfig) -> int:
    return 2 * cfg.grid.MN


def build_data_frame(cfg: ModemConfig, bits) -> DDSignal:
    """Data cell of total energy ``E_d``; symbols fill the cell in ``k + M*l`` order."""
    grid = cfg.grid
    bits = check_bits(bits, length=bits_per_packet(cfg))
    _, e_d = cfg.energies
    symbols = map_qpsk(bits) * math.sqrt(e_d / grid.MN)
    return DDSignal(grid, symbols.reshape(grid.shape, order="F"))


def _frame_to_td(cfg: ModemConfig, cell: DDSignal) -> np.ndarray:
    return idzt(cell).samples * cfg.amplitude


def packet_layout(cfg: ModemConfig) -> PacketLayout:
    kinds = ("pilot", "data") if cfg.pilot_mode == "point" else ("isac",)
    return PacketLayout(cfg.header.length, cfg.guard, cfg.grid.MN, kinds)


def _assemble(cfg: ModemConfig, frames: list[np.ndarray], kinds: tuple[str, ...]) -> tuple[TDSignal, PacketLayout]:
    header = build_header(cfg.header, cfg.grid.B)
    samples = np.concatenate([header.samples, np.zeros(cfg.guard, dtype=np.complex128), *frames])
    layout = PacketLayout(header.samples.size, cfg.guard, cfg.grid.MN, kinds)
    return TDSignal(samples, cfg.grid.B, origin_index=layout.payload_start), layout


def tx_point_pilot_packet(cfg: ModemConfig, bits) -> tuple[TDSignal, PacketLayout]:
    """Header, guard, pilot-only frame, then data frame."""
    if cfg.pilot_mode != "point":
        raise InvalidParameterError("config is not in point-pilot mode")
    data = build_data_frame(cfg, bits)
    frames = [_frame_to_td(cfg, cfg.pilot()), _frame_to_td(cfg, data)]
    return _assemble(cfg, frames, ("pilot", "data"))


def tx_spread_pilot_packet(cfg: ModemConfig, bits) -> tuple[TDSignal, PacketLayout]:
    """Header, guard, then one frame carrying data plus the spread pilot."""
    if cfg.pilot_mode != "spread":
        raise InvalidParameterError("config is not in spread-pilot mode")
    data = build_data_frame(cfg, bits)
    frame = data + cfg.pilot()
    return _assemble(cfg, [_frame_to_td(cfg, frame)], ("isac",))


def tx_packet(cfg: ModemConfig, bits) -> tuple[TDSignal, PacketLayout]:
    if cfg.pilot_mode == "point":
        return tx_point_pilot_packet(cfg, bits)
    return tx_spread_pilot_packet(cfg, bits)


def cancel_pilot(y: DDSignal, h_est: DDChannelEstimate, pilot: DDSignal) -> DDSignal:
    """Subtract the predicted pilot response ``h_est (*)_sigma pilot`` from ``y``."""
    if y.grid != h_est.grid or y.grid != pilot.grid:
        raise InvalidParameterError("grid mismatch")
    return y - twisted_conv_periodic(h_est, pilot)


def _receive_frame(cfg: ModemConfig, samples: np.ndarray, layout: PacketLayout, index: int, origin: int) -> DDSignal:
    seg = samples[layout.frame_slice(index, origin)]
    if seg.size != cfg.grid.MN:
        raise FrameSizeError(f"received buffer ends inside frame {index}")
    return dzt(seg, cfg.grid).scaled(1.0 / cfg.amplitude)


def estimate_noise_floor(cfg: ModemConfig, noise_var: float) -> float:
    """Standard deviation of one cross-ambiguity estimate entry.

    AWGN contributes ``noise_var / MN`` per DD entry and, in spread mode,
    the superposed data leaks ``E_d / MN``; both are divided by ``E_p``.
    """
    e_p, e_d = cfg.energies
    leak = e_d if cfg.pilot_mode == "spread" else 0.0
    return math.sqrt((noise_var + leak) / (cfg.grid.MN * e_p))


def prune_estimate(cfg: ModemConfig, est: DDChannelEstimate, noise_var: float) -> DDChannelEstimate:
    """Zero the taps that fall under the configured pruning threshold."""
    threshold = cfg.prune_sigma * estimate_noise_floor(cfg, noise_var)
    if cfg.prune_db is not None:
        threshold = max(threshold, float(np.max(np.abs(est.values))) * 10.0 ** (-cfg.prune_db / 20.0))
    if threshold <= 0:
        return est
    return DDChannelEstimate(est.grid, est.support, np.where(np.abs(est.values) > threshold, est.values, 0.0))


def rx_demodulate(td: TDSignal, layout: PacketLayout, cfg: ModemConfig, noise_var: float = 0.0) -> RxResult:
    """Estimate the channel, equalize and decide the data bits of one packet.

    ``td.origin_index`` must point at the first sample of the first payload
    frame (``sync.frame_start + layout.payload_start`` after detection) and
    the samples must already be CFO-corrected.  ``noise_var`` is the per-sample
    time-domain noise variance (the value returned by ``add_awgn``).
    """
    samples = check_complex_array(td.samples, ndim=1, name="samples")
    origin = td.origin_index
    if origin < 0 or samples.size < origin + layout.total_length - layout.payload_start:
        raise FrameSizeError(
            f"buffer of {samples.size} samples cannot hold a {layout.total_length}-sample packet at {origin}"
        )
    e_p, e_d = cfg.energies
    if e_d == 0:
        raise InvalidParameterError("pilot-only frame carries no data to demodulate")
    pilot = cfg.pilot()
    if cfg.pilot_mode == "point":
        y_pilot = _receive_frame(cfg, samples, layout, layout.frames.index("pilot"), origin)
        y_data = _receive_frame(cfg, samples, layout, layout.frames.index("data"), origin)
        raw = cross_ambiguity(y_pilot, pilot, cfg.support)
        estimate = DDChannelEstimate(cfg.grid, cfg.support, raw.values / e_p)
        kept = prune_estimate(cfg, estimate, noise_var)
    else:
        y = _receive_frame(cfg, samples, layout, layout.frames.index("isac"), origin)
        raw = cross_ambiguity(y, pilot, cfg.support)
        estimate = DDChannelEstimate(cfg.grid, cfg.support, raw.values / e_p)
        kept = prune_estimate(cfg, estimate, noise_var)
        y_data = cancel_pilot(y, kept, pilot)
    H = build_channel_matrix(kept)
    # rescale so data symbols have unit energy; per-entry noise becomes noise_var / E_d
    unit = y_data.scaled(math.sqrt(cfg.grid.MN / e_d))
    x_hat = mmse_equalize(unit, H, noise_var / e_d)
    bits = demap_qpsk(x_hat.cell.reshape(-1, order="F"))
    return RxResult(bits, estimate, x_hat)


def receive_packet(
    td: TDSignal,
    layout: PacketLayout,
    cfg: ModemConfig,
    noise_var: float = 0.0,
    *,
    sync: bool = False,
    threshold: float = 0.6,
) -> tuple[RxResult, SyncResult | None]:
    """Optionally detect the header and remove CFO, then :func:`rx_demodulate`.

    Without ``sync`` the caller's ``td.origin_index`` is trusted.
    """
    found = None
    if sync:
        found = detect_frame(td, cfg.header, threshold)
        cfo = estimate_cfo(td, found, cfg.header)
        found = SyncResult(found.frame_start, cfo, found.detection_metric)
        td = correct_cfo(td, cfo)
        td = td.with_samples(td.samples, found.frame_start + layout.payload_start)
    return rx_demodulate(td, layout, cfg, noise_var), found
