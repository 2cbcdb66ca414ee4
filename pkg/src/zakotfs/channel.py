"""Simulated delay-Doppler channel: sparse physical taps, AWGN, impairments."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import InvalidParameterError
from .core import (
    DDChannelEstimate,
    DDGridParams,
    SupportSet,
    TDSignal,
    cross_ambiguity,
    dzt,
    idzt,
)

__all__ = [
    "ChannelTap",
    "DDChannelEstimate",
    "AliasingWarning",
    "make_rng",
    "trial_seed",
    "apply_dd_channel",
    "add_awgn",
    "effective_channel_oracle",
    "apply_impairments",
]


class AliasingWarning(UserWarning):
    """A tap lies outside the unambiguous Doppler range."""


@dataclass(frozen=True)
class ChannelTap:
    """One propagation path ``gain * s(t - delay) * exp(j*2*pi*doppler*(t - delay))``."""

    gain: complex
    delay: float
    doppler: float

    @classmethod
    def from_bins(cls, grid: DDGridParams, k: float, l: float, gain: complex = 1.0) -> "ChannelTap":
        """Tap at delay ``k/B`` and Doppler ``l/T``."""
        return cls(complex(gain), k / grid.B, l / grid.T)


def make_rng(seed) -> np.random.Generator:
    """Counter-based (Philox) generator; passes an existing Generator through."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(int(seed)))


def trial_seed(base: int, trial: int, stream: int = 0) -> int:
    """Per-trial seed ``base XOR (stream << 32 | trial)``."""
    return int(base) ^ ((int(stream) << 32) | int(trial))


def _fractional_delay(samples: np.ndarray, delay: float, half_width: int) -> np.ndarray:
    # windowed-sinc evaluation of s(t - delay) on the sample grid, output
    # length len + ceil(delay)
    d_int = math.floor(delay)
    frac = delay - d_int
    n_out = samples.size + math.ceil(delay)
    if frac == 0.0:
        out = np.zeros(n_out, dtype=np.complex128)
        out[d_int : d_int + samples.size] = samples
        return out
    taps = np.arange(-half_width, half_width + 1)
    kernel = np.sinc(taps - frac) * np.hanning(2 * half_width + 3)[1:-1]
    full = np.convolve(samples, kernel)  # full[i] ~ s(i - half_width - frac)
    out = np.zeros(n_out, dtype=np.complex128)
    src_start = half_width - d_int
    lo = max(0, -src_start)
    hi = min(n_out, full.size - src_start)
    out[lo:hi] = full[src_start + lo : src_start + hi]
    return out


def apply_dd_channel(td: TDSignal, taps: Sequence[ChannelTap], *, sinc_half_width: int = 64) -> TDSignal:
    """Superpose delayed, Doppler-shifted copies of ``td``.

    Integer-sample delays are exact shifts; fractional delays use a
    windowed-sinc interpolator (the waveform is band-limited to the sample
    rate).  Time ``t = 0`` is the sample at ``td.origin_index``, so tap
    gains are referenced to the frame start.  The output is longer than the
    input by the largest delay.
    """
    fs = td.sample_rate
    delays = [tap.delay * fs for tap in taps]
    if any(d < 0 for d in delays):
        raise InvalidParameterError("tap delays must be >= 0")
    n_out = td.samples.size + (math.ceil(max(delays)) if delays else 0)
    out = np.zeros(n_out, dtype=np.complex128)
    t = (np.arange(n_out) - td.origin_index) / fs
    for tap, d in zip(taps, delays):
        if abs(tap.doppler) >= fs / 2:
            warnings.warn(f"Doppler {tap.doppler} Hz aliases at sample rate {fs} Hz", AliasingWarning, stacklevel=2)
        shifted = _fractional_delay(td.samples, d, sinc_half_width)
        out[: shifted.size] += tap.gain * shifted * np.exp(2j * np.pi * tap.doppler * (t[: shifted.size] - tap.delay))
    return td.with_samples(out)


def add_awgn(td: TDSignal, snr_db: float, seed=0, *, power_slice: slice | None = None) -> tuple[TDSignal, float]:
    """Add circular complex Gaussian noise at ``snr_db`` relative to the measured power.

    Signal power is measured over ``power_slice`` of the samples (all of
    them by default).  Returns the noisy signal and the per-sample noise
    variance used.  ``snr_db = inf`` returns the input unchanged with
    variance 0.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return td, 0.0
    region = td.samples if power_slice is None else td.samples[power_slice]
    power = float(np.mean(np.abs(region) ** 2)) if region.size else 0.0
    if power <= 0:
        raise InvalidParameterError("cannot set SNR on a zero-power signal")
    noise_var = power / 10.0 ** (snr_db / 10.0)
    rng = make_rng(seed)
    n = td.samples.size
    noise = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * math.sqrt(noise_var / 2.0)
    return td.with_samples(td.samples + noise), noise_var


def effective_channel_oracle(
    taps: Sequence[ChannelTap], grid: DDGridParams, support: SupportSet | None = None
) -> DDChannelEstimate:
    """Ground-truth effective DD filter on ``support``.

    A unit point pilot at the grid centre is sent through three periodic
    repetitions of its frame, the middle frame is received, and the
    response is read off by cross-ambiguity.  The repetition reproduces the
    quasi-periodic model the receiver assumes, so fractional taps give
    their full periodic sinc leakage.
    """
    from .pilot import PointPilotSpec, default_point_location, point_pilot

    support = SupportSet() if support is None else support
    if not taps:
        return DDChannelEstimate.zeros(grid, support)
    pilot = point_pilot(grid, PointPilotSpec(*default_point_location(grid)))
    frame = idzt(pilot)
    periodic = frame.with_samples(np.tile(frame.samples, 3), origin_index=grid.MN)
    rx = apply_dd_channel(periodic, taps)
    middle = rx.samples[grid.MN : 2 * grid.MN]
    return cross_ambiguity(dzt(middle, grid), pilot, support)


def apply_impairments(
    td: TDSignal,
    timing_offset: int = 0,
    cfo_hz: float = 0.0,
    phase: float = 0.0,
    *,
    pad_noise_std: float = 0.0,
    seed=0,
) -> TDSignal:
    """Prepend ``timing_offset`` samples and apply a CFO ramp and constant phase.

    The prepended samples are zeros, or complex noise of standard deviation
    ``pad_noise_std``.
    """
    if timing_offset < 0:
        raise InvalidParameterError("timing_offset must be >= 0")
    pad = np.zeros(int(timing_offset), dtype=np.complex128)
    if pad_noise_std > 0 and timing_offset:
        rng = make_rng(seed)
        pad = (rng.standard_normal(pad.size) + 1j * rng.standard_normal(pad.size)) * (pad_noise_std / math.sqrt(2))
    samples = np.concatenate([pad, td.samples])
    n = np.arange(samples.size)
    samples = samples * np.exp(1j * (2 * np.pi * cfo_hz * n / td.sample_rate + phase))
    return td.with_samples(samples, td.origin_index + int(timing_offset))
