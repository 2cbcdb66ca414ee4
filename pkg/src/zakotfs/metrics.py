"""BER, PAPR and EVM measurements."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from ._validation import check_bits
from .core import DDSignal, TDSignal, sinc_interpolate
from .exceptions import FrameSizeError, InvalidParameterError

__all__ = [
    "BerReport",
    "PaprReport",
    "ber",
    "papr",
    "packet_papr",
    "evm",
    "qpsk_ber_theory",
    "EVM_FLOOR_DB",
]

EVM_FLOOR_DB = -100.0


@dataclass(frozen=True)
class BerReport:
    bit_errors: int
    bits_total: int

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_total if self.bits_total else 0.0

    def __add__(self, other: "BerReport") -> "BerReport":
        return BerReport(self.bit_errors + other.bit_errors, self.bits_total + other.bits_total)


@dataclass(frozen=True)
class PaprReport:
    papr_db: float
    oversample: int
    peak_power: float
    mean_power: float


def ber(tx_bits, rx_bits) -> BerReport:
    tx = check_bits(tx_bits, name="tx_bits")
    rx = check_bits(rx_bits, name="rx_bits")
    if tx.size != rx.size:
        raise FrameSizeError(f"bit sequences differ in length: {tx.size} vs {rx.size}")
    return BerReport(int(np.count_nonzero(tx != rx)), int(tx.size))


def papr(td: TDSignal | np.ndarray, oversample: int = 1) -> PaprReport:
    """``10*log10(max|s|^2 / mean|s|^2)`` of the samples as given.

    ``oversample`` is recorded only; pass an already interpolated waveform
    (see :func:`packet_papr`) to capture analog peaks.
    """
    s = td.samples if isinstance(td, TDSignal) else np.asarray(td, dtype=np.complex128).reshape(-1)
    p = np.abs(s) ** 2
    mean = float(np.mean(p)) if p.size else 0.0
    if mean == 0.0:
        raise InvalidParameterError("PAPR of an all-zero signal is undefined")
    peak = float(np.max(p))
    return PaprReport(float(10 * np.log10(peak / mean)), oversample, peak, mean)


def packet_papr(samples: np.ndarray, oversample: int = 4, sinc_half_width: int = 64) -> PaprReport:
    """PAPR of critically sampled ``samples`` after sinc interpolation."""
    return papr(sinc_interpolate(samples, oversample, sinc_half_width), oversample)


def evm(equalized: DDSignal | np.ndarray, reference) -> float:
    """``10*log10(mean|x_hat - x|^2 / mean|x|^2)`` in dB, floored at -100 dB."""
    x_hat = equalized.cell if isinstance(equalized, DDSignal) else np.asarray(equalized, dtype=np.complex128)
    ref = reference.cell if isinstance(reference, DDSignal) else np.asarray(reference, dtype=np.complex128)
    if x_hat.size != ref.size:
        raise FrameSizeError(f"size mismatch: {x_hat.size} vs {ref.size}")
    x_hat = x_hat.reshape(-1)
    ref = ref.reshape(-1)
    err = float(np.mean(np.abs(x_hat - ref) ** 2))
    sig = float(np.mean(np.abs(ref) ** 2))
    if sig == 0:
        raise InvalidParameterError("reference has zero power")
    if err == 0:
        return EVM_FLOOR_DB
    return max(EVM_FLOOR_DB, float(10 * np.log10(err / sig)))


def qpsk_ber_theory(snr_db) -> np.ndarray:
    """Uncoded Gray QPSK over AWGN: ``Q(sqrt(Es/N0))`` with ``snr_db`` = Es/N0."""
    snr = 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0)
    return 0.5 * erfc(np.sqrt(snr / 2.0))
