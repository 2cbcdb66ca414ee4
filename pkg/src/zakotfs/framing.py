"""Three-segment Zadoff-Chu packet header, frame detection and CFO recovery."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .core import TDSignal
from .exceptions import InvalidParameterError, SyncNotFoundError

__all__ = [
    "HeaderSpec",
    "SyncResult",
    "zc_sequence",
    "build_header",
    "detect_frame",
    "estimate_cfo",
    "correct_cfo",
]


def zc_sequence(root: int, length: int) -> np.ndarray:
    """Odd-length Zadoff-Chu sequence ``exp(-j*pi*root*n*(n+1)/length)``."""
    if length < 1 or length % 2 == 0:
        raise InvalidParameterError(f"ZC length must be odd, got {length}")
    if math.gcd(root, length) != 1:
        raise InvalidParameterError(f"ZC root {root} is not coprime to length {length}")
    n = np.arange(length, dtype=np.int64)
    # n(n+1) is even, so reduce mod 2*length before scaling
    arg = np.mod(root * n * (n + 1), 2 * length)
    return np.exp(-1j * np.pi * arg / length)


@dataclass(frozen=True)
class HeaderSpec:
    """Header layout: ZC segments with a gap of zeros after each one."""

    roots: tuple[int, ...] = (1, 1, 1)
    lengths: tuple[int, ...] = (139, 167, 199)
    gaps: tuple[int, ...] = (0, 0, 0)

    def __post_init__(self):
        object.__setattr__(self, "roots", tuple(int(r) for r in self.roots))
        object.__setattr__(self, "lengths", tuple(int(n) for n in self.lengths))
        object.__setattr__(self, "gaps", tuple(int(g) for g in self.gaps))
        if not self.lengths:
            raise InvalidParameterError("header needs at least one segment")
        if not (len(self.roots) == len(self.lengths) == len(self.gaps)):
            raise InvalidParameterError("roots, lengths and gaps must have one entry per segment")
        if len(set(self.lengths)) != len(self.lengths):
            raise InvalidParameterError(f"segment lengths must be distinct, got {self.lengths}")
        if any(g < 0 for g in self.gaps):
            raise InvalidParameterError("gaps must be >= 0")
        for r, n in zip(self.roots, self.lengths):
            if n % 2 == 0 or math.gcd(r, n) != 1:
                raise InvalidParameterError(f"segment (root={r}, length={n}) needs odd length and coprime root")

    @property
    def starts(self) -> tuple[int, ...]:
        out, pos = [], 0
        for n, g in zip(self.lengths, self.gaps):
            out.append(pos)
            pos += n + g
        return tuple(out)

    @property
    def length(self) -> int:
        return sum(self.lengths) + sum(self.gaps)

    def segments(self) -> list[np.ndarray]:
        return [zc_sequence(r, n) for r, n in zip(self.roots, self.lengths)]


@dataclass(frozen=True)
class SyncResult:
    frame_start: int
    cfo_hz: float = 0.0
    detection_metric: float = 0.0


def build_header(spec: HeaderSpec, sample_rate: float) -> TDSignal:
    """Concatenated ZC segments and gaps, scaled to unit average power."""
    parts = []
    for seg, gap in zip(spec.segments(), spec.gaps):
        parts.append(seg)
        parts.append(np.zeros(gap, dtype=np.complex128))
    samples = np.concatenate(parts)
    samples *= math.sqrt(samples.size / np.sum(np.abs(samples) ** 2))
    return TDSignal(samples, sample_rate)


def _normalized_correlation(rx: np.ndarray, ref: np.ndarray) -> np.ndarray:
    L = ref.size
    corr = sps.correlate(rx, ref, mode="valid", method="fft")
    energy = np.convolve(np.abs(rx) ** 2, np.ones(L), mode="valid")
    denom = np.sqrt(np.maximum(energy, 0.0) * np.sum(np.abs(ref) ** 2))
    out = np.zeros(corr.size)
    ok = denom > 1e-12 * max(denom.max(initial=0.0), 1e-300)
    out[ok] = np.abs(corr[ok]) / denom[ok]
    return np.minimum(out, 1.0)


def detect_frame(rx: TDSignal, spec: HeaderSpec, threshold: float = 0.6) -> SyncResult:
    """Locate the header by normalized cross-correlation with segment 1.

    ``frame_start`` is the sample index of the first header sample.  The
    metric is in ``[0, 1]``; ties go to the earliest index.  Raises
    :class:`SyncNotFoundError` if the peak is below ``threshold``.
    """
    if rx.samples.size < spec.length:
        raise SyncNotFoundError(f"buffer of {rx.samples.size} samples is shorter than the header ({spec.length})")
    ref = spec.segments()[0]
    metric = _normalized_correlation(rx.samples, ref)
    last_start = rx.samples.size - spec.length
    metric = metric[: last_start + 1]
    idx = int(np.argmax(metric))
    peak = float(metric[idx])
    if peak < threshold:
        raise SyncNotFoundError(f"correlation peak {peak:.3f} below threshold {threshold}")
    return SyncResult(frame_start=idx, detection_metric=peak)


def _segment_correlations(samples: np.ndarray, spec: HeaderSpec, start: int):
    out = []
    for s0, seg in zip(spec.starts, spec.segments()):
        chunk = samples[start + s0 : start + s0 + seg.size]
        out.append(chunk * np.conj(seg))
    return out


def _unwrap_to(fine: float, ambiguity: float, reference: float) -> float:
    return fine + ambiguity * round((reference - fine) / ambiguity)


def estimate_cfo(rx: TDSignal, sync: SyncResult, spec: HeaderSpec) -> float:
    """CFO in Hz from the known header at ``sync.frame_start``.

    Coarse stage: phase between the two halves of each de-rotated segment
    (unambiguous within ``+-fs / (2 * L_min/2)`` roughly).  Fine stages: the
    phase difference between whole-segment correlations at increasing
    centre spacings, each unwrapped to the previous estimate.
    """
    fs = rx.sample_rate
    if sync.frame_start < 0 or sync.frame_start + spec.length > rx.samples.size:
        raise InvalidParameterError("sync position leaves the header outside the buffer")
    prods = _segment_correlations(rx.samples, spec, sync.frame_start)
    estimates, weights = [], []
    for p in prods:
        h = p.size // 2
        c = np.sum(p[h : 2 * h]) * np.conj(np.sum(p[:h]))
        estimates.append(float(np.angle(c)) * fs / (2 * np.pi * h))
        weights.append(abs(c))
    if sum(weights) == 0:
        return 0.0
    cfo = float(np.average(estimates, weights=weights))
    if len(prods) < 2:
        return cfo
    centres = [s0 + (p.size - 1) / 2 for s0, p in zip(spec.starts, prods)]
    sums = [np.sum(p) for p in prods]
    for j in range(1, len(prods)):
        spacing = centres[j] - centres[0]
        fine = float(np.angle(sums[j] * np.conj(sums[0]))) * fs / (2 * np.pi * spacing)
        cfo = _unwrap_to(fine, fs / spacing, cfo)
    return cfo


def correct_cfo(rx: TDSignal, cfo_hz: float) -> TDSignal:
    """Multiply by ``exp(-j*2*pi*cfo*n/fs)``."""
    n = np.arange(rx.samples.size)
    return rx.with_samples(rx.samples * np.exp(-2j * np.pi * cfo_hz * n / rx.sample_rate))
