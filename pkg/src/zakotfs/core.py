"""Delay-Doppler grid geometry, the discrete Zak transform pair, twisted
convolution and cross-ambiguity.

Index conventions used throughout the package:

* A DD cell ``x[k, l]`` has shape ``(M, N)``: ``k`` is the delay bin, ``l``
  the Doppler bin.
* Time samples of one frame are ordered ``q = k + n*M`` with
  ``n in [0, N)``.  The DZT sums over that same ``n`` range, so
  ``dzt(idzt(x)) == x`` with no even/odd ``N`` special cases.
* An MN-periodic DD filter (chirp spreading filter, effective channel) is a
  :class:`DDFilter` of taps indexed modulo ``MN`` in both axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ._validation import (
    check_complex_array,
    check_positive_float,
    check_positive_int,
    check_same_grid,
)
from .exceptions import FrameSizeError, InvalidParameterError

__all__ = [
    "DDGridParams",
    "DDSignal",
    "TDSignal",
    "SupportSet",
    "DDFilter",
    "DDChannelEstimate",
    "make_grid",
    "quasi_extend",
    "dzt",
    "idzt",
    "sinc_interpolate",
    "oversampled_td",
    "twisted_conv_periodic",
    "compose_filters",
    "cross_ambiguity",
]


@dataclass(frozen=True)
class DDGridParams:
    """Geometry of one Zak-OTFS frame.

    ``M`` delay bins of width ``1/B`` span the delay period ``tau_p`` and
    ``N`` Doppler bins of width ``1/T`` span the Doppler period ``nu_p``.
    """

    M: int
    N: int
    nu_p: float

    def __post_init__(self):
        check_positive_int(self.M, "M")
        check_positive_int(self.N, "N")
        check_positive_float(self.nu_p, "nu_p")

    @property
    def tau_p(self) -> float:
        return 1.0 / self.nu_p

    @property
    def B(self) -> float:
        return self.M * self.nu_p

    @property
    def T(self) -> float:
        return self.N * self.tau_p

    @property
    def MN(self) -> int:
        return self.M * self.N

    @property
    def shape(self) -> tuple[int, int]:
        return (self.M, self.N)


def make_grid(M: int, N: int, nu_p: float) -> DDGridParams:
    """Build a grid; ``tau_p = 1/nu_p``, ``B = M*nu_p`` and ``T = N*tau_p``."""
    return DDGridParams(M, N, nu_p)


@dataclass(frozen=True, eq=False)
class DDSignal:
    """Fundamental cell of a quasi-periodic DD signal.

    Only the ``M x N`` cell is stored; values outside it are defined by
    :func:`quasi_extend`.
    """

    grid: DDGridParams
    cell: np.ndarray

    def __post_init__(self):
        cell = check_complex_array(self.cell, shape=self.grid.shape, name="cell")
        object.__setattr__(self, "cell", cell)

    @classmethod
    def zeros(cls, grid: DDGridParams) -> "DDSignal":
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128))

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.cell) ** 2))

    def __add__(self, other: "DDSignal") -> "DDSignal":
        check_same_grid(self, other)
        return DDSignal(self.grid, self.cell + other.cell)

    def __sub__(self, other: "DDSignal") -> "DDSignal":
        check_same_grid(self, other)
        return DDSignal(self.grid, self.cell - other.cell)

    def scaled(self, factor: complex) -> "DDSignal":
        return DDSignal(self.grid, self.cell * factor)


@dataclass(frozen=True, eq=False)
class TDSignal:
    """Complex baseband samples; ``origin_index`` marks the frame start."""

    samples: np.ndarray
    sample_rate: float
    origin_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.complex128).reshape(-1))
        check_positive_float(self.sample_rate, "sample_rate")

    def __len__(self) -> int:
        return self.samples.size

    def with_samples(self, samples: np.ndarray, origin_index: int | None = None) -> "TDSignal":
        origin = self.origin_index if origin_index is None else origin_index
        return TDSignal(samples, self.sample_rate, origin)


@dataclass(frozen=True)
class SupportSet:
    """Rectangle of DD lags ``[k_min, k_max] x [l_min, l_max]`` (inclusive)."""

    k_min: int = -6
    k_max: int = 6
    l_min: int = -2
    l_max: int = 2

    def __post_init__(self):
        if self.k_min > self.k_max or self.l_min > self.l_max:
            raise InvalidParameterError(f"empty support {self}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.k_max - self.k_min + 1, self.l_max - self.l_min + 1)

    @property
    def size(self) -> int:
        return self.shape[0] * self.shape[1]

    def contains(self, k: int, l: int) -> bool:
        return self.k_min <= k <= self.k_max and self.l_min <= l <= self.l_max

    def lags(self) -> tuple[np.ndarray, np.ndarray]:
        """Delay and Doppler lag grids of shape :attr:`shape`."""
        ks = np.arange(self.k_min, self.k_max + 1)
        ls = np.arange(self.l_min, self.l_max + 1)
        return np.meshgrid(ks, ls, indexing="ij")

    def __iter__(self) -> Iterator[tuple[int, int]]:
        for k in range(self.k_min, self.k_max + 1):
            for l in range(self.l_min, self.l_max + 1):
                yield k, l

    def check_fits(self, grid: DDGridParams) -> None:
        if self.shape[0] > grid.M or self.shape[1] > grid.N:
            raise InvalidParameterError(f"support {self.shape} exceeds one period {grid.shape}")


@dataclass(frozen=True, eq=False)
class DDFilter:
    """MN-periodic discrete DD filter stored as taps.

    ``delays`` and ``dopplers`` are reduced modulo ``MN`` on construction;
    duplicate taps are summed.
    """

    grid: DDGridParams
    delays: np.ndarray
    dopplers: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        MN = self.grid.MN
        k = np.mod(np.asarray(self.delays, dtype=np.int64).reshape(-1), MN)
        l = np.mod(np.asarray(self.dopplers, dtype=np.int64).reshape(-1), MN)
        v = np.asarray(self.values, dtype=np.complex128).reshape(-1)
        if not (k.size == l.size == v.size):
            raise InvalidParameterError("delays, dopplers and values must have equal length")
        keys, inverse = np.unique(k * MN + l, return_inverse=True)
        summed = np.zeros(keys.size, dtype=np.complex128)
        np.add.at(summed, inverse, v)
        object.__setattr__(self, "delays", keys // MN)
        object.__setattr__(self, "dopplers", keys % MN)
        object.__setattr__(self, "values", summed)

    @classmethod
    def delta(cls, grid: DDGridParams, k: int = 0, l: int = 0, gain: complex = 1.0) -> "DDFilter":
        return cls(grid, [k], [l], [gain])

    @classmethod
    def from_dense(cls, grid: DDGridParams, period: np.ndarray) -> "DDFilter":
        period = check_complex_array(period, shape=(grid.MN, grid.MN), name="period")
        k, l = np.nonzero(period)
        return cls(grid, k, l, period[k, l])

    @property
    def ntaps(self) -> int:
        return self.values.size

    def to_dense(self) -> np.ndarray:
        """One full ``MN x MN`` period."""
        out = np.zeros((self.grid.MN, self.grid.MN), dtype=np.complex128)
        out[self.delays, self.dopplers] = self.values
        return out


@dataclass(frozen=True, eq=False)
class DDChannelEstimate:
    """Effective channel filter values on a support set.

    ``values[i, j]`` is the tap at delay lag ``support.k_min + i`` and
    Doppler lag ``support.l_min + j``.
    """

    grid: DDGridParams
    support: SupportSet
    values: np.ndarray

    def __post_init__(self):
        vals = check_complex_array(self.values, shape=self.support.shape, name="values")
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, grid: DDGridParams, support: SupportSet) -> "DDChannelEstimate":
        return cls(grid, support, np.zeros(support.shape, dtype=np.complex128))

    def at(self, k: int, l: int) -> complex:
        if not self.support.contains(k, l):
            raise InvalidParameterError(f"lag ({k}, {l}) outside support")
        return complex(self.values[k - self.support.k_min, l - self.support.l_min])

    def peak(self) -> tuple[int, int, complex]:
        """Lag and value of the largest-magnitude entry."""
        i, j = np.unravel_index(np.argmax(np.abs(self.values)), self.values.shape)
        return int(i + self.support.k_min), int(j + self.support.l_min), complex(self.values[i, j])

    def magnitude_map(self) -> np.ndarray:
        return np.abs(self.values)

    def to_filter(self, prune_below: float = 0.0) -> DDFilter:
        """Taps as an MN-periodic filter, dropping entries with ``|h| <= prune_below``."""
        ks, ls = self.support.lags()
        keep = np.abs(self.values) > prune_below
        return DDFilter(self.grid, ks[keep], ls[keep], self.values[keep])


def quasi_extend(x: DDSignal, k, l):
    """Evaluate the quasi-periodic extension of ``x`` at integer ``(k, l)``.

    ``x_dd[k + n*M, l + m*N] = x[k, l] * exp(j*2*pi*n*l/N)``; accepts
    scalars or broadcastable integer arrays.
    """
    M, N = x.grid.M, x.grid.N
    k = np.asarray(k, dtype=np.int64)
    l = np.asarray(l, dtype=np.int64)
    n, k0 = np.divmod(k, M)
    l0 = np.mod(l, N)
    # (n*l0) mod N keeps the phase argument small for exact unit-circle values
    out = x.cell[k0, l0] * np.exp(2j * np.pi * np.mod(n * l0, N) / N)
    return complex(out) if out.ndim == 0 else out


def dzt(td: TDSignal | np.ndarray, grid: DDGridParams) -> DDSignal:
    """Discrete Zak transform of one ``M*N``-sample frame.

    ``y_dd[k, l] = sum_{n=0}^{N-1} y[k + n*M] * exp(-j*2*pi*n*l/N)``
    """
    samples = td.samples if isinstance(td, TDSignal) else np.asarray(td, dtype=np.complex128)
    if samples.size != grid.MN:
        raise FrameSizeError(f"frame needs {grid.MN} samples, got {samples.size}")
    if isinstance(td, TDSignal) and not np.isclose(td.sample_rate, grid.B, rtol=1e-9):
        raise FrameSizeError(f"sample rate {td.sample_rate} Hz differs from B = {grid.B} Hz")
    y = samples.reshape(grid.N, grid.M)  # y[n, k] = samples[k + n*M]
    return DDSignal(grid, np.fft.fft(y, axis=0).T)


def idzt(x: DDSignal) -> TDSignal:
    """Inverse DZT at the critical rate ``F_s = B``.

    At critical sampling the sinc pulses reduce to Kronecker deltas and
    ``s[k + n*M] = (1/N) * sum_l x[k, l] * exp(j*2*pi*n*l/N)``.  Energy
    scales as ``||s||^2 = ||x||^2 / N``.
    """
    s = np.fft.ifft(x.cell, axis=1).T.reshape(-1)
    return TDSignal(s, x.grid.B)


def sinc_interpolate(samples: np.ndarray, oversample: int, half_width: int = 64) -> np.ndarray:
    """Band-limited interpolation of critically sampled data by ``oversample``.

    Output sample ``q`` equals ``sum_p s[p] * sinc(q/oversample - p)`` with
    the sum truncated to ``|q/oversample - p| <= half_width``.  Output length
    is ``oversample * len(samples)``; tails past the last input are dropped.
    """
    oversample = check_positive_int(oversample, "oversample")
    half_width = check_positive_int(half_width, "half_width")
    s = np.asarray(samples, dtype=np.complex128).reshape(-1)
    if oversample == 1:
        return s.copy()
    up = np.zeros(s.size * oversample, dtype=np.complex128)
    up[::oversample] = s
    span = half_width * oversample
    kernel = np.sinc(np.arange(-span, span + 1) / oversample)
    return np.convolve(up, kernel)[span : span + up.size]


def oversampled_td(x: DDSignal, oversample: int = 4, sinc_half_width: int = 64) -> TDSignal:
    """Sample the sinc-shaped Zak-OTFS waveform at ``oversample * B``.

    Same amplitude scale as :func:`idzt`; at ``oversample == 1`` the two agree.
    """
    if sinc_half_width < 8:
        raise InvalidParameterError("sinc_half_width must be >= 8")
    s = sinc_interpolate(idzt(x).samples, oversample, sinc_half_width)
    return TDSignal(s, oversample * x.grid.B)


def _as_filter(w, grid: DDGridParams) -> DDFilter:
    if isinstance(w, DDFilter):
        return w
    if isinstance(w, DDChannelEstimate):
        return w.to_filter()
    raise TypeError(f"expected DDFilter or DDChannelEstimate, got {type(w).__name__}")


def _twisted_by_taps(w: DDFilter, x: DDSignal, chunk: int = 256) -> np.ndarray:
    grid = x.grid
    M, N, MN = grid.M, grid.N, grid.MN
    k = np.arange(M)[:, None, None]
    l = np.arange(N)[None, :, None]
    out = np.zeros(grid.shape, dtype=np.complex128)
    for start in range(0, w.ntaps, chunk):
        kt = w.delays[start : start + chunk][None, None, :]
        lt = w.dopplers[start : start + chunk][None, None, :]
        vt = w.values[start : start + chunk][None, None, :]
        dk = k - kt
        phase = np.exp(2j * np.pi * np.mod(lt * dk, MN) / MN)
        out += np.sum(vt * quasi_extend(x, dk, l - lt) * phase, axis=2)
    return out


def _twisted_by_signal(w: DDFilter, x: DDSignal) -> np.ndarray:
    # z[k,l] = sum_{a,b} x_ext[a,b] w[k-a, l-b] e^{j2pi (l-b) a / MN}, with
    # (a,b) over one MN x MN period of the quasi-periodic copies of x.
    grid = x.grid
    M, N, MN = grid.M, grid.N, grid.MN
    dense = w.to_dense()
    k = np.arange(M)[:, None]
    l = np.arange(N)[None, :]
    out = np.zeros(grid.shape, dtype=np.complex128)
    for k0, l0 in zip(*np.nonzero(x.cell)):
        for n in range(N):
            a = k0 + n * M
            rows = dense[np.mod(k - a, MN).ravel()]  # (M, MN)
            for m in range(M):
                b = l0 + m * N
                xv = quasi_extend(x, a, b)
                wv = rows[:, np.mod(l - b, MN).ravel()]
                out += xv * wv * np.exp(2j * np.pi * np.mod((l - b) * a, MN) / MN)
    return out


def twisted_conv_periodic(w: DDFilter | DDChannelEstimate, x: DDSignal) -> DDSignal:
    """MN-periodic twisted convolution ``w (*)_sigma x``.

    ``z[k,l] = sum_{k',l' in [0,MN)} w[k',l'] x_ext[k-k', l-l']
    exp(j*2*pi*l'*(k-k')/MN)``, returned as a fundamental cell.  The
    summand is MN-periodic in ``k'`` and ``l'``, so iterating either over the
    taps of ``w`` or over the periodic copies of a sparse ``x`` evaluates the
    same sum; the cheaper order is picked.
    """
    w = _as_filter(w, x.grid)
    if w.grid != x.grid:
        raise InvalidParameterError(f"grid mismatch: {w.grid} vs {x.grid}")
    nnz = int(np.count_nonzero(x.cell))
    if nnz * x.grid.MN < w.ntaps:
        return DDSignal(x.grid, _twisted_by_signal(w, x))
    return DDSignal(x.grid, _twisted_by_taps(w, x))


def compose_filters(w1: DDFilter, w2: DDFilter) -> DDFilter:
    """Twisted convolution of two MN-periodic filters over one period.

    Dense ``O((MN)^4)`` evaluation; meant for small grids.
    """
    if w1.grid != w2.grid:
        raise InvalidParameterError("grid mismatch")
    MN = w1.grid.MN
    d2 = w2.to_dense()
    k = np.arange(MN)[:, None]
    l = np.arange(MN)[None, :]
    out = np.zeros((MN, MN), dtype=np.complex128)
    for kt, lt, v in zip(w1.delays, w1.dopplers, w1.values):
        out += v * d2[np.mod(k - kt, MN), np.mod(l - lt, MN)] * np.exp(2j * np.pi * np.mod(lt * (k - kt), MN) / MN)
    return DDFilter.from_dense(w1.grid, out)


def cross_ambiguity(y: DDSignal, x_ref: DDSignal, support: SupportSet | None = None) -> DDChannelEstimate:
    """Cross-ambiguity of ``y`` against ``x_ref`` on the support lags.

    ``A[k,l] = sum_{k',l'} y[k',l'] conj(x_ref_ext[k'-k, l'-l])
    exp(-j*2*pi*l*(k'-k)/MN)``.  For a unit-energy reference this is the
    maximum-likelihood estimate of the effective channel tap at ``(k, l)``.
    """
    check_same_grid(y, x_ref)
    support = SupportSet() if support is None else support
    support.check_fits(y.grid)
    grid = y.grid
    kk = np.arange(grid.M)[:, None]
    ll = np.arange(grid.N)[None, :]
    values = np.empty(support.shape, dtype=np.complex128)
    for i, k in enumerate(range(support.k_min, support.k_max + 1)):
        dk = kk - k
        for j, l in enumerate(range(support.l_min, support.l_max + 1)):
            ref = quasi_extend(x_ref, dk, ll - l)
            phase = np.exp(-2j * np.pi * np.mod(l * dk, grid.MN) / grid.MN)
            values[i, j] = np.sum(y.cell * np.conj(ref) * phase)
    return DDChannelEstimate(grid, support, values)
