"""Point pilots and chirp-spread pilots."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DDFilter, DDGridParams, DDSignal, twisted_conv_periodic
from .exceptions import InvalidParameterError

__all__ = [
    "PointPilotSpec",
    "SpreadPilotSpec",
    "ValidationResult",
    "point_pilot",
    "chirp_filter",
    "spread_pilot",
    "spread_pilot_closed_form",
    "spread_pilot_by_convolution",
    "validate_spread_params",
    "default_point_location",
    "default_spread_location",
]


@dataclass(frozen=True)
class PointPilotSpec:
    k_p: int
    l_p: int
    energy: float = 1.0


@dataclass(frozen=True)
class SpreadPilotSpec:
    k_p: int
    l_p: int
    u: int
    energy: float = 1.0


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    return all(n % d for d in range(3, math.isqrt(n) + 1, 2))


def validate_spread_params(M: int, N: int, u: int) -> ValidationResult:
    """Check that ``M`` and ``N`` are odd primes and ``u`` is coprime to both.

    These conditions give the spread pilot a constant magnitude over the
    grid.  The failing constraint is named in ``reason``.
    """
    for name, value in (("M", M), ("N", N)):
        if value == 2 or not _is_prime(value):
            return ValidationResult(False, f"{name}={value} is not an odd prime")
    for name, value in (("M", M), ("N", N)):
        g = math.gcd(u, value)
        if g != 1:
            return ValidationResult(False, f"gcd(u={u}, {name}={value}) = {g}, u must be coprime to {name}")
    return ValidationResult(True)


def default_point_location(grid: DDGridParams) -> tuple[int, int]:
    return grid.M // 2, grid.N // 2


def default_spread_location(grid: DDGridParams) -> tuple[int, int]:
    return (grid.M + 1) // 2, (grid.N + 1) // 2


def _check_location(grid: DDGridParams, k_p: int, l_p: int, energy: float) -> None:
    if not (0 <= k_p < grid.M and 0 <= l_p < grid.N):
        raise InvalidParameterError(f"pilot location ({k_p}, {l_p}) outside the {grid.M}x{grid.N} cell")
    if not energy > 0:
        raise InvalidParameterError(f"pilot energy must be > 0, got {energy}")


def point_pilot(grid: DDGridParams, spec: PointPilotSpec) -> DDSignal:
    """Single DD impulse of energy ``spec.energy`` at ``(k_p, l_p)``."""
    _check_location(grid, spec.k_p, spec.l_p, spec.energy)
    cell = np.zeros(grid.shape, dtype=np.complex128)
    cell[spec.k_p, spec.l_p] = math.sqrt(spec.energy)
    return DDSignal(grid, cell)


def chirp_filter(grid: DDGridParams, u: int) -> DDFilter:
    """MN-periodic chirp ``w[k,l] = exp(j*2*pi*u*(k^2 + l^2)/MN) / MN``.

    Returned over one full ``MN x MN`` period.
    """
    MN = grid.MN
    idx = np.arange(MN, dtype=np.int64)
    sq = np.mod(u * idx * idx, MN)
    phase = np.mod(sq[:, None] + sq[None, :], MN)
    period = np.exp(2j * np.pi * phase / MN) / MN
    k, l = np.meshgrid(idx, idx, indexing="ij")
    return DDFilter(grid, k.ravel(), l.ravel(), period.ravel())


def spread_pilot_closed_form(grid: DDGridParams, k_p: int, l_p: int, u: int) -> np.ndarray:
    """Chirp-filtered point pilot evaluated by its explicit double sum.

    Unnormalized; independent of :func:`twisted_conv_periodic`.
    """
    M, N, MN = grid.M, grid.N, grid.MN
    k = np.arange(M)[:, None]
    l = np.arange(N)[None, :]
    out = np.zeros(grid.shape, dtype=np.complex128)
    for n in range(N):
        for m in range(M):
            dk = k - k_p - n * M
            dl = l - l_p - m * N
            ph = (n * (l_p + m * N) * M + dl * (k_p + n * M) + u * (dk * dk + dl * dl)) % MN
            out += np.exp(2j * np.pi * ph / MN)
    return out / MN


def spread_pilot(grid: DDGridParams, spec: SpreadPilotSpec, *, check: bool = True) -> DDSignal:
    """Spread pilot ``w (*)_sigma x_p`` scaled to total energy ``spec.energy``.

    ``check=False`` skips the odd-prime/coprime validation, for studying
    grids that break the constant-magnitude property.
    """
    if check:
        result = validate_spread_params(grid.M, grid.N, spec.u)
        if not result:
            raise InvalidParameterError(result.reason)
    _check_location(grid, spec.k_p, spec.l_p, spec.energy)
    cell = spread_pilot_closed_form(grid, spec.k_p, spec.l_p, spec.u)
    cell *= math.sqrt(spec.energy / np.sum(np.abs(cell) ** 2))
    return DDSignal(grid, cell)


def spread_pilot_by_convolution(grid: DDGridParams, spec: SpreadPilotSpec) -> DDSignal:
    """Same pilot as :func:`spread_pilot`, built with the generic twisted convolution."""
    unit = point_pilot(grid, PointPilotSpec(spec.k_p, spec.l_p, 1.0))
    out = twisted_conv_periodic(chirp_filter(grid, spec.u), unit)
    return out.scaled(math.sqrt(spec.energy / out.energy))
