"""Input validation helpers shared by the functional API and the estimators."""

from __future__ import annotations

import numbers

import numpy as np

from .exceptions import FrameSizeError, InvalidParameterError


def check_positive_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise InvalidParameterError(f"{name} must be an integer, got {value!r}")
    if value < 1:
        raise InvalidParameterError(f"{name} must be >= 1, got {value}")
    return int(value)


def check_positive_float(value, name: str) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise InvalidParameterError(f"{name} must be a real number, got {value!r}") from None
    if not np.isfinite(out) or out <= 0:
        raise InvalidParameterError(f"{name} must be finite and > 0, got {value!r}")
    return out


def check_complex_array(x, *, ndim: int | None = None, shape=None, name: str = "array") -> np.ndarray:
    """Return ``x`` as a finite complex128 array, checking rank and shape.

    scikit-learn's ``check_array`` rejects complex input, hence this helper.
    """
    arr = np.asarray(x, dtype=np.complex128)
    if ndim is not None and arr.ndim != ndim:
        raise FrameSizeError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise FrameSizeError(f"{name} must have shape {tuple(shape)}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError(f"{name} contains NaN or inf")
    return arr


def check_bits(bits, *, length: int | None = None, name: str = "bits") -> np.ndarray:
    """Return ``bits`` as a 1-D uint8 array of zeros and ones."""
    arr = np.asarray(bits)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise InvalidParameterError(f"{name} must contain only 0 and 1")
    arr = arr.astype(np.uint8)
    if length is not None and arr.size != length:
        raise FrameSizeError(f"{name} must have {length} entries, got {arr.size}")
    return arr


def check_same_grid(a, b) -> None:
    if a.grid != b.grid:
        raise InvalidParameterError(f"grid mismatch: {a.grid} vs {b.grid}")
