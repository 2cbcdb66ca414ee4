"""IQ capture files: interleaved little-endian float32 I/Q plus a JSON sidecar."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import IQFormatError

__all__ = ["IQCapture", "read_iq", "write_iq", "sidecar_path"]

_DTYPE = np.dtype("<f4")


@dataclass(frozen=True, eq=False)
class IQCapture:
    samples: np.ndarray
    sample_rate: float
    description: str = ""
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.complex64).reshape(-1))


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_iq(path, capture: IQCapture) -> None:
    if not (capture.sample_rate > 0 and math.isfinite(capture.sample_rate)):
        raise IQFormatError(f"invalid sample_rate {capture.sample_rate!r}")
    path = Path(path)
    inter = np.empty(2 * capture.samples.size, dtype=_DTYPE)
    inter[0::2] = capture.samples.real
    inter[1::2] = capture.samples.imag
    path.write_bytes(inter.tobytes())
    meta = {"sample_rate": float(capture.sample_rate), "description": capture.description, **capture.notes}
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_iq(path) -> IQCapture:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) % _DTYPE.itemsize:
        raise IQFormatError(f"{path}: byte length {len(raw)} is not a whole number of float32 values")
    floats = np.frombuffer(raw, dtype=_DTYPE)
    if floats.size % 2:
        raise IQFormatError(f"{path}: odd number of floats ({floats.size}), I/Q pairs are truncated")
    side = sidecar_path(path)
    try:
        meta = json.loads(side.read_text())
    except FileNotFoundError:
        raise IQFormatError(f"missing sidecar metadata {side}") from None
    except json.JSONDecodeError as exc:
        raise IQFormatError(f"invalid sidecar JSON {side}: {exc}") from None
    if not isinstance(meta, dict):
        raise IQFormatError(f"{side}: metadata must be a JSON object")
    rate = meta.pop("sample_rate", None)
    if isinstance(rate, bool) or not isinstance(rate, (int, float)) or not rate > 0:
        raise IQFormatError(f"{side}: sample_rate must be a positive number, got {rate!r}")
    description = meta.pop("description", "")
    if not isinstance(description, str):
        raise IQFormatError(f"{side}: description must be a string")
    # reinterpret the pairs directly; arithmetic like re + 1j*im loses signed zeros
    samples = np.frombuffer(raw, dtype="<c8").astype(np.complex64)
    return IQCapture(samples, float(rate), description, meta)
