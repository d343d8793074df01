"""Binary weight container for deployment on small targets.

Layout (all little-endian):

    bytes 0-3   magic ``TGCN``
    bytes 4-5   format version, u16 (currently 1)
    per subnet (calibration first, then denoising):
        u32 value count
        count x IEEE-754 binary32 values

Value order is the canonical flattening: lbn1 matrix row-major, lbn1
bias, lbn2 matrix, lbn2 bias, PReLU slopes; then per conv layer the
weights in [out-channel][in-channel][tap] order followed by the biases.

The container is the single on-disk weight format of the package, so a
file produced after phase-1 training already carries a (still
untrained) denoiser section. Values are stored as binary32; an
export/import/export round trip is byte-identical.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from . import model
from .errors import (
    BadMagicError,
    NonFiniteWeightError,
    TruncatedFileError,
    VersionMismatchError,
)

MAGIC = b"TGCN"
FORMAT_VERSION = 1

CALIB_COUNT = 27
DENOISE_COUNT = 168
FILE_SIZE = len(MAGIC) + 2 + 2 * 4 + 4 * (CALIB_COUNT + DENOISE_COUNT)  # = 794


def _flatten(items) -> np.ndarray:
    return np.concatenate([np.asarray(a, dtype=np.float64).ravel() for _, a in items])


def _pack_section(values: np.ndarray) -> bytes:
    if not np.all(np.isfinite(values)):
        raise NonFiniteWeightError("refusing to export non-finite weight values")
    payload = values.astype("<f4").tobytes()
    return struct.pack("<I", values.size) + payload


def export_weights(calib: model.CalibNetParams, denoise: model.DenoiseNetParams, path) -> None:
    """Write both subnets to ``path`` in the container format."""
    blob = MAGIC + struct.pack("<H", FORMAT_VERSION)
    blob += _pack_section(_flatten(model.calib_param_items(calib)))
    blob += _pack_section(_flatten(model.denoise_param_items(denoise)))
    Path(path).write_bytes(blob)


def _take(buf: bytes, offset: int, size: int, what: str) -> tuple[bytes, int]:
    if offset + size > len(buf):
        raise TruncatedFileError(f"file ends inside {what} ({len(buf)} bytes total)")
    return buf[offset : offset + size], offset + size


def _read_section(buf: bytes, offset: int, expected: int, name: str):
    raw, offset = _take(buf, offset, 4, f"{name} count")
    (count,) = struct.unpack("<I", raw)
    if count != expected:
        raise TruncatedFileError(f"{name} section declares {count} values, expected {expected}")
    raw, offset = _take(buf, offset, 4 * count, f"{name} payload")
    values = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise NonFiniteWeightError(f"{name} section contains non-finite values")
    return values, offset


def _unflatten(values: np.ndarray, shapes):
    arrays, at = [], 0
    for shape in shapes:
        size = int(np.prod(shape))
        arrays.append(values[at : at + size].reshape(shape))
        at += size
    return arrays


def import_weights(path) -> tuple[model.CalibNetParams, model.DenoiseNetParams]:
    """Read a container written by :func:`export_weights`.

    Returned arrays are float64 holding exact binary32 values.
    """
    buf = Path(path).read_bytes()
    raw, offset = _take(buf, 0, len(MAGIC), "magic")
    if raw != MAGIC:
        raise BadMagicError(f"bad magic {raw!r}, expected {MAGIC!r}")
    raw, offset = _take(buf, offset, 2, "version")
    (version,) = struct.unpack("<H", raw)
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"unsupported format version {version}")

    calib_values, offset = _read_section(buf, offset, CALIB_COUNT, "calibration")
    denoise_values, offset = _read_section(buf, offset, DENOISE_COUNT, "denoising")
    if offset != len(buf):
        raise TruncatedFileError(f"{len(buf) - offset} unexpected trailing bytes")

    calib = model.calib_from_arrays(_unflatten(calib_values, ((3, 3), (3,), (3, 3), (3,), (3,))))
    shapes = []
    for out_ch, in_ch, k in model.DENOISE_LAYER_SHAPES:
        shapes.append((out_ch, in_ch, k))
        shapes.append((out_ch,))
    denoise = model.denoise_from_arrays(_unflatten(denoise_values, shapes))
    return calib, denoise
