"""WAV ingest/export and the binary feature-dump format.

Feature dump layout (little endian)::

    b"SSFD" | u16 version | u32 header_len | header (UTF-8 JSON) | payload

The header holds ``shape``, ``dtype``, ``layout``, ``hop`` (seconds) and
``sample_rate``; the payload is the raw C-ordered array.
"""

from __future__ import annotations

import json
import os
import struct
from math import gcd
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from ..exceptions import DataError
from .types import HOP_SIZE, SAMPLE_RATE, AudioClip

DUMP_MAGIC = b"SSFD"
DUMP_VERSION = 1


def load_wav(path, sample_rate: int = SAMPLE_RATE) -> AudioClip:
    try:
        rate, data = wavfile.read(path)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read WAV {path}: {exc}") from exc
    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        x = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.uint8:
        x = (data.astype(np.float64) - 128.0) / 128.0
    else:
        x = data.astype(np.float64)
    if x.ndim == 2:
        x = x.mean(axis=1)
    if rate != sample_rate:
        g = gcd(int(rate), int(sample_rate))
        x = resample_poly(x, sample_rate // g, rate // g)
    return AudioClip(np.clip(x, -1.0, 1.0), sample_rate)


def save_wav(path, clip: AudioClip) -> None:
    pcm = np.round(np.clip(clip.samples, -1.0, 1.0 - 1.0 / 32768) * 32768.0).astype(np.int16)
    wavfile.write(path, clip.sample_rate, pcm)


def save_feature_dump(path, array, layout: str, hop: float = HOP_SIZE / SAMPLE_RATE,
                      sample_rate: int = SAMPLE_RATE) -> None:
    array = np.ascontiguousarray(array)
    header = json.dumps(
        {
            "shape": list(array.shape),
            "dtype": array.dtype.str,
            "layout": layout,
            "hop": hop,
            "sample_rate": sample_rate,
        },
        sort_keys=True,
    ).encode()
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(DUMP_MAGIC)
        fh.write(struct.pack("<HI", DUMP_VERSION, len(header)))
        fh.write(header)
        fh.write(array.astype(array.dtype.newbyteorder("<"), copy=False).tobytes())
    os.replace(tmp, path)


def load_feature_dump(path, expect_layout: str | None = None):
    """Return ``(array, header)``."""
    with open(path, "rb") as fh:
        if fh.read(4) != DUMP_MAGIC:
            raise DataError(f"{path} is not a feature dump")
        version, n = struct.unpack("<HI", fh.read(6))
        if version != DUMP_VERSION:
            raise DataError(f"{path}: unsupported dump version {version}")
        header = json.loads(fh.read(n))
        payload = fh.read()
    if expect_layout is not None and header["layout"] != expect_layout:
        raise DataError(f"{path}: layout {header['layout']!r}, expected {expect_layout!r}")
    dtype = np.dtype(header["dtype"]).newbyteorder("<")
    array = np.frombuffer(payload, dtype=dtype).reshape(header["shape"])
    return array.astype(dtype.newbyteorder("="), copy=True), header
