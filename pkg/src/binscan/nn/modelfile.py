"""Binary model file.

Layout (little-endian)::

    magic "BIMG" | version u32 | classes u32 | seed u64 | normalized u8
    per tensor in PARAM_ORDER: rank u32 | dims u32 * rank | f32 * prod(dims)
    crc32 u32 over every preceding byte
"""
from __future__ import annotations

import hashlib
import struct
import zlib
from pathlib import Path

import numpy as np

from ..errors import CorruptModel
from .model import PARAM_ORDER, ModelSpec, Network

MAGIC = b"BIMG"
VERSION = 1
_HEADER = struct.Struct("<4sIIQB")


def dumps_model(net: Network) -> bytes:
    net.check_shapes()
    parts = [_HEADER.pack(MAGIC, VERSION, net.spec.classes, net.seed, int(net.normalized))]
    for name in PARAM_ORDER:
        arr = net.params[name]
        parts.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def loads_model(blob: bytes) -> Network:
    """Parse a model file; weights come back as float64."""
    if len(blob) < _HEADER.size + 4:
        raise CorruptModel("model file is truncated")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise CorruptModel("model file CRC32 mismatch")
    magic, version, classes, seed, normalized = _HEADER.unpack_from(body, 0)
    if magic != MAGIC:
        raise CorruptModel(f"bad magic {magic!r}")
    if version != VERSION:
        raise CorruptModel(f"unsupported model format version {version}")
    try:
        spec = ModelSpec(classes=classes)
    except ValueError as exc:
        raise CorruptModel(str(exc)) from exc
    expected = spec.param_shapes()
    pos = _HEADER.size
    params = {}
    try:
        for name in PARAM_ORDER:
            (rank,) = struct.unpack_from("<I", body, pos)
            pos += 4
            dims = struct.unpack_from(f"<{rank}I", body, pos)
            pos += 4 * rank
            if dims != expected[name]:
                raise CorruptModel(f"{name} has dims {dims}, expected {expected[name]}")
            count = int(np.prod(dims))
            arr = np.frombuffer(body, dtype="<f4", count=count, offset=pos)
            pos += 4 * count
            params[name] = arr.astype(np.float64).reshape(dims)
    except struct.error as exc:
        raise CorruptModel("model file is truncated") from exc
    except ValueError as exc:
        if isinstance(exc, CorruptModel):
            raise
        raise CorruptModel("model file is truncated") from exc
    if pos != len(body):
        raise CorruptModel(f"{len(body) - pos} unexpected trailing bytes")
    net = Network(spec=spec, params=params, seed=seed, normalized=bool(normalized))
    net.digest = hashlib.sha256(blob).hexdigest()
    return net


def save_model(net: Network, path) -> str:
    """Write the model and return the SHA-256 of the file."""
    blob = dumps_model(net)
    Path(path).write_bytes(blob)
    return hashlib.sha256(blob).hexdigest()


def load_model(path) -> Network:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise CorruptModel(f"cannot read model file {path}: {exc}") from exc
    return loads_model(blob)
