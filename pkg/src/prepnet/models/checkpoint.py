"""Versioned binary checkpoint container.

Layout (all integers little-endian):

    bytes 0..3   magic "PNCK"
    byte  4      container version (1)
    bytes 5..8   header length u32
    header       UTF-8 JSON: format_version, config_hash, meta,
                 tensors: [{name, shape, dtype "<f4", offset, nbytes}]
    data         concatenated raw tensor bytes at the stated offsets
    last 4 bytes CRC32 (u32) of every preceding byte

Round-trips are bit-exact. Loading verifies the CRC and, when asked, the
config hash, so stale or foreign weights fail loudly instead of silently
misloading.
"""

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import CorruptCheckpointError, IncompatibleCheckpointError, ValidationError

MAGIC = b"PNCK"
CONTAINER_VERSION = 1
FORMAT_VERSION = 1


@dataclass
class ModelWeights:
    tensors: dict  # name -> float32 ndarray
    config_hash: str
    format_version: int = FORMAT_VERSION
    meta: dict = field(default_factory=dict)


def weights_from_params(named_params, cfg_hash, meta=None):
    """Snapshot (copy) named parameter tensors into a ModelWeights."""
    tensors = {}
    for name, t in named_params:
        if name in tensors:
            raise ValidationError(f"duplicate parameter name {name!r}")
        tensors[name] = np.array(t.data, copy=True)
    return ModelWeights(tensors=tensors, config_hash=cfg_hash, meta=dict(meta or {}))


def save_checkpoint(weights, path):
    entries = []
    blobs = []
    offset = 0
    for name in weights.tensors:
        arr = np.ascontiguousarray(weights.tensors[name])
        if arr.dtype != np.float32:
            raise ValidationError(f"checkpoint stores <f4 tensors; {name!r} has dtype {arr.dtype}")
        raw = arr.astype("<f4", copy=False).tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "dtype": "<f4",
                        "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps(
        {
            "format_version": weights.format_version,
            "config_hash": weights.config_hash,
            "meta": weights.meta,
            "tensors": entries,
        },
        sort_keys=True,
    ).encode("utf-8")
    body = MAGIC + struct.pack("<B", CONTAINER_VERSION) + struct.pack("<I", len(header)) + header + b"".join(blobs)
    crc = struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)
    Path(path).write_bytes(body + crc)


def load_checkpoint(path, expected_config_hash=None):
    raw = Path(path).read_bytes()
    if len(raw) < 13 or raw[:4] != MAGIC:
        raise CorruptCheckpointError(f"{path}: not a checkpoint file")
    body, crc_bytes = raw[:-4], raw[-4:]
    if struct.unpack("<I", crc_bytes)[0] != (zlib.crc32(body) & 0xFFFFFFFF):
        raise CorruptCheckpointError(f"{path}: checksum mismatch (truncated or corrupted)")
    version = body[4]
    if version != CONTAINER_VERSION:
        raise IncompatibleCheckpointError(f"{path}: container version {version} unsupported")
    (header_len,) = struct.unpack("<I", body[5:9])
    header_end = 9 + header_len
    if header_end > len(body):
        raise CorruptCheckpointError(f"{path}: header extends past end of file")
    try:
        header = json.loads(body[9:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CorruptCheckpointError(f"{path}: unreadable header: {e}") from e
    data = body[header_end:]
    tensors = {}
    for entry in header["tensors"]:
        start, n = entry["offset"], entry["nbytes"]
        if start + n > len(data):
            raise CorruptCheckpointError(f"{path}: tensor {entry['name']!r} extends past end of file")
        arr = np.frombuffer(data, dtype=entry["dtype"], count=n // 4, offset=start)
        tensors[entry["name"]] = arr.reshape(entry["shape"]).copy()
    weights = ModelWeights(
        tensors=tensors,
        config_hash=header["config_hash"],
        format_version=header["format_version"],
        meta=header.get("meta", {}),
    )
    if expected_config_hash is not None and weights.config_hash != expected_config_hash:
        raise IncompatibleCheckpointError(
            f"{path}: config hash {weights.config_hash[:12]}... does not match "
            f"expected {expected_config_hash[:12]}..."
        )
    return weights


def load_into(named_params, weights):
    """Assign checkpoint tensors onto live parameters, strict on names and shapes."""
    for name, t in named_params:
        if name not in weights.tensors:
            raise IncompatibleCheckpointError(f"checkpoint missing parameter {name!r}")
        arr = weights.tensors[name]
        if tuple(arr.shape) != tuple(t.data.shape):
            raise IncompatibleCheckpointError(
                f"parameter {name!r} shape {arr.shape} does not match model {t.data.shape}"
            )
        t.data[...] = arr.astype(t.data.dtype, copy=False)
