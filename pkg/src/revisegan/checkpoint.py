"""Versioned binary checkpoints with bit-exact round-trips.

Layout: an 8-byte magic+version header, a canonical JSON metadata block
(config snapshot, counters, optimizer param groups, config hash), then the
named tensor blobs sorted by name, each as dtype / shape / raw little-endian
bytes.  The writer is fully deterministic, so saving the same state twice
produces byte-identical files and ``save -> load -> save`` is the identity.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

__all__ = ["write_blobs", "read_blobs", "config_hash", "CheckpointError"]

MAGIC = b"RVGC"
VERSION = 1


class CheckpointError(RuntimeError):
    pass


def config_hash(mapping: dict) -> str:
    """Stable hash of a flat config mapping (canonical JSON, sha256)."""
    blob = json.dumps(mapping, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def write_blobs(path, meta: dict, blobs: dict[str, np.ndarray]):
    """Write metadata and named arrays to ``path`` deterministically."""
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()
    out = [MAGIC, struct.pack("<I", VERSION), struct.pack("<Q", len(meta_bytes)), meta_bytes]
    out.append(struct.pack("<I", len(blobs)))
    for name in sorted(blobs):
        arr = np.asarray(blobs[name])  # tobytes() below yields C order regardless
        name_b = name.encode()
        dtype_b = arr.dtype.str.encode()  # includes byte order, e.g. '<f4'
        out.append(struct.pack("<H", len(name_b)))
        out.append(name_b)
        out.append(struct.pack("<H", len(dtype_b)))
        out.append(dtype_b)
        out.append(struct.pack("<B", arr.ndim))
        out.append(struct.pack(f"<{max(arr.ndim, 1)}Q", *(arr.shape or (0,))))
        raw = arr.tobytes()
        out.append(struct.pack("<Q", len(raw)))
        out.append(raw)
    data = b"".join(out)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)


def read_blobs(path) -> tuple[dict, dict[str, np.ndarray]]:
    """Read a checkpoint written by :func:`write_blobs`."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    data = path.read_bytes()
    if data[:4] != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint file (bad magic)")
    version = struct.unpack_from("<I", data, 4)[0]
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    offset = 8
    (meta_len,) = struct.unpack_from("<Q", data, offset)
    offset += 8
    meta = json.loads(data[offset:offset + meta_len].decode())
    offset += meta_len
    (n_blobs,) = struct.unpack_from("<I", data, offset)
    offset += 4
    blobs: dict[str, np.ndarray] = {}
    for _ in range(n_blobs):
        (name_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        name = data[offset:offset + name_len].decode()
        offset += name_len
        (dtype_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        dtype = np.dtype(data[offset:offset + dtype_len].decode())
        offset += dtype_len
        (ndim,) = struct.unpack_from("<B", data, offset)
        offset += 1
        shape = struct.unpack_from(f"<{max(ndim, 1)}Q", data, offset)
        offset += 8 * max(ndim, 1)
        shape = tuple(shape[:ndim])
        (raw_len,) = struct.unpack_from("<Q", data, offset)
        offset += 8
        arr = np.frombuffer(data[offset:offset + raw_len], dtype=dtype).reshape(shape)
        offset += raw_len
        blobs[name] = arr.copy()
    return meta, blobs
