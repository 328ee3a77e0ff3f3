"""Binary tensor checkpoints.

Layout::

    b"HMGNNCKP"                 8-byte magic
    version                     1 byte
    header length               uint32, little-endian
    header                      UTF-8 JSON: {"tensors": [{"name", "shape", "dtype"}], ...}
    tensor data                 float64 little-endian, row-major, manifest order

Extra header keys (model config, vocabulary) are carried through untouched.
"""
from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"HMGNNCKP"
VERSION = 1
DTYPE_TAG = "<f8"


class CheckpointError(ValueError):
    pass


def write_checkpoint(path, tensors: dict, **extra) -> None:
    manifest = [{"name": name, "shape": list(np.shape(arr)), "dtype": DTYPE_TAG}
                for name, arr in tensors.items()]
    header = json.dumps({"tensors": manifest, **extra}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(bytes([VERSION]))
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for arr in tensors.values():
            fh.write(np.ascontiguousarray(arr, dtype=DTYPE_TAG).tobytes())


def read_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    pos = len(MAGIC)
    if blob[pos] != VERSION:
        raise CheckpointError(f"{path}: unsupported version {blob[pos]}")
    (hlen,) = struct.unpack_from("<I", blob, pos + 1)
    pos += 5
    header = json.loads(blob[pos:pos + hlen].decode("utf-8"))
    pos += hlen
    tensors = {}
    for entry in header["tensors"]:
        if entry["dtype"] != DTYPE_TAG:
            raise CheckpointError(f"{path}: unsupported dtype {entry['dtype']}")
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        end = pos + 8 * count
        if end > len(blob):
            raise CheckpointError(f"{path}: truncated tensor {entry['name']}")
        tensors[entry["name"]] = (
            np.frombuffer(blob[pos:end], dtype=DTYPE_TAG).reshape(shape).astype(np.float64))
        pos = end
    if pos != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - pos} trailing bytes")
    return header, tensors
