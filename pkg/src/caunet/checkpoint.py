"""Checkpoint files (RLCK v1).

Layout: magic "RLCK", u8 version, u32 JSON header length, JSON header
(UTF-8), then the raw little-endian tensor payload. The header carries the
model config, step counter, current learning rates, optimizer scalar state,
the shuffle RNG state and a manifest of every tensor (name, shape, dtype,
byte offset). Model parameters, Adam moments and the epoch permutation are
all stored as tensors, so save -> load -> continue reproduces an
uninterrupted run bit for bit.
"""

import json
import struct

import numpy as np

MAGIC = b"RLCK"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _dtype_tag(arr):
    return np.dtype(arr.dtype).str  # e.g. "<f4"


def save_checkpoint(path, header, tensors):
    """``header`` is a JSON-able dict, ``tensors`` an ordered name->array map."""
    manifest = []
    offset = 0
    blobs = []
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr)
        raw = arr.astype(arr.dtype.newbyteorder("<")).tobytes()
        manifest.append(
            {"name": name, "shape": list(arr.shape), "dtype": _dtype_tag(arr),
             "offset": offset, "nbytes": len(raw)}
        )
        blobs.append(raw)
        offset += len(raw)
    head = dict(header)
    head["tensors"] = manifest
    head_bytes = json.dumps(head, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<BI", VERSION, len(head_bytes)))
        f.write(head_bytes)
        for raw in blobs:
            f.write(raw)


def load_checkpoint(path):
    """Returns (header, tensors)."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise CheckpointError(f"{path}: bad magic {magic!r}")
        ver, hlen = struct.unpack("<BI", f.read(5))
        if ver != VERSION:
            raise CheckpointError(f"{path}: unsupported version {ver}")
        header = json.loads(f.read(hlen).decode("utf-8"))
        payload = f.read()
    tensors = {}
    for m in header["tensors"]:
        lo = m["offset"]
        hi = lo + m["nbytes"]
        arr = np.frombuffer(payload[lo:hi], dtype=np.dtype(m["dtype"]))
        tensors[m["name"]] = arr.reshape(m["shape"]).copy()
    return header, tensors
