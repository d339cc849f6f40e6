"""Binary checkpoint files.

Layout (all integers little-endian u32):

    magic "KTRLCKPT" | version | blocks until EOF

Each block: name length, UTF-8 name, shape rank, extents (u32 each), then the
values as little-endian float64 regardless of in-memory precision. Small
string/scalar metadata travels inside the same format via ``encode_text``.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .tensor import Tensor

MAGIC = b"KTRLCKPT"
VERSION = 1


class CheckpointError(RuntimeError):
    pass


def encode_text(text: str) -> np.ndarray:
    """Represent a short string as a float vector of its UTF-8 bytes."""
    return np.frombuffer(text.encode("utf-8"), dtype=np.uint8).astype(np.float64)


def decode_text(arr: np.ndarray) -> str:
    return np.asarray(arr).astype(np.uint8).tobytes().decode("utf-8")


def save_checkpoint(path, params: dict[str, "np.ndarray | Tensor"]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        for name, value in params.items():
            arr = value.data if isinstance(value, Tensor) else np.asarray(value)
            arr = np.ascontiguousarray(arr, dtype="<f8")
            name_b = name.encode("utf-8")
            f.write(struct.pack("<I", len(name_b)))
            f.write(name_b)
            f.write(struct.pack("<I", arr.ndim))
            for ext in arr.shape:
                f.write(struct.pack("<I", ext))
            f.write(arr.tobytes())


def _read_exact(f, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise CheckpointError(f"truncated checkpoint: expected {n} bytes for {what} at offset {f.tell() - len(data)}")
    return data


def load_checkpoint(path) -> dict[str, np.ndarray]:
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(len(MAGIC))
        if magic != MAGIC:
            raise CheckpointError(f"bad magic {magic!r} at offset 0 (expected {MAGIC!r})")
        (version,) = struct.unpack("<I", _read_exact(f, 4, "version"))
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        out: dict[str, np.ndarray] = {}
        while True:
            head = f.read(4)
            if not head:
                return out
            if len(head) != 4:
                raise CheckpointError(f"truncated checkpoint: partial name length at offset {f.tell() - len(head)}")
            (name_len,) = struct.unpack("<I", head)
            name = _read_exact(f, name_len, "name").decode("utf-8")
            (rank,) = struct.unpack("<I", _read_exact(f, 4, f"rank of {name!r}"))
            shape = tuple(
                struct.unpack("<I", _read_exact(f, 4, f"extent of {name!r}"))[0] for _ in range(rank)
            )
            count = int(np.prod(shape)) if shape else 1
            raw = _read_exact(f, 8 * count, f"values of {name!r}")
            out[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
