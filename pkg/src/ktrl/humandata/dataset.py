"""Trajectory dataset binary format.

Layout (integers little-endian u32, floats little-endian f32):

    magic "KTRLDATA" | version | record count | records

Each record is a length-prefixed payload:

    payload bytes | goal | frame_rate | T | d | P |
    keypoints T*d*3 | clouds T*P*3

so records can be skipped or streamed one at a time.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"KTRLDATA"
VERSION = 1


class DatasetError(RuntimeError):
    pass


@dataclass
class TrajectoryRecord:
    """One human demonstration: goal label plus per-frame keypoints/clouds."""

    goal: int
    keypoints: np.ndarray      # (T, d, 3) float32
    clouds: np.ndarray         # (T, P, 3) float32, P = 100 * n_objects
    frame_rate: float

    def __post_init__(self):
        self.keypoints = np.asarray(self.keypoints, dtype=np.float32)
        self.clouds = np.asarray(self.clouds, dtype=np.float32)
        if self.keypoints.ndim != 3 or self.keypoints.shape[2] != 3:
            raise ValueError(f"keypoints shape {self.keypoints.shape}")
        if self.clouds.ndim != 3 or self.clouds.shape[2] != 3:
            raise ValueError(f"clouds shape {self.clouds.shape}")
        if self.clouds.shape[0] != self.keypoints.shape[0]:
            raise ValueError("keypoints and clouds disagree on frame count")
        if not np.all(np.isfinite(self.keypoints)):
            raise ValueError("non-finite keypoints")

    @property
    def n_frames(self) -> int:
        return self.keypoints.shape[0]

    def __eq__(self, other) -> bool:
        return (isinstance(other, TrajectoryRecord)
                and self.goal == other.goal
                and self.frame_rate == other.frame_rate
                and np.array_equal(self.keypoints, other.keypoints)
                and np.array_equal(self.clouds, other.clouds))


def _payload(record: TrajectoryRecord) -> bytes:
    t, d, _ = record.keypoints.shape
    p = record.clouds.shape[1]
    head = struct.pack("<IfIII", record.goal, record.frame_rate, t, d, p)
    return (head
            + np.ascontiguousarray(record.keypoints, "<f4").tobytes()
            + np.ascontiguousarray(record.clouds, "<f4").tobytes())


def write_dataset(path, records) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    records = list(records)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(records)))
        for record in records:
            payload = _payload(record)
            f.write(struct.pack("<I", len(payload)))
            f.write(payload)


def _read_exact(f, n: int, what: str) -> bytes:
    at = f.tell()
    data = f.read(n)
    if len(data) != n:
        raise DatasetError(
            f"truncated dataset: wanted {n} bytes for {what} at offset {at}, "
            f"got {len(data)}")
    return data


def _decode_record(payload: bytes, offset: int) -> TrajectoryRecord:
    head = struct.calcsize("<IfIII")
    if len(payload) < head:
        raise DatasetError(f"record at offset {offset} shorter than its header")
    goal, rate, t, d, p = struct.unpack("<IfIII", payload[:head])
    need = head + 4 * (t * d * 3 + t * p * 3)
    if len(payload) != need:
        raise DatasetError(
            f"record at offset {offset} declares {t}x{d}/{p} frames needing "
            f"{need} bytes but carries {len(payload)}")
    kp_bytes = 4 * t * d * 3
    kps = np.frombuffer(payload[head:head + kp_bytes], "<f4").reshape(t, d, 3)
    clouds = np.frombuffer(payload[head + kp_bytes:], "<f4").reshape(t, p, 3)
    return TrajectoryRecord(goal=int(goal), keypoints=kps.copy(),
                            clouds=clouds.copy(), frame_rate=float(rate))


def iter_dataset(path):
    """Stream records one at a time without loading the whole file."""
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(len(MAGIC))
        if magic != MAGIC:
            raise DatasetError(
                f"bad magic {magic!r} at offset 0 (expected {MAGIC!r})")
        version, count = struct.unpack("<II", _read_exact(f, 8, "header"))
        if version != VERSION:
            raise DatasetError(f"unsupported dataset version {version}")
        for i in range(count):
            at = f.tell()
            (length,) = struct.unpack(
                "<I", _read_exact(f, 4, f"length of record {i}"))
            payload = _read_exact(f, length, f"record {i}")
            yield _decode_record(payload, at)
        trailing = f.read(1)
        if trailing:
            raise DatasetError(
                f"unexpected trailing bytes at offset {f.tell() - 1}")


def read_dataset(path) -> list[TrajectoryRecord]:
    return list(iter_dataset(path))
