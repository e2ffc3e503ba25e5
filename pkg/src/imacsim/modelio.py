"""On-disk containers: binary +/-1 parameter files and training checkpoints.

Parameter container layout (little-endian):

    magic   b"IMAC"
    version u8 (currently 1)
    count   u32 number of layers
    per layer:
        m u32, n u32
        weight bitplane: ceil(m*n/8) bytes, row-major, bit 1 -> +1
        bias bitplane:   ceil(m/8) bytes

Checkpoints additionally carry the real-valued teacher parameters and
are stored as a compressed npz with a format-version entry.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .network import TrainedParameters

MAGIC = b"IMAC"
VERSION = 1
CHECKPOINT_VERSION = 1


class FormatError(ValueError):
    """Corrupt or unsupported container file."""


def _pack_plane(values: np.ndarray) -> bytes:
    bits = (values.reshape(-1) > 0).astype(np.uint8)
    return np.packbits(bits).tobytes()


def _unpack_plane(data: bytes, count: int) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), count=count)
    return np.where(bits > 0, 1, -1).astype(np.int8)


def save_params(path, params: TrainedParameters) -> None:
    chunks = [MAGIC, struct.pack("<BI", VERSION, len(params.weights))]
    for w, b in zip(params.weights, params.biases):
        m, n = w.shape
        chunks.append(struct.pack("<II", m, n))
        chunks.append(_pack_plane(w))
        chunks.append(_pack_plane(b))
    Path(path).write_bytes(b"".join(chunks))


def load_params(path) -> TrainedParameters:
    data = Path(path).read_bytes()
    if len(data) < 9 or data[:4] != MAGIC:
        raise FormatError(f"{path}: not a parameter container (bad magic)")
    version, count = struct.unpack_from("<BI", data, 4)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported container version {version}")
    offset = 9
    weights, biases = [], []
    for i in range(count):
        if offset + 8 > len(data):
            raise FormatError(f"{path}: truncated at layer {i} header")
        m, n = struct.unpack_from("<II", data, offset)
        offset += 8
        w_bytes = (m * n + 7) // 8
        b_bytes = (m + 7) // 8
        if offset + w_bytes + b_bytes > len(data):
            raise FormatError(f"{path}: truncated at layer {i} payload")
        weights.append(_unpack_plane(data[offset:offset + w_bytes], m * n).reshape(m, n))
        offset += w_bytes
        biases.append(_unpack_plane(data[offset:offset + b_bytes], m))
        offset += b_bytes
    if offset != len(data):
        raise FormatError(f"{path}: {len(data) - offset} trailing bytes")
    return TrainedParameters(weights=weights, biases=biases)


def save_checkpoint(path, teacher_weights, teacher_biases, params: TrainedParameters) -> None:
    """Teacher reals plus the binarized snapshot, in one versioned file."""
    payload = {"format_version": np.array(CHECKPOINT_VERSION)}
    payload["layer_count"] = np.array(len(params.weights))
    for i, (tw, tb, w, b) in enumerate(
        zip(teacher_weights, teacher_biases, params.weights, params.biases)
    ):
        payload[f"teacher_w{i}"] = np.asarray(tw, dtype=np.float64)
        payload[f"teacher_b{i}"] = np.asarray(tb, dtype=np.float64)
        payload[f"student_w{i}"] = w
        payload[f"student_b{i}"] = b
    np.savez_compressed(path, **payload)


def load_checkpoint(path):
    with np.load(path) as data:
        if "format_version" not in data or int(data["format_version"]) != CHECKPOINT_VERSION:
            raise FormatError(f"{path}: unsupported checkpoint version")
        count = int(data["layer_count"])
        teacher_w = [data[f"teacher_w{i}"] for i in range(count)]
        teacher_b = [data[f"teacher_b{i}"] for i in range(count)]
        student = TrainedParameters(
            weights=[data[f"student_w{i}"] for i in range(count)],
            biases=[data[f"student_b{i}"] for i in range(count)],
        )
    return teacher_w, teacher_b, student
