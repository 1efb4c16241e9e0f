"""GEON checkpoint files.

Layout (little-endian): magic ``GEON``, u32 version, u32 tensor count, then
per tensor: u32 name length, UTF-8 name, u32 rank, u32 dims, float32 data.

Besides the model state, three metadata tensors are written:
``meta.arch`` (architecture string as byte codes), ``meta.input_size`` and
``meta.preprocess`` (tile rows, tile cols, clip limit, crop fraction).
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..pgm import write_atomic
from .model import GeoNet

MAGIC = b"GEON"
VERSION = 1


class CheckpointError(ValueError):
    pass


def encode_tensors(tensors: dict[str, np.ndarray]) -> bytes:
    out = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        raw = name.encode("utf-8")
        out.append(struct.pack("<I", len(raw)))
        out.append(raw)
        out.append(struct.pack("<I", arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(out)


def decode_tensors(data: bytes) -> dict[str, np.ndarray]:
    if data[:4] != MAGIC:
        raise CheckpointError("bad magic, not a GEON checkpoint")
    try:
        version, count = struct.unpack_from("<II", data, 4)
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        pos, out = 12, {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<I", data, pos)
            pos += 4
            name = data[pos:pos + nlen].decode("utf-8")
            pos += nlen
            (rank,) = struct.unpack_from("<I", data, pos)
            pos += 4
            dims = struct.unpack_from(f"<{rank}I", data, pos)
            pos += 4 * rank
            size = int(np.prod(dims, dtype=np.int64))
            if pos + 4 * size > len(data):
                raise CheckpointError(f"tensor {name!r} truncated")
            out[name] = np.frombuffer(data, dtype="<f4", count=size, offset=pos).reshape(dims).copy()
            pos += 4 * size
    except (struct.error, UnicodeDecodeError) as e:
        raise CheckpointError(f"corrupt checkpoint: {e}") from None
    if pos != len(data):
        raise CheckpointError(f"{len(data) - pos} trailing bytes")
    return out


def model_tensors(model: GeoNet, preprocess=(8, 8, 2.0, 0.7)) -> dict[str, np.ndarray]:
    tensors = dict(model.state_dict())
    tensors["meta.arch"] = np.frombuffer(model.arch.encode("ascii"), dtype=np.uint8).astype(np.float32)
    tensors["meta.input_size"] = np.array([model.input_size, model.input_size], dtype=np.float32)
    tensors["meta.preprocess"] = np.array(preprocess, dtype=np.float32)
    return tensors


def save_checkpoint(path, model: GeoNet, preprocess=(8, 8, 2.0, 0.7)) -> None:
    write_atomic(Path(path), encode_tensors(model_tensors(model, preprocess)))


def load_checkpoint(path) -> tuple[GeoNet, tuple]:
    """Returns ``(model, preprocess)``; the model is float32."""
    path = Path(path)
    try:
        tensors = decode_tensors(path.read_bytes())
    except OSError as e:
        raise CheckpointError(f"{path}: {e}") from e
    except CheckpointError as e:
        raise CheckpointError(f"{path}: {e}") from None
    try:
        arch = bytes(tensors["meta.arch"].astype(np.uint8)).decode("ascii")
        size = int(tensors["meta.input_size"][0])
        pre = tensors["meta.preprocess"]
    except KeyError as e:
        raise CheckpointError(f"{path}: missing metadata tensor {e}") from None
    model = GeoNet(arch, size)
    model.load_state_dict(tensors)
    # undo float32 rounding of the crop fraction / clip limit
    preprocess = (int(pre[0]), int(pre[1]), round(float(pre[2]), 6), round(float(pre[3]), 6))
    return model, preprocess
