"""Binary checkpoints of a perturbation state.

Layout (little-endian): magic ``b"CLMC"``, u32 format version, u32 n1,
u32 n2, f64 time, then the four fields phi, psi1, psi2, theta as
contiguous f64 blocks of shape ``(n1, n2 + 1)`` in row-major order.
"""
from __future__ import annotations

import os
import struct

import numpy as np

from .solver import PerturbationState

MAGIC = b"CLMC"
VERSION = 1
_HEADER = struct.Struct("<4sIIId")
_F64 = np.dtype("<f8")


class CheckpointError(IOError):
    pass


class BadMagicError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class TruncatedPayloadError(CheckpointError):
    pass


def encode(state: PerturbationState) -> bytes:
    n1, m = state.phi.shape
    header = _HEADER.pack(MAGIC, VERSION, n1, m - 1, float(state.time))
    blocks = [np.ascontiguousarray(f, dtype=_F64).tobytes() for f in state.fields()]
    return header + b"".join(blocks)


def decode(data: bytes) -> PerturbationState:
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagicError(f"bad magic: expected {MAGIC!r}, found {bytes(data[:4])!r}")
    if len(data) < _HEADER.size:
        raise TruncatedPayloadError(
            f"truncated payload: header needs {_HEADER.size} bytes, file has {len(data)}")
    _, version, n1, n2, time = _HEADER.unpack_from(data)
    if version != VERSION:
        raise VersionMismatchError(
            f"version mismatch: file has {version}, reader supports {VERSION}")
    count = n1 * (n2 + 1)
    need = _HEADER.size + 4 * count * _F64.itemsize
    if len(data) < need:
        raise TruncatedPayloadError(
            f"truncated payload: expected {need} bytes, found {len(data)}")
    if len(data) > need:
        raise CheckpointError(
            f"trailing bytes after payload: expected {need} bytes, found {len(data)}")
    flat = np.frombuffer(data, dtype=_F64, offset=_HEADER.size)
    arr = flat.reshape(4, n1, n2 + 1).astype(float)
    return PerturbationState.from_array(arr, time)


def write_checkpoint(state: PerturbationState, path) -> None:
    """Write atomically: a reader never sees a half-written file."""
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(encode(state))
    os.replace(tmp, path)


def read_checkpoint(path) -> PerturbationState:
    with open(path, "rb") as fh:
        return decode(fh.read())
