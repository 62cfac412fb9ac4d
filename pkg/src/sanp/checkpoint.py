"""Binary checkpoint files.

Layout (all integers little-endian uint64, values little-endian float32)::

    b"SANP1"
    n_entries
    n_entries x [name_len, name bytes (utf-8), rank, shape[rank], values]
    n_adam_entries
    n_adam_entries x [same entry layout]

The second section holds the Adam moments as ``adam.m.<name>`` and
``adam.v.<name>`` plus a rank-1 ``adam.step`` entry. Writes go to a temporary
file that is renamed into place, so an interrupted write never leaves a
truncated checkpoint behind.
"""

from __future__ import annotations

import io
import os
import struct
import tempfile
from typing import BinaryIO, Dict, Mapping, Optional, Tuple

import numpy as np

from .autodiff import AdamState

MAGIC = b"SANP1"
_U64 = struct.Struct("<Q")


class CheckpointError(ValueError):
    """Checkpoint file is malformed."""


def _write_section(fh: BinaryIO, entries: Mapping[str, np.ndarray]) -> None:
    fh.write(_U64.pack(len(entries)))
    for name, arr in entries.items():
        raw = name.encode("utf-8")
        arr = np.asarray(arr)
        fh.write(_U64.pack(len(raw)))
        fh.write(raw)
        fh.write(_U64.pack(arr.ndim))
        for d in arr.shape:
            fh.write(_U64.pack(d))
        fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def _read_u64(buf: memoryview, pos: int) -> Tuple[int, int]:
    if pos + 8 > len(buf):
        raise CheckpointError(f"truncated checkpoint at offset {pos}")
    return _U64.unpack_from(buf, pos)[0], pos + 8


def _read_section(buf: memoryview, pos: int) -> Tuple[Dict[str, np.ndarray], int]:
    n, pos = _read_u64(buf, pos)
    out: Dict[str, np.ndarray] = {}
    for _ in range(n):
        ln, pos = _read_u64(buf, pos)
        if pos + ln > len(buf):
            raise CheckpointError(f"truncated name at offset {pos}")
        try:
            name = bytes(buf[pos:pos + ln]).decode("utf-8")
        except UnicodeDecodeError:
            raise CheckpointError(f"entry name at offset {pos} is not UTF-8") from None
        pos += ln
        rank, pos = _read_u64(buf, pos)
        if rank > 8:
            raise CheckpointError(f"entry {name!r} declares rank {rank}")
        shape = []
        for _ in range(rank):
            d, pos = _read_u64(buf, pos)
            shape.append(d)
        count = int(np.prod(shape)) if shape else 1
        nbytes = 4 * count
        if pos + nbytes > len(buf):
            raise CheckpointError(f"truncated values for {name!r} at offset {pos}")
        vals = np.frombuffer(buf[pos:pos + nbytes], dtype="<f4").astype(np.float32).reshape(shape)
        pos += nbytes
        out[name] = vals
    return out, pos


def atomic_write_bytes(path: str, payload: bytes) -> None:
    """Write ``payload`` to ``path`` through a temporary file and rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_checkpoint(params: Mapping[str, np.ndarray], adam: Optional[AdamState] = None) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    _write_section(buf, params)
    adam_entries: Dict[str, np.ndarray] = {}
    if adam is not None:
        for k in adam.m:
            adam_entries[f"adam.m.{k}"] = adam.m[k]
        for k in adam.v:
            adam_entries[f"adam.v.{k}"] = adam.v[k]
        adam_entries["adam.step"] = np.array([adam.step], dtype=np.float32)
    _write_section(buf, adam_entries)
    return buf.getvalue()


def save_checkpoint(path: str, params: Mapping[str, np.ndarray], adam: Optional[AdamState] = None) -> None:
    atomic_write_bytes(path, encode_checkpoint(params, adam))


def load_checkpoint(path: str) -> Tuple[Dict[str, np.ndarray], Optional[AdamState]]:
    """Read a checkpoint.

    Returns:
        ``(entries, adam_state)``; ``adam_state`` is None when the file stored
        no optimiser section. Adam hyperparameters are not stored and come back
        as defaults.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(MAGIC):
        raise CheckpointError(f"{path}: missing SANP1 magic")
    buf = memoryview(data)
    params, pos = _read_section(buf, len(MAGIC))
    extra, pos = _read_section(buf, pos)
    if pos != len(buf):
        raise CheckpointError(f"{path}: {len(buf) - pos} trailing bytes")
    adam = None
    if extra:
        m = {k[len("adam.m."):]: v for k, v in extra.items() if k.startswith("adam.m.")}
        v = {k[len("adam.v."):]: a for k, a in extra.items() if k.startswith("adam.v.")}
        step = int(extra["adam.step"][0]) if "adam.step" in extra else 0
        adam = AdamState(m, v, step)
    return params, adam
