"""Binary checkpoint format shared by models and the sentiment classifier.

Layout (all integers little-endian uint32)::

    b"CTGN" | version | header_len | header (UTF-8 JSON) | n_params
    then per parameter: name_len | name | rank | dim * rank | float32 data

The JSON header carries the architecture so a checkpoint can be rebuilt
without extra flags.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"CTGN"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, header: dict, params: dict[str, np.ndarray]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    chunks = [MAGIC, struct.pack("<II", VERSION, len(head)), head, struct.pack("<I", len(params))]
    for name, arr in params.items():
        nb = name.encode("utf-8")
        arr = np.asarray(arr)
        chunks.append(struct.pack("<I", len(nb)))
        chunks.append(nb)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(b"".join(chunks))
    tmp.replace(path)


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    buf = Path(path).read_bytes()
    if buf[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    version, head_len = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    pos = 12
    header = json.loads(buf[pos : pos + head_len].decode("utf-8"))
    pos += head_len
    (n,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    params: dict[str, np.ndarray] = {}
    for _ in range(n):
        (nl,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        name = buf[pos : pos + nl].decode("utf-8")
        pos += nl
        (rank,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        shape = struct.unpack_from(f"<{rank}I", buf, pos)
        pos += 4 * rank
        count = int(np.prod(shape)) if rank else 1
        params[name] = np.frombuffer(buf, dtype="<f4", count=count, offset=pos).reshape(shape).copy()
        pos += 4 * count
    if pos != len(buf):
        raise CheckpointError(f"{path}: {len(buf) - pos} trailing bytes")
    return header, params
