"""Checkpoint files: magic "CLPF", u32 version, length-prefixed JSON header
(hyperparams plus ordered parameter names/shapes), then little-endian f32
parameter blobs in header order.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from ..errors import ParseError

MAGIC = b"CLPF"
VERSION = 1


def save_checkpoint(path, hyperparams: dict, params: dict[str, np.ndarray]):
    """Write atomically: temp file in the target directory, rename on success."""
    path = Path(path)
    header = {
        "hyperparams": hyperparams,
        "params": [{"name": k, "shape": list(v.shape)} for k, v in params.items()],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<I", VERSION))
            f.write(struct.pack("<I", len(header_bytes)))
            f.write(header_bytes)
            for v in params.values():
                f.write(np.ascontiguousarray(v, dtype="<f4").tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise ParseError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        (version,) = struct.unpack("<I", f.read(4))
        if version != VERSION:
            raise ParseError(f"{path}: unsupported checkpoint version {version}")
        (hlen,) = struct.unpack("<I", f.read(4))
        try:
            header = json.loads(f.read(hlen).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ParseError(f"{path}: corrupt header: {e}") from e
        params = {}
        for entry in header["params"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = f.read(count * 4)
            if len(buf) != count * 4:
                raise ParseError(f"{path}: truncated blob for parameter '{entry['name']}'")
            params[entry["name"]] = np.frombuffer(buf, dtype="<f4").reshape(shape).astype(np.float32)
        trailing = f.read(1)
        if trailing:
            raise ParseError(f"{path}: trailing bytes after parameter blobs")
    return header["hyperparams"], params
