"""Model checkpoint (.sknamodel): JSON arch descriptor + float32 blob + CRC."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..container import read_container, write_container
from ..errors import ShapeError
from .arch import ArchSpec
from .model import ModelParams

MAGIC = b"SKNAMDL\x00"
VERSION = 1


def save_checkpoint(params: ModelParams, path, extra: dict | None = None) -> None:
    """Write params plus any extra JSON payload (norm stats, class names...)."""
    order = params.names()
    meta = {
        "arch": params.arch.to_json(),
        "tensor_order": order,
        "tensor_shapes": {k: list(params.tensors[k].shape) for k in order},
        "extra": extra or {},
    }
    blob = b"".join(
        np.ascontiguousarray(params.tensors[k], dtype="<f4").tobytes() for k in order
    )
    write_container(path, MAGIC, VERSION, meta, blob)


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    """Read a checkpoint; returns (params, extra)."""
    meta, blob = read_container(Path(path), MAGIC, VERSION)
    arch = ArchSpec.from_json(meta["arch"])
    flat = np.frombuffer(blob, dtype="<f4")
    tensors: dict[str, np.ndarray] = {}
    off = 0
    for name in meta["tensor_order"]:
        shape = tuple(meta["tensor_shapes"][name])
        size = int(np.prod(shape))
        if off + size > flat.size:
            raise ShapeError(f"{path}: parameter blob shorter than declared shapes")
        tensors[name] = flat[off : off + size].reshape(shape).copy()
        off += size
    if off != flat.size:
        raise ShapeError(f"{path}: {flat.size - off} unexpected trailing floats")
    return ModelParams(arch=arch, tensors=tensors), meta.get("extra", {})
