"""Model file: ``GDP1`` magic, uint32 format version, uint64-length-prefixed
JSON metadata, then raw little-endian float64 parameter blocks in the order
listed under ``params`` in the metadata."""

from __future__ import annotations

import json
import struct
from typing import Any, BinaryIO

import numpy as np

from gazedep.errors import ModelFileError
from gazedep.nn.model import Hyperparams, Tagger, Vocabs

MAGIC = b"GDP1"
FORMAT_VERSION = 1


def dump(model: Tagger, fh: BinaryIO, extra: dict[str, Any] | None = None) -> None:
    meta = {
        "format_version": FORMAT_VERSION,
        "hyperparams": model.hp.to_dict(),
        "seed": model.seed,
        "vocabs": model.vocabs.to_dict(),
        "params": [[name, list(p.shape)] for name, p in model.params.items()],
        "extra": extra or {},
    }
    blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    fh.write(MAGIC)
    fh.write(struct.pack("<IQ", FORMAT_VERSION, len(blob)))
    fh.write(blob)
    for p in model.params.values():
        fh.write(np.ascontiguousarray(p.data, dtype="<f8").tobytes())


def load(fh: BinaryIO) -> tuple[Tagger, dict[str, Any]]:
    if fh.read(4) != MAGIC:
        raise ModelFileError("not a model file (bad magic bytes)")
    header = fh.read(12)
    if len(header) != 12:
        raise ModelFileError("truncated model header")
    version, n = struct.unpack("<IQ", header)
    if version != FORMAT_VERSION:
        raise ModelFileError(f"unsupported model format version {version}")
    blob = fh.read(n)
    if len(blob) != n:
        raise ModelFileError("truncated model metadata")
    try:
        meta = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFileError(f"corrupt model metadata: {exc}") from None
    model = Tagger(Hyperparams.from_dict(meta["hyperparams"]), Vocabs.from_dict(meta["vocabs"]), meta["seed"])
    declared = [(name, tuple(shape)) for name, shape in meta["params"]]
    actual = [(name, p.shape) for name, p in model.params.items()]
    if declared != actual:
        raise ModelFileError("parameter layout does not match the model description")
    for name, shape in declared:
        size = int(np.prod(shape)) * 8
        buf = fh.read(size)
        if len(buf) != size:
            raise ModelFileError(f"truncated parameter block {name!r}")
        model.params[name].data = np.frombuffer(buf, dtype="<f8").astype(np.float64).reshape(shape)
    if fh.read(1):
        raise ModelFileError("trailing bytes after parameter blocks")
    return model, meta["extra"]


def save_path(model: Tagger, path: str, extra: dict[str, Any] | None = None) -> None:
    with open(path, "wb") as fh:
        dump(model, fh, extra)


def load_path(path: str) -> tuple[Tagger, dict[str, Any]]:
    with open(path, "rb") as fh:
        return load(fh)
