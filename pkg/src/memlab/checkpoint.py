"""Binary checkpoint container: JSON header plus checksummed parameter blobs.

Layout (all integers little-endian):

    magic  b"MEMLABCK"
    u32    format version (1)
    u64    header length in bytes
    bytes  canonical-JSON header {format_version, config, seed, epoch, update,
           optimizer: {beta1, beta2, eps, t} | null}
    u32    blob count
    per blob:
        u16  name length, name utf-8
        u8   dtype code (0 = float32, 1 = float64)
        u8   ndim, then ndim * u64 extents
        u32  crc32 of the raw bytes
        u64  byte length, then the raw little-endian bytes

Blobs are written in sorted-name order so identical states serialize to
identical bytes. Model blobs use their own names; optimizer moments are
stored as ``adam.m.<name>`` / ``adam.v.<name>``.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import CheckpointError
from .model import ModelState, TransformerConfig
from .optim import AdamState
from .tensor import Tensor

MAGIC = b"MEMLABCK"
FORMAT_VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_DTYPE_CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1}


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _write_blob(fh, name: str, arr: np.ndarray):
    raw = np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<")).tobytes()
    nb = name.encode("utf-8")
    fh.write(struct.pack("<H", len(nb)))
    fh.write(nb)
    fh.write(struct.pack("<BB", _DTYPE_CODES[np.dtype(arr.dtype.name)], arr.ndim))
    for ext in arr.shape:
        fh.write(struct.pack("<Q", ext))
    fh.write(struct.pack("<I", zlib.crc32(raw) & 0xFFFFFFFF))
    fh.write(struct.pack("<Q", len(raw)))
    fh.write(raw)


def _read_blob(fh) -> tuple[str, np.ndarray]:
    (nlen,) = struct.unpack("<H", fh.read(2))
    name = fh.read(nlen).decode("utf-8")
    code, ndim = struct.unpack("<BB", fh.read(2))
    shape = tuple(struct.unpack("<Q", fh.read(8))[0] for _ in range(ndim))
    (crc,) = struct.unpack("<I", fh.read(4))
    (nbytes,) = struct.unpack("<Q", fh.read(8))
    raw = fh.read(nbytes)
    if (zlib.crc32(raw) & 0xFFFFFFFF) != crc:
        raise CheckpointError(f"checksum mismatch in blob {name!r}")
    arr = np.frombuffer(raw, dtype=_DTYPES[code]).reshape(shape).copy()
    return name, arr


def save_checkpoint(
    path,
    model: ModelState,
    optimizer: AdamState | None = None,
    epoch: int = 0,
    update: int = 0,
    tokens_processed: int = 0,
):
    path = Path(path)
    header = {
        "format_version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "seed": model.rng_seed,
        "epoch": epoch,
        "update": update,
        "tokens_processed": tokens_processed,
        "optimizer": (
            None
            if optimizer is None
            else {"beta1": optimizer.beta1, "beta2": optimizer.beta2,
                  "eps": optimizer.eps, "t": optimizer.t}
        ),
    }
    blobs: dict[str, np.ndarray] = {n: p.data for n, p in model.params.items()}
    if optimizer is not None:
        for n, a in optimizer.m.items():
            blobs[f"adam.m.{n}"] = a
        for n, a in optimizer.v.items():
            blobs[f"adam.v.{n}"] = a
    hdr = canonical_json(header).encode("utf-8")
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(hdr)))
        fh.write(hdr)
        fh.write(struct.pack("<I", len(blobs)))
        for name in sorted(blobs):
            _write_blob(fh, name, blobs[name])
    tmp.replace(path)


def load_checkpoint(path) -> dict:
    """Returns {model, optimizer, epoch, update, header}; optimizer may be None."""
    path = Path(path)
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise CheckpointError(f"{path}: bad magic")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != FORMAT_VERSION:
            raise CheckpointError(f"{path}: unsupported format version {version}")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        (count,) = struct.unpack("<I", fh.read(4))
        blobs = dict(_read_blob(fh) for _ in range(count))

    config = TransformerConfig.from_dict(header["config"])
    params = {}
    for name in blobs:
        if not name.startswith("adam."):
            params[name] = Tensor(blobs[name], requires_grad=True)
    model = ModelState(
        config=config,
        params=params,
        rng_seed=header["seed"],
        dtype=next(iter(params.values())).data.dtype if params else np.dtype(np.float32),
    )

    optimizer = None
    if header.get("optimizer") is not None:
        o = header["optimizer"]
        optimizer = AdamState(beta1=o["beta1"], beta2=o["beta2"], eps=o["eps"], t=o["t"])
        for name in params:
            optimizer.m[name] = blobs[f"adam.m.{name}"]
            optimizer.v[name] = blobs[f"adam.v.{name}"]

    return {
        "model": model,
        "optimizer": optimizer,
        "epoch": header["epoch"],
        "update": header["update"],
        "tokens_processed": header.get("tokens_processed", 0),
        "header": header,
    }
