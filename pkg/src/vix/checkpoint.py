"""Versioned binary checkpoint container.

Layout (all integers little-endian)::

    b"VIXF" | u32 version | 32-byte sha256 config digest | u32 entry count
    entry*: u32 name length | name (utf-8) | u32 ndim | u64 extent * ndim | f64 * prod(shape)

Model parameters come first in manifest order, then optimizer moments under
``adam.m/<name>`` and ``adam.v/<name>``, the step counter as ``adam.step``, and the
data standardization constants as ``data.mean`` / ``data.std``.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CheckpointError
from .model import Model, ModelConfig, build_model
from .training import AdamState

MAGIC = b"VIXF"
VERSION = 1
_LE_F64 = np.dtype("<f8")


@dataclass
class Checkpoint:
    params: dict[str, np.ndarray]
    adam: AdamState | None = None
    data_mean: np.ndarray | None = None
    data_std: np.ndarray | None = None


def _entries(model: Model, adam: AdamState | None, mean, std) -> list[tuple[str, np.ndarray]]:
    out = [(name, t.data) for name, t in model.params.items()]
    if adam is not None:
        for name in model.params:
            if name in adam.m:
                out.append((f"adam.m/{name}", adam.m[name]))
                out.append((f"adam.v/{name}", adam.v[name]))
        out.append(("adam.step", np.array(float(adam.step))))
    if mean is not None:
        out.append(("data.mean", np.asarray(mean, dtype=float)))
        out.append(("data.std", np.asarray(std, dtype=float)))
    return out


def encode(model: Model, adam: AdamState | None = None, mean=None, std=None) -> bytes:
    buf = io.BytesIO()
    entries = _entries(model, adam, mean, std)
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    buf.write(model.config.digest())
    buf.write(struct.pack("<I", len(entries)))
    for name, arr in entries:
        raw = name.encode("utf-8")
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<I", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        buf.write(np.ascontiguousarray(arr, dtype=_LE_F64).tobytes())
    return buf.getvalue()


def save(path, model: Model, adam: AdamState | None = None, mean=None, std=None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(encode(model, adam, mean, std))
    tmp.replace(path)


class _Reader:
    def __init__(self, blob: bytes, source: str):
        self.blob, self.pos, self.source = blob, 0, source

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise CheckpointError(f"{self.source}: truncated at byte {self.pos} (needed {n} more)")
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def decode(blob: bytes, config: ModelConfig, source: str = "<checkpoint>") -> Checkpoint:
    r = _Reader(blob, source)
    if r.take(4) != MAGIC:
        raise CheckpointError(f"{source}: not a checkpoint (bad magic)")
    version = r.u32()
    if version != VERSION:
        raise CheckpointError(f"{source}: unsupported format version {version}")
    digest = r.take(32)
    if digest != config.digest():
        raise CheckpointError(f"{source}: config digest mismatch; checkpoint was written for a different model config")
    count = r.u32()
    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        name = r.take(r.u32()).decode("utf-8")
        ndim = r.u32()
        shape = struct.unpack(f"<{ndim}Q", r.take(8 * ndim))
        n = int(np.prod(shape)) if ndim else 1
        arrays[name] = np.frombuffer(r.take(8 * n), dtype=_LE_F64).astype(float).reshape(shape)
    if r.pos != len(blob):
        raise CheckpointError(f"{source}: {len(blob) - r.pos} trailing bytes after the last entry")
    params = {k: v for k, v in arrays.items() if not k.startswith(("adam.", "data."))}
    adam = None
    if "adam.step" in arrays:
        adam = AdamState(
            step=int(arrays["adam.step"]),
            m={k[len("adam.m/"):]: v for k, v in arrays.items() if k.startswith("adam.m/")},
            v={k[len("adam.v/"):]: v for k, v in arrays.items() if k.startswith("adam.v/")},
        )
    return Checkpoint(params, adam, arrays.get("data.mean"), arrays.get("data.std"))


def load(path, config: ModelConfig) -> Checkpoint:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint not found: {path}") from None
    return decode(blob, config, str(path))


def restore(path, config: ModelConfig) -> tuple[Model, Checkpoint]:
    """Build a model for ``config`` and overwrite its parameters from ``path``."""
    ckpt = load(path, config)
    model = build_model(config)
    missing = set(model.params) - set(ckpt.params)
    extra = set(ckpt.params) - set(model.params)
    if missing or extra:
        raise CheckpointError(f"{path}: manifest mismatch (missing {sorted(missing)}, unexpected {sorted(extra)})")
    for name, t in model.params.items():
        if t.shape != ckpt.params[name].shape:
            raise CheckpointError(f"{path}: {name} has shape {ckpt.params[name].shape}, expected {t.shape}")
        t.data = ckpt.params[name].copy()
    return model, ckpt
