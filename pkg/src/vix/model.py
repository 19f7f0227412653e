"""Classifier assembly: configs, parameter manifests, initialization, forward pass.

Encoder layers are pre-norm: ``x + mix(LN(x))`` then ``x + MLP(LN(x))``. The head
applies a final LayerNorm, pools (class token, or token mean for MLP-mixer
models), and projects to class logits.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from . import tensor as T
from .embeddings import (
    EmbeddingConfig,
    EmbeddingKind,
    PositionConfig,
    PositionKind,
    add_learnable_pos,
    embed_tokens,
    embedding_param_specs,
    prepend_class_token,
)
from .errors import ConfigError, DimensionError
from .mixers import ATTENTION_KINDS, MixerConfig, MixerKind, feedforward, mix, mixer_param_specs
from .params import ParamSpec, init_params, linear_specs, norm_specs, prefix_specs, subtree
from .tensor import Tensor


@dataclass(frozen=True)
class ModelConfig:
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    position: PositionConfig = field(default_factory=PositionConfig)
    mixer: MixerConfig = field(default_factory=MixerConfig)
    depth: int = 4
    mlp_dim: int = 256
    num_classes: int = 10
    image_shape: tuple[int, int, int] = (3, 32, 32)
    dropout: float = 0.0
    norm_eps: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "image_shape", tuple(int(s) for s in self.image_shape))
        if len(self.image_shape) != 3 or min(self.image_shape) < 1:
            raise ConfigError(f"model.image_shape must be (C, H, W) with positive extents, got {self.image_shape}")
        for name in ("depth", "mlp_dim", "num_classes"):
            if getattr(self, name) < 1:
                raise ConfigError(f"model.{name} must be a positive integer")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"model.dropout must lie in [0, 1), got {self.dropout}")
        if self.embedding.dim != self.mixer.dim:
            raise ConfigError(f"embedding dim {self.embedding.dim} != mixer dim {self.mixer.dim}")
        _, h, w = self.image_shape
        gh, gw = self.embedding.grid(h, w)
        n = gh * gw + int(self.class_token)
        if self.mixer.seq_len is None:
            object.__setattr__(self, "mixer", dataclasses.replace(self.mixer, seq_len=n))
        elif self.mixer.seq_len != n:
            raise ConfigError(f"mixer bound to sequence length {self.mixer.seq_len}, model produces {n}")
        pos = self.position
        if pos.has_table:
            if pos.max_len is None:
                object.__setattr__(self, "position", dataclasses.replace(pos, max_len=n))
            elif pos.max_len < n:
                raise ConfigError(f"position.max_len {pos.max_len} < sequence length {n}")
        if pos.kind is PositionKind.ROPE:
            if self.mixer.kind not in ATTENTION_KINDS:
                raise ConfigError(f"rope needs an attention mixer, got {self.mixer.kind.value}")
            if self.mixer.head_dim % 2:
                raise ConfigError(f"rope needs an even head dim, got {self.mixer.head_dim}")
        if self.mixer.kind is MixerKind.NYSTROM and self.mixer.landmarks > n:
            raise ConfigError(f"nystrom landmarks {self.mixer.landmarks} exceed sequence length {n}")

    @property
    def dim(self) -> int:
        return self.embedding.dim

    @property
    def class_token(self) -> bool:
        return self.mixer.kind is not MixerKind.MLPMIX

    @property
    def num_tokens(self) -> int:
        gh, gw = self.embedding.grid(*self.image_shape[1:])
        return gh * gw

    @property
    def seq_len(self) -> int:
        return self.num_tokens + int(self.class_token)

    # -- serialization ---------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        return _plain(dataclasses.asdict(self))

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ModelConfig":
        d = dict(d)
        emb = dict(d.pop("embedding", {}))
        if "stem_channels" in emb:
            emb["stem_channels"] = tuple(emb["stem_channels"])
        return cls(
            embedding=EmbeddingConfig(**emb),
            position=PositionConfig(**d.pop("position", {})),
            mixer=MixerConfig(**d.pop("mixer", {})),
            **{k: tuple(v) if k == "image_shape" else v for k, v in d.items()},
        )

    def digest(self) -> bytes:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).digest()


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "value") and isinstance(obj, str):
        return obj.value
    return obj


# --------------------------------------------------------------------------
# parameter manifest
# --------------------------------------------------------------------------

def model_param_specs(cfg: ModelConfig) -> list[ParamSpec]:
    d = cfg.dim
    specs = prefix_specs("embed.", embedding_param_specs(cfg.embedding, cfg.image_shape[0]))
    if cfg.class_token:
        specs.append(ParamSpec("cls_token", (d,), "zeros", registered=False))
    if cfg.position.has_table:
        specs.append(ParamSpec("pos_table", (cfg.position.max_len, d), registered=False))
    mixer_specs = mixer_param_specs(cfg.mixer)
    for i in range(cfg.depth):
        p = f"layers.{i}."
        specs += prefix_specs(p, norm_specs("norm1", d))
        specs += prefix_specs(p + "mixer.", mixer_specs)
        specs += prefix_specs(p, norm_specs("norm2", d))
        specs += prefix_specs(p + "mlp.", linear_specs("fc1", d, cfg.mlp_dim) + linear_specs("fc2", cfg.mlp_dim, d))
    specs += prefix_specs("head.", norm_specs("norm", d) + linear_specs("fc", d, cfg.num_classes))
    return specs


@dataclass(frozen=True)
class ManifestEntry:
    name: str
    shape: tuple[int, ...]
    count: int
    registered: bool = True


@dataclass
class ParameterManifest:
    entries: list[ManifestEntry]
    ledger: list[dict[str, Any]] = field(default_factory=list)

    @property
    def total(self) -> int:
        return sum(e.count for e in self.entries)

    @property
    def registered_total(self) -> int:
        """Count under the reference convention: layer-owned parameters only."""
        return sum(e.count for e in self.entries if e.registered)

    @property
    def unregistered(self) -> list[ManifestEntry]:
        return [e for e in self.entries if not e.registered]

    def subtotal(self, prefix: str = "", contains: str | None = None) -> int:
        return sum(
            e.count for e in self.entries
            if e.name.startswith(prefix) and (contains is None or contains in e.name)
        )

    @property
    def mixer_total(self) -> int:
        return self.subtotal("layers.", ".mixer.")

    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def to_dict(self) -> dict[str, Any]:
        return {
            "entries": [
                {"name": e.name, "shape": list(e.shape), "count": e.count, "registered": e.registered}
                for e in self.entries
            ],
            "total": self.total,
            "registered_total": self.registered_total,
            "ledger": self.ledger,
        }


def convention_ledger(cfg: ModelConfig) -> list[dict[str, Any]]:
    """Every layout choice that moves the parameter count, with its contribution."""
    d, L, m = cfg.dim, cfg.depth, cfg.mixer
    ledger: list[dict[str, Any]] = []

    def add(key, value, params, note, within=None):
        row = {"key": key, "value": value, "params": int(params), "note": note}
        if within:
            row["within"] = within  # breakdown of an earlier row, not additive
        ledger.append(row)

    emb = cfg.embedding
    if emb.kind is EmbeddingKind.LINEAR_PATCH:
        c = cfg.image_shape[0] * emb.patch_size**2
        add("embedding.kind", "linear_patch", c * d + d, f"dense {c}->{d} with bias")
    else:
        n = sum(s.count for s in embedding_param_specs(emb, cfg.image_shape[0]))
        add("embedding.kind", "conv_stem", n, f"3x3 convs {list(emb.stem_channels)} with bias, ReLU between")
    add("class_token", cfg.class_token, d if cfg.class_token else 0,
        "bare tensor; excluded from the registered count")
    pos = cfg.position
    table = pos.max_len * d if pos.has_table else 0
    add("position.kind", pos.kind.value, table,
        "learnable table is a bare tensor, excluded from the registered count" if table else "no learnable entries")
    add("encoder.norm_placement", "pre-norm", L * 4 * d, "two LayerNorms (gamma, beta) per layer")
    add("encoder.mlp", f"{d}->{cfg.mlp_dim}->{d}", L * (2 * d * cfg.mlp_dim + cfg.mlp_dim + d), "dense layers with bias, GELU")
    add("head", "final LayerNorm + dense", 2 * d + d * cfg.num_classes + cfg.num_classes,
        "class-token pooling" if cfg.class_token else "mean pooling")
    per_layer = sum(s.count for s in mixer_param_specs(m))
    add("mixer.kind", m.kind.value, L * per_layer, "all mixer-owned entries")
    if m.kind in ATTENTION_KINDS:
        add("attention.head_dim", m.head_dim, 0, f"{m.heads} heads x {m.head_dim} = model dim", within="mixer.kind")
        qkv_bias = sum(
            s.count for s in mixer_param_specs(m) if s.name.endswith(".bias") and s.name[:4] in ("to_q", "to_k", "to_v")
        )
        add("attention.qkv_bias", m.qkv_bias, L * qkv_bias, "biases on Q/K/V projections", within="mixer.kind")
        add("attention.out_bias", True, L * d, "bias on the output projection", within="mixer.kind")
    if m.kind is MixerKind.LINFORMER:
        add("linformer.one_kv_head", m.one_kv_head, 0, f"K/V projection width {m.kv_dim}", within="mixer.kind")
        add("linformer.share_kv", m.share_kv, 0,
            "values reuse the key projection" if m.share_kv else "separate value projection", within="mixer.kind")
        add("linformer.proj_e", [m.seq_len, m.proj_rank], L * m.seq_len * m.proj_rank,
            "one E per layer shared by K and V; bare tensor, excluded from the registered count", within="mixer.kind")
    if m.kind is MixerKind.NYSTROM:
        add("nystrom.residual_conv_kernel", m.residual_conv_kernel, L * m.heads * m.residual_conv_kernel,
            "depthwise sequence conv on V per head, no bias", within="mixer.kind")
    if m.kind is MixerKind.MLPMIX:
        add("mlpmix.token_mlp_dim", m.token_mlp_dim, 0, f"token MLP {m.seq_len}->{m.token_mlp_dim}->{m.seq_len}", within="mixer.kind")
    return ledger


def count_params(cfg: ModelConfig) -> ParameterManifest:
    """Manifest from the config alone; nothing is allocated."""
    entries = [ManifestEntry(s.name, s.shape, s.count, s.registered) for s in model_param_specs(cfg)]
    return ParameterManifest(entries, convention_ledger(cfg))


# --------------------------------------------------------------------------
# model
# --------------------------------------------------------------------------

@dataclass
class Model:
    config: ModelConfig
    params: dict[str, Tensor]
    seed: int = 0

    def manifest(self) -> ParameterManifest:
        registered = {s.name: s.registered for s in model_param_specs(self.config)}
        entries = [
            ManifestEntry(name, tuple(t.shape), t.size, registered.get(name, True))
            for name, t in self.params.items()
        ]
        return ParameterManifest(entries, convention_ledger(self.config))

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def __call__(self, images, rng: np.random.Generator | None = None) -> Tensor:
        return forward(self, images, rng)


def build_model(cfg: ModelConfig, seed: int = 0) -> Model:
    """Initialize parameters deterministically from ``seed`` in manifest order."""
    return Model(cfg, init_params(model_param_specs(cfg), seed), seed)


def forward(model: Model, images, rng: np.random.Generator | None = None) -> Tensor:
    """Logits ``[B, num_classes]``. Dropout is active only when ``rng`` is given."""
    cfg = model.config
    p = model.params
    x = T.as_tensor(images)
    if x.ndim != 4 or tuple(x.shape[1:]) != cfg.image_shape:
        raise DimensionError(f"expected images [B, {', '.join(map(str, cfg.image_shape))}], got {x.shape}")
    drop = cfg.dropout if rng is not None else 0.0
    x = embed_tokens(x, subtree(p, "embed."), cfg.embedding)
    if cfg.class_token:
        x = prepend_class_token(x, p["cls_token"])
    if cfg.position.has_table:
        x = add_learnable_pos(x, p["pos_table"])
    x = T.dropout(x, drop, rng)
    rope_base = cfg.position.rope_base if cfg.position.kind is PositionKind.ROPE else None
    for i in range(cfg.depth):
        lp = subtree(p, f"layers.{i}.")
        h = T.layer_norm(x, lp["norm1.gamma"], lp["norm1.beta"], cfg.norm_eps)
        h = mix(h, cfg.mixer, subtree(lp, "mixer."), rope_base)
        x = x + T.dropout(h, drop, rng)
        h = T.layer_norm(x, lp["norm2.gamma"], lp["norm2.beta"], cfg.norm_eps)
        h = feedforward(h, subtree(lp, "mlp."))
        x = x + T.dropout(h, drop, rng)
        del h
    x = T.layer_norm(x, p["head.norm.gamma"], p["head.norm.beta"], cfg.norm_eps)
    pooled = T.getitem(x, (slice(None), 0)) if cfg.class_token else T.mean(x, axis=1)
    return T.linear(pooled, p["head.fc.weight"], p["head.fc.bias"])


def predict(model: Model, images: np.ndarray, batch_size: int = 64) -> np.ndarray:
    out = []
    with T.no_grad():
        for i in range(0, len(images), batch_size):
            out.append(forward(model, Tensor(images[i : i + batch_size])).data)
    return np.concatenate(out, axis=0)
