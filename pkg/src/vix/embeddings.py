"""Image-to-token embedding: patch or conv-stem embedding, class token, positions.

Token order is row-major over the spatial grid for both embedding kinds, so a
stride-1 conv stem and ``patchify(p=1)`` enumerate pixels identically.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping

import numpy as np

from . import tensor as T
from .errors import ConfigError, DimensionError
from .params import ParamSpec, linear_specs
from .tensor import Tensor


class EmbeddingKind(str, Enum):
    LINEAR_PATCH = "linear_patch"
    CONV_STEM = "conv_stem"


class PositionKind(str, Enum):
    LEARNABLE_1D = "learnable1d"
    ROPE = "rope"
    NONE = "none"


def _coerce(enum, value, field_name: str):
    try:
        return enum(value)
    except ValueError:
        choices = ", ".join(e.value for e in enum)
        raise ConfigError(f"unknown {field_name} {value!r}; expected one of: {choices}") from None


@dataclass(frozen=True)
class EmbeddingConfig:
    kind: EmbeddingKind = EmbeddingKind.LINEAR_PATCH
    patch_size: int = 1
    stem_channels: tuple[int, ...] = (32, 64, 128)
    stem_stride_first: int = 1
    dim: int = 128

    def __post_init__(self):
        object.__setattr__(self, "kind", _coerce(EmbeddingKind, self.kind, "embedding.kind"))
        object.__setattr__(self, "stem_channels", tuple(int(c) for c in self.stem_channels))
        if self.patch_size < 1 or self.dim < 1:
            raise ConfigError("embedding.patch_size and dim must be positive")
        if self.stem_stride_first not in (1, 2):
            raise ConfigError(f"embedding.stem_stride_first must be 1 or 2, got {self.stem_stride_first}")
        if self.kind is EmbeddingKind.CONV_STEM:
            if not self.stem_channels or any(c < 1 for c in self.stem_channels):
                raise ConfigError("embedding.stem_channels must be positive")
            if self.stem_channels[-1] != self.dim:
                raise ConfigError(
                    f"last stem channel count {self.stem_channels[-1]} must equal model dim {self.dim}"
                )

    @property
    def downsample(self) -> int:
        return self.patch_size if self.kind is EmbeddingKind.LINEAR_PATCH else self.stem_stride_first

    def grid(self, height: int, width: int) -> tuple[int, int]:
        s = self.downsample
        if height % s or width % s:
            what = "patch size" if self.kind is EmbeddingKind.LINEAR_PATCH else "stem stride"
            raise ConfigError(f"image {height}x{width} not divisible by {what} {s}")
        return height // s, width // s


@dataclass(frozen=True)
class PositionConfig:
    kind: PositionKind = PositionKind.LEARNABLE_1D
    max_len: int | None = None  # defaults to the model's sequence length
    rope_base: float = 10000.0
    # rope variant that also keeps the learnable table (off: the table is replaced)
    keep_table: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", _coerce(PositionKind, self.kind, "position.kind"))
        if self.keep_table and self.kind is not PositionKind.ROPE:
            raise ConfigError("position.keep_table applies to rope only")
        if self.max_len is not None and self.max_len < 1:
            raise ConfigError("position.max_len must be positive")
        if self.rope_base <= 0:
            raise ConfigError("position.rope_base must be positive")

    @property
    def has_table(self) -> bool:
        return self.kind is PositionKind.LEARNABLE_1D or self.keep_table


# --------------------------------------------------------------------------
# parameter declarations
# --------------------------------------------------------------------------

def embedding_param_specs(cfg: EmbeddingConfig, channels: int) -> list[ParamSpec]:
    if cfg.kind is EmbeddingKind.LINEAR_PATCH:
        return linear_specs("patch", channels * cfg.patch_size**2, cfg.dim)
    specs = []
    cin = channels
    for i, cout in enumerate(cfg.stem_channels):
        specs.append(ParamSpec(f"stem.{i}.weight", (cout, cin, 3, 3)))
        specs.append(ParamSpec(f"stem.{i}.bias", (cout,), "zeros"))
        cin = cout
    return specs


def conv_stem_param_count(channels: int, widths=(32, 64, 128), k: int = 3) -> int:
    total, cin = 0, channels
    for cout in widths:
        total += cout * (cin * k * k + 1)
        cin = cout
    return total


# --------------------------------------------------------------------------
# ops
# --------------------------------------------------------------------------

def patchify(img: Tensor, p: int) -> Tensor:
    """``[B,C,H,W] -> [B, (H/p)(W/p), C*p*p]``; patches row-major, channel-major within."""
    b, c, h, w = img.shape
    if h % p or w % p:
        raise DimensionError(f"patchify: image {h}x{w} not divisible by patch size {p}")
    x = T.reshape(img, (b, c, h // p, p, w // p, p))
    x = T.transpose(x, (0, 2, 4, 1, 3, 5))
    return T.reshape(x, (b, (h // p) * (w // p), c * p * p))


def unpatchify(tokens: Tensor, p: int, channels: int, height: int, width: int) -> Tensor:
    b = tokens.shape[0]
    x = T.reshape(tokens, (b, height // p, width // p, channels, p, p))
    x = T.transpose(x, (0, 3, 1, 4, 2, 5))
    return T.reshape(x, (b, channels, height, width))


def linear_patch_embed(tokens: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    return T.linear(tokens, weight, bias)


def conv_stem(img: Tensor, params: Mapping[str, Tensor], cfg: EmbeddingConfig) -> Tensor:
    """Stacked 3x3 same-padded convolutions with ReLU between them, flattened to tokens."""
    b, _, h, w = img.shape
    cfg.grid(h, w)
    x = img
    last = len(cfg.stem_channels) - 1
    for i in range(len(cfg.stem_channels)):
        stride = cfg.stem_stride_first if i == 0 else 1
        x = T.conv2d(x, params[f"stem.{i}.weight"], params[f"stem.{i}.bias"], stride=stride, padding=1)
        if i != last:
            x = T.relu(x)
    _, d, ho, wo = x.shape
    return T.transpose(T.reshape(x, (b, d, ho * wo)), (0, 2, 1))


def embed_tokens(img: Tensor, params: Mapping[str, Tensor], cfg: EmbeddingConfig) -> Tensor:
    if cfg.kind is EmbeddingKind.LINEAR_PATCH:
        return linear_patch_embed(patchify(img, cfg.patch_size), params["patch.weight"], params["patch.bias"])
    return conv_stem(img, params, cfg)


def prepend_class_token(x: Tensor, cls: Tensor) -> Tensor:
    b, _, d = x.shape
    if cls.shape != (d,):
        raise DimensionError(f"class token {cls.shape} does not match token dim {d}")
    return T.concat([T.broadcast_to(T.reshape(cls, (1, 1, d)), (b, 1, d)), x], axis=1)


def add_learnable_pos(x: Tensor, table: Tensor) -> Tensor:
    n = x.shape[1]
    if n > table.shape[0]:
        raise DimensionError(f"sequence length {n} exceeds position table length {table.shape[0]}")
    if table.shape[1] != x.shape[2]:
        raise DimensionError(f"position table {table.shape} does not match token dim {x.shape[2]}")
    return x + T.getitem(table, slice(0, n))


# --------------------------------------------------------------------------
# rotary position embedding
# --------------------------------------------------------------------------

def rope_angles(n: int, head_dim: int, base: float = 10000.0) -> np.ndarray:
    """``angles[m, j] = m * base**(-2j/head_dim)`` for positions ``0..n-1``."""
    if head_dim % 2:
        raise ConfigError(f"rotary embedding needs an even head dim, got {head_dim}")
    theta = base ** (-2.0 * np.arange(head_dim // 2) / head_dim)
    return np.arange(n)[:, None] * theta[None, :]


def rope(x: Tensor, base: float = 10000.0, positions: np.ndarray | None = None) -> Tensor:
    """Rotate pairs of the last axis by position-dependent angles (positions on axis -2)."""
    n, dh = x.shape[-2], x.shape[-1]
    if dh % 2:
        raise ConfigError(f"rotary embedding needs an even head dim, got {dh}")
    if positions is None:
        ang = rope_angles(n, dh, base)
    else:
        theta = base ** (-2.0 * np.arange(dh // 2) / dh)
        ang = np.asarray(positions, dtype=float)[:, None] * theta[None, :]
    return T.rotate_pairs(x, np.cos(ang), np.sin(ang))


def apply_rope(q: Tensor, k: Tensor, base: float = 10000.0) -> tuple[Tensor, Tensor]:
    """Rotate queries and keys of shape ``[..., n, head_dim]``; token i sits at position i."""
    return rope(q, base), rope(k, base)
