"""Token mixers: exact, ReLU-kernel linear, Linformer, Nystrom, Fourier, token-MLP.

All mixers map ``[B, n, d] -> [B, n, d]`` and read their weights from a flat
name->Tensor mapping whose keys come from :func:`mixer_param_specs`. Queries,
keys and values are laid out as ``[B, H, n, head_dim]`` inside the attention
variants; rotary embedding, when enabled, rotates Q and K right after projection
and before any kernel, landmark or length projection step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

import numpy as np

from . import tensor as T
from .embeddings import _coerce, apply_rope
from .errors import ConfigError, DimensionError
from .params import ParamSpec, linear_specs
from .tensor import Tensor


class MixerKind(str, Enum):
    EXACT = "exact"
    PERFORMER = "performer"
    LINFORMER = "linformer"
    NYSTROM = "nystrom"
    FOURIER = "fourier"
    MLPMIX = "mlpmix"


ATTENTION_KINDS = (MixerKind.EXACT, MixerKind.PERFORMER, MixerKind.LINFORMER, MixerKind.NYSTROM)


@dataclass(frozen=True)
class MixerConfig:
    kind: MixerKind = MixerKind.EXACT
    heads: int = 4
    dim: int = 128
    landmarks: int = 64
    proj_rank: int = 256
    pinv_iters: int = 6
    token_mlp_dim: int | None = None
    # bound sequence length; required by linformer (E rows) and mlpmix (token weights)
    seq_len: int | None = None
    # layout conventions of the reference implementations
    qkv_bias: bool = False
    share_kv: bool = False
    one_kv_head: bool = False
    residual_conv_kernel: int = 0
    # oracle switch: SVD pseudo-inverse instead of the iterative one (not differentiable)
    exact_pinv: bool = False
    denom_eps: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "kind", _coerce(MixerKind, self.kind, "mixer.kind"))
        for name in ("heads", "dim", "landmarks", "proj_rank", "pinv_iters"):
            if getattr(self, name) < 1:
                raise ConfigError(f"mixer.{name} must be a positive integer")
        if self.dim % self.heads:
            raise ConfigError(f"model dim {self.dim} is not divisible by {self.heads} heads")
        if self.kind is MixerKind.MLPMIX and (self.token_mlp_dim is None or self.token_mlp_dim < 1):
            raise ConfigError("mixer.token_mlp_dim must be set for mlpmix")
        if (self.share_kv or self.one_kv_head) and self.kind is not MixerKind.LINFORMER:
            raise ConfigError("share_kv / one_kv_head apply to linformer only")
        if self.residual_conv_kernel and self.kind is not MixerKind.NYSTROM:
            raise ConfigError("residual_conv_kernel applies to nystrom only")
        if self.residual_conv_kernel < 0 or (self.residual_conv_kernel and self.residual_conv_kernel % 2 == 0):
            raise ConfigError("residual_conv_kernel must be 0 or a positive odd integer")
        if self.seq_len is not None and self.seq_len < 1:
            raise ConfigError("mixer.seq_len must be positive")

    @property
    def head_dim(self) -> int:
        return self.dim // self.heads

    @property
    def kv_dim(self) -> int:
        return self.head_dim if self.one_kv_head else self.dim

    def bound_length(self) -> int:
        if self.seq_len is None:
            raise ConfigError(f"{self.kind.value} mixer needs seq_len bound at construction")
        return self.seq_len


def mixer_param_specs(cfg: MixerConfig) -> list[ParamSpec]:
    d = cfg.dim
    if cfg.kind is MixerKind.FOURIER:
        return []
    if cfg.kind is MixerKind.MLPMIX:
        n, t = cfg.bound_length(), cfg.token_mlp_dim
        return linear_specs("fc1", n, t) + linear_specs("fc2", t, n)
    specs = linear_specs("to_q", d, d, cfg.qkv_bias) + linear_specs("to_k", d, cfg.kv_dim, cfg.qkv_bias)
    if not cfg.share_kv:
        specs += linear_specs("to_v", d, cfg.kv_dim, cfg.qkv_bias)
    if cfg.kind is MixerKind.LINFORMER:
        n = cfg.bound_length()
        specs.append(
            ParamSpec("proj_e", (n, cfg.proj_rank), "normal", std=1.0 / math.sqrt(n), registered=False)
        )
    if cfg.kind is MixerKind.NYSTROM and cfg.residual_conv_kernel:
        specs.append(ParamSpec("res_conv.weight", (cfg.heads, cfg.residual_conv_kernel)))
    specs += linear_specs("to_out", d, d)
    return specs


# --------------------------------------------------------------------------
# shared attention plumbing
# --------------------------------------------------------------------------

def _proj(x: Tensor, params: Mapping[str, Tensor], name: str) -> Tensor:
    return T.linear(x, params[f"{name}.weight"], params.get(f"{name}.bias"))


def split_heads(x: Tensor, heads: int) -> Tensor:
    b, n, inner = x.shape
    return T.transpose(T.reshape(x, (b, n, heads, inner // heads)), (0, 2, 1, 3))


def merge_heads(x: Tensor) -> Tensor:
    b, h, n, dh = x.shape
    return T.reshape(T.transpose(x, (0, 2, 1, 3)), (b, n, h * dh))


def _check_input(x: Tensor, cfg: MixerConfig) -> None:
    if x.ndim != 3 or x.shape[2] != cfg.dim:
        raise DimensionError(f"mixer input {x.shape} does not match model dim {cfg.dim}")


def _qkv(x: Tensor, params, cfg: MixerConfig, rope_base: float | None):
    q = split_heads(_proj(x, params, "to_q"), cfg.heads)
    k = split_heads(_proj(x, params, "to_k"), cfg.heads)
    v = split_heads(_proj(x, params, "to_v"), cfg.heads)
    if rope_base is not None:
        q, k = apply_rope(q, k, rope_base)
    return q, k, v


def _out(o: Tensor, params) -> Tensor:
    return _proj(merge_heads(o), params, "to_out")


def _keys_t(k: Tensor) -> Tensor:
    return T.swapaxes(k, -1, -2)


# --------------------------------------------------------------------------
# mixers
# --------------------------------------------------------------------------

def exact_attention(x: Tensor, params: Mapping[str, Tensor], cfg: MixerConfig,
                    rope_base: float | None = None) -> Tensor:
    """Softmax attention; materializes the ``H x n x n`` score matrix."""
    _check_input(x, cfg)
    q, k, v = _qkv(x, params, cfg, rope_base)
    q = T.scale(q, cfg.head_dim**-0.5)
    attn = T.softmax(T.matmul(q, _keys_t(k)), axis=-1)
    del q, k
    o = T.matmul(attn, v)
    del attn, v
    return _out(o, params)


def performer_attention(x: Tensor, params: Mapping[str, Tensor], cfg: MixerConfig,
                        rope_base: float | None = None) -> Tensor:
    """Generalized linear attention with a ReLU feature map.

    ``out_i = phi(q_i) (sum_j phi(k_j) v_j^T) / (phi(q_i) . sum_j phi(k_j) + eps)``,
    evaluated right-to-left so no ``n x n`` matrix is formed.
    """
    _check_input(x, cfg)
    q, k, v = _qkv(x, params, cfg, rope_base)
    fq, fk = T.relu(q), T.relu(k)
    del q, k
    kv = T.matmul(_keys_t(fk), v)  # [B,H,dh,dh]
    ksum = T.sum_(fk, axis=-2, keepdims=True)  # [B,H,1,dh]
    del fk, v
    num = T.matmul(fq, kv)
    den = T.matmul(fq, _keys_t(ksum)) + cfg.denom_eps
    return _out(num / den, params)


def linformer_attention(x: Tensor, params: Mapping[str, Tensor], cfg: MixerConfig,
                        rope_base: float | None = None) -> Tensor:
    """Softmax attention against keys/values projected along length by a shared ``E``."""
    _check_input(x, cfg)
    b, n, _ = x.shape
    n_max = cfg.bound_length()
    if n != n_max:
        raise DimensionError(f"linformer bound to sequence length {n_max}, got {n}")
    q = split_heads(_proj(x, params, "to_q"), cfg.heads)
    kv_heads = 1 if cfg.one_kv_head else cfg.heads
    k = split_heads(_proj(x, params, "to_k"), kv_heads)
    v = k if cfg.share_kv else split_heads(_proj(x, params, "to_v"), kv_heads)
    if rope_base is not None:
        q, k = apply_rope(q, k, rope_base)
    et = T.transpose(params["proj_e"])  # [k, n]
    kp = T.matmul(et, k)  # [B,h,k,dh]
    vp = T.matmul(et, v)
    del k, v
    q = T.scale(q, cfg.head_dim**-0.5)
    attn = T.softmax(T.matmul(q, _keys_t(kp)), axis=-1)  # [B,H,n,k]
    return _out(T.matmul(attn, vp), params)


def segment_mean_matrix(n: int, m: int) -> np.ndarray:
    """Rows average ``m`` contiguous segments of ``n // m`` tokens; the last absorbs the rest."""
    if m > n:
        raise ConfigError(f"nystrom needs landmarks <= sequence length, got m={m}, n={n}")
    size = n // m
    p = np.zeros((m, n))
    for i in range(m):
        start = i * size
        stop = n if i == m - 1 else start + size
        p[i, start:stop] = 1.0 / (stop - start)
    return p


def iterative_pinv(a: Tensor, iters: int = 6) -> Tensor:
    """Moore-Penrose inverse of ``[..., m, m]`` by the Nystromformer Newton-Schulz iteration.

    Starts from ``A^T / (||A||_1 ||A||_inf)`` and applies
    ``Z <- Z (13I - AZ(15I - AZ(7I - AZ))) / 4``. Differentiable end to end.
    """
    m = a.shape[-1]
    absa = T.abs_(a)
    norm1 = T.amax(T.sum_(absa, axis=-2), axis=-1)
    norminf = T.amax(T.sum_(absa, axis=-1), axis=-1)
    denom = T.reshape(norm1 * norminf, a.shape[:-2] + (1, 1))
    z = T.swapaxes(a, -1, -2) / denom
    eye = np.eye(m)
    for _ in range(iters):
        az = T.matmul(a, z)
        inner = T.matmul(az, 7.0 * eye - az)
        inner = T.matmul(az, 15.0 * eye - inner)
        z = T.scale(T.matmul(z, 13.0 * eye - inner), 0.25)
    return z


def _depthwise_seq_conv(v: Tensor, weight: Tensor) -> Tensor:
    """Per-head 1D convolution over the sequence axis, zero padded, no bias."""
    b, h, n, dh = v.shape
    k = weight.shape[1]
    pad = k // 2
    zeros = T.Tensor(np.zeros((b, h, pad, dh)))
    vp = T.concat([zeros, v, zeros], axis=2)
    out = None
    for t in range(k):
        w_t = T.reshape(T.getitem(weight, (slice(None), slice(t, t + 1))), (1, h, 1, 1))
        term = T.getitem(vp, (slice(None), slice(None), slice(t, t + n))) * w_t
        out = term if out is None else out + term
    return out


def nystrom_attention(x: Tensor, params: Mapping[str, Tensor], cfg: MixerConfig,
                      rope_base: float | None = None) -> Tensor:
    """Landmark (segment-mean) approximation of softmax attention."""
    _check_input(x, cfg)
    n = x.shape[1]
    m = cfg.landmarks
    avg = T.Tensor(segment_mean_matrix(n, m))
    q, k, v = _qkv(x, params, cfg, rope_base)
    q = T.scale(q, cfg.head_dim**-0.5)
    ql, kl = T.matmul(avg, q), T.matmul(avg, k)
    k1 = T.softmax(T.matmul(q, _keys_t(kl)), axis=-1)  # [B,H,n,m]
    k2 = T.softmax(T.matmul(ql, _keys_t(kl)), axis=-1)  # [B,H,m,m]
    k3 = T.softmax(T.matmul(ql, _keys_t(k)), axis=-1)  # [B,H,m,n]
    del q, k, ql, kl
    pinv = T.exact_pinv(k2) if cfg.exact_pinv else iterative_pinv(k2, cfg.pinv_iters)
    o = T.matmul(k1, T.matmul(pinv, T.matmul(k3, v)))
    if cfg.residual_conv_kernel:
        o = o + _depthwise_seq_conv(v, params["res_conv.weight"])
    return _out(o, params)


def fourier_mix(x: Tensor) -> Tensor:
    """Parameter-free mixing: real part of the 2D DFT over (sequence, hidden)."""
    return T.dft2_real(x)


def token_mixing_mlp(x: Tensor, params: Mapping[str, Tensor], cfg: MixerConfig) -> Tensor:
    """Dense -> GELU -> dense applied along the token axis."""
    n = cfg.bound_length()
    if x.shape[1] != n:
        raise DimensionError(f"token-mixing MLP bound to {n} tokens, got {x.shape[1]}")
    t = T.swapaxes(x, 1, 2)
    t = T.gelu(_proj(t, params, "fc1"))
    return T.swapaxes(_proj(t, params, "fc2"), 1, 2)


def feedforward(x: Tensor, params: Mapping[str, Tensor]) -> Tensor:
    """Channel MLP: dense -> GELU -> dense over the last axis."""
    return _proj(T.gelu(_proj(x, params, "fc1")), params, "fc2")


def mlp_mixer_block(x: Tensor, params: Mapping[str, Tensor], cfg: MixerConfig,
                    eps: float = 1e-5) -> Tensor:
    """Token-mixing then channel-mixing MLP, each pre-normed with a residual.

    Keys: ``norm1.*``, ``mixer.fc1/fc2.*`` (token MLP), ``norm2.*``, ``mlp.fc1/fc2.*``.
    """
    _check_input(x, cfg)
    h = T.layer_norm(x, params["norm1.gamma"], params["norm1.beta"], eps)
    x = x + token_mixing_mlp(h, {k[6:]: v for k, v in params.items() if k.startswith("mixer.")}, cfg)
    h = T.layer_norm(x, params["norm2.gamma"], params["norm2.beta"], eps)
    return x + feedforward(h, {k[4:]: v for k, v in params.items() if k.startswith("mlp.")})


def mix(x: Tensor, cfg: MixerConfig, params: Mapping[str, Tensor],
        rope_base: float | None = None) -> Tensor:
    """Route to the mixer selected by ``cfg.kind``; output shape equals input shape."""
    kind = cfg.kind
    if rope_base is not None and kind not in ATTENTION_KINDS:
        raise ConfigError(f"rotary embedding needs query/key projections; {kind.value} has none")
    if kind is MixerKind.EXACT:
        out = exact_attention(x, params, cfg, rope_base)
    elif kind is MixerKind.PERFORMER:
        out = performer_attention(x, params, cfg, rope_base)
    elif kind is MixerKind.LINFORMER:
        out = linformer_attention(x, params, cfg, rope_base)
    elif kind is MixerKind.NYSTROM:
        out = nystrom_attention(x, params, cfg, rope_base)
    elif kind is MixerKind.FOURIER:
        _check_input(x, cfg)
        out = fourier_mix(x)
    elif kind is MixerKind.MLPMIX:
        _check_input(x, cfg)
        out = token_mixing_mlp(x, params, cfg)
    else:  # pragma: no cover - Enum coercion rejects unknown kinds first
        raise ConfigError(f"unknown mixer kind {kind!r}")
    assert out.shape == x.shape
    return out


__all__ = [
    "ATTENTION_KINDS",
    "MixerConfig",
    "MixerKind",
    "exact_attention",
    "feedforward",
    "fourier_mix",
    "iterative_pinv",
    "linformer_attention",
    "mix",
    "mixer_param_specs",
    "mlp_mixer_block",
    "nystrom_attention",
    "performer_attention",
    "segment_mean_matrix",
    "token_mixing_mlp",
]
