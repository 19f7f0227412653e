"""Closed-form activation-memory and multiply-accumulate estimates.

Memory is counted in live scalars (f64 tensor elements) during an inference
forward pass, the quantity the tensor-core tracker measures. Inputs and
parameters that exist before the pass are excluded. MACs count matmul and
convolution work only; elementwise ops, norms and softmax are not counted. The
FFT in the Fourier mixer is charged ``n*d*(log2 n + log2 d)`` MAC-equivalents.

Symbols: B batch, n sequence length, d model dim, H heads, dh = d/H, f MLP
hidden dim, r the mixer rank (Linformer projection k, Nystrom landmarks m,
Performer feature dim = dh), t token-MLP hidden dim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .embeddings import EmbeddingKind
from .mixers import MixerConfig, MixerKind
from .model import ModelConfig

BYTES_PER_SCALAR = 8


@dataclass(frozen=True)
class Stage:
    name: str
    live_scalars: int

    @property
    def bytes(self) -> int:
        return self.live_scalars * BYTES_PER_SCALAR


@dataclass
class MemoryReport:
    stages: list[Stage]
    score_term: int  # per-layer attention score scalars (B*H*n^2 for exact, 0 otherwise)
    n: int
    batch: int
    terms: dict[str, int] = field(default_factory=dict)

    @property
    def peak_scalars(self) -> int:
        return max(s.live_scalars for s in self.stages)

    @property
    def peak_bytes(self) -> int:
        return self.peak_scalars * BYTES_PER_SCALAR

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "batch": self.batch,
            "peak_scalars": self.peak_scalars,
            "peak_bytes": self.peak_bytes,
            "score_term": self.score_term,
            "stages": [{"name": s.name, "live_scalars": s.live_scalars, "bytes": s.bytes} for s in self.stages],
            "terms": self.terms,
        }


def mixer_terms(cfg: MixerConfig, n: int, batch: int = 1) -> dict[str, int]:
    """Named contributions to one mixer call's peak live scalars."""
    b, d, h, dh = batch, cfg.dim, cfg.heads, cfg.head_dim
    k = cfg.kind
    if k is MixerKind.EXACT:
        return {"qkv": 3 * b * n * d, "scores": 2 * b * h * n * n}
    if k is MixerKind.PERFORMER:
        return {"qkv": 3 * b * n * d, "features": 2 * b * n * d, "denominator": b * h * n,
                "kv_summary": b * h * (dh * dh + dh)}
    if k is MixerKind.LINFORMER:
        r = cfg.proj_rank
        kv_heads = 1 if cfg.one_kv_head else h
        kv_proj = 1 if cfg.share_kv else 2
        return {"qkv": b * n * d + kv_proj * b * n * cfg.kv_dim + (b * n * d if cfg.share_kv else 0),
                "scores": 2 * b * h * n * r, "projected_kv": 2 * b * kv_heads * r * dh}
    if k is MixerKind.NYSTROM:
        m = cfg.landmarks
        terms = {"qkv": 3 * b * n * d, "segment_means": m * n, "kernels": 3 * b * h * m * n,
                 "landmark_kernel": 2 * b * h * m * m}
        if cfg.residual_conv_kernel:
            terms["residual_conv"] = 2 * b * n * d
        return terms
    if k is MixerKind.FOURIER:
        return {"output": b * n * d}
    if k is MixerKind.MLPMIX:
        return {"output": b * n * d, "token_hidden": 2 * b * d * cfg.token_mlp_dim}
    raise AssertionError(k)


def estimate_mixer_peak(cfg: MixerConfig, n: int, batch: int = 1) -> int:
    return sum(mixer_terms(cfg, n, batch).values())


def _embed_stage(cfg: ModelConfig, batch: int) -> int:
    c, hgt, wid = cfg.image_shape
    d = cfg.dim
    image = batch * c * hgt * wid
    emb = cfg.embedding
    if emb.kind is EmbeddingKind.LINEAR_PATCH:
        n = cfg.num_tokens
        return image + batch * n * c * emb.patch_size**2 + 3 * batch * cfg.seq_len * d
    peak, cin, h, w = 0, c, hgt, wid
    for i, cout in enumerate(emb.stem_channels):
        s = emb.stem_stride_first if i == 0 else 1
        ho, wo = h // s, w // s
        padded = batch * cin * (h + 2) * (w + 2)
        cols = batch * ho * wo * cin * 9
        out = batch * cout * ho * wo
        peak = max(peak, batch * cin * h * w + padded + cols + 2 * out)
        cin, h, w = cout, ho, wo
    return image + peak


def estimate_activation_memory(cfg: ModelConfig, n: int | None = None, batch: int = 1) -> MemoryReport:
    """Per-stage peak live scalars of one inference forward pass.

    ``n`` defaults to the config's sequence length; passing another value
    evaluates the layer formulas at that length (the embedding stage stays at
    the configured image size).
    """
    n = cfg.seq_len if n is None else n
    d, f = cfg.dim, cfg.mlp_dim
    stream = 2 * batch * n * d  # residual stream + normalized copy
    mterms = mixer_terms(cfg.mixer, n, batch)
    stages = [Stage("embed", _embed_stage(cfg, batch))]
    if cfg.mixer.kind is not MixerKind.MLPMIX:
        stages.append(Stage("layer.mixer", stream + sum(mterms.values())))
    else:
        stages.append(Stage("layer.token_mix", stream + sum(mterms.values())))
    stages.append(Stage("layer.mlp", stream + 2 * batch * n * f + batch * n * d))
    stages.append(Stage("head", stream + batch * d + batch * cfg.num_classes))
    score = batch * cfg.mixer.heads * n * n if cfg.mixer.kind is MixerKind.EXACT else 0
    return MemoryReport(stages, score, n, batch, mterms)


# --------------------------------------------------------------------------
# multiply-accumulates
# --------------------------------------------------------------------------

def mixer_macs(cfg: MixerConfig, n: int, batch: int = 1) -> dict[str, int]:
    b, d, h, dh = batch, cfg.dim, cfg.heads, cfg.head_dim
    k = cfg.kind
    if k is MixerKind.FOURIER:
        return {"fft": int(round(b * n * d * (math.log2(max(n, 2)) + math.log2(max(d, 2)))))}
    if k is MixerKind.MLPMIX:
        return {"token_mlp": 2 * b * d * n * cfg.token_mlp_dim}
    proj = {"q": b * n * d * d, "out": b * n * d * d}
    if k is MixerKind.LINFORMER:
        r = cfg.proj_rank
        kv_heads = 1 if cfg.one_kv_head else h
        proj["kv"] = (1 if cfg.share_kv else 2) * b * n * d * cfg.kv_dim
        return {**proj, "length_projection": 2 * b * kv_heads * r * n * dh,
                "scores": b * h * n * r * dh, "weighted_values": b * h * n * r * dh}
    proj["kv"] = 2 * b * n * d * d
    if k is MixerKind.EXACT:
        return {**proj, "scores": b * h * n * n * dh, "weighted_values": b * h * n * n * dh}
    if k is MixerKind.PERFORMER:
        return {**proj, "kv_summary": b * h * n * dh * dh, "numerator": b * h * n * dh * dh,
                "denominator": b * h * n * dh}
    if k is MixerKind.NYSTROM:
        m = cfg.landmarks
        out = {**proj, "segment_means": 2 * b * h * m * n * dh, "kernels": 2 * b * h * n * m * dh,
               "landmark_kernel": b * h * m * m * dh, "pinv": 4 * cfg.pinv_iters * b * h * m**3,
               "weighted_values": b * h * (m * n * dh + m * m * dh + n * m * dh)}
        if cfg.residual_conv_kernel:
            out["residual_conv"] = b * n * d * cfg.residual_conv_kernel
        return out
    raise AssertionError(k)


def _embed_macs(cfg: ModelConfig, batch: int) -> int:
    c, hgt, wid = cfg.image_shape
    emb = cfg.embedding
    if emb.kind is EmbeddingKind.LINEAR_PATCH:
        return batch * cfg.num_tokens * c * emb.patch_size**2 * cfg.dim
    total, cin, h, w = 0, c, hgt, wid
    for i, cout in enumerate(emb.stem_channels):
        s = emb.stem_stride_first if i == 0 else 1
        h, w = h // s, w // s
        total += batch * h * w * cout * cin * 9
        cin = cout
    return total


def estimate_flops(cfg: ModelConfig, n: int | None = None, batch: int = 1) -> dict[str, int]:
    """MACs of one forward pass, itemized; ``total`` sums the rest."""
    n = cfg.seq_len if n is None else n
    d, f, L = cfg.dim, cfg.mlp_dim, cfg.depth
    out = {"embed": _embed_macs(cfg, batch)}
    out["mixer"] = L * sum(mixer_macs(cfg.mixer, n, batch).values())
    out["mlp"] = L * 2 * batch * n * d * f
    out["head"] = batch * d * cfg.num_classes
    out["total"] = sum(out.values())
    return out
