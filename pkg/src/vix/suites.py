"""Finite-difference gradient suites over ops, mixers, embeddings and a tiny model.

Every case reduces its output to a scalar through a fixed random weighting,
``sum(out * R)``, so gradients are never trivially zero (a plain ``sum`` of a
softmax, for instance, is constant).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import tensor as T
from .embeddings import (
    EmbeddingConfig,
    add_learnable_pos,
    conv_stem,
    embedding_param_specs,
    linear_patch_embed,
    patchify,
    prepend_class_token,
    rope,
)
from .gradcheck import GradCheckReport, grad_check
from .mixers import MixerConfig, MixerKind, mix, mixer_param_specs, mlp_mixer_block
from .model import ModelConfig, build_model, forward
from .params import init_params, linear_specs, norm_specs, prefix_specs
from .tensor import Tensor

SCOPES = ("ops", "mixers", "embeddings", "model")
TOL = 1e-4
H = 1e-5


@dataclass(frozen=True)
class GradCase:
    name: str
    scope: str
    # builds [(f, inputs)] from a generator; one entry per checked shape
    build: Callable[[np.random.Generator], list[tuple[Callable, dict[str, Tensor]]]]


def _leaf(rng, shape, lo=None) -> Tensor:
    data = rng.standard_normal(shape)
    if lo is not None:
        data = lo + np.abs(data)
    return Tensor(data, requires_grad=True)


def _weighted(out: Tensor, weights: np.ndarray) -> Tensor:
    return T.sum_(out * Tensor(weights))


def _unary(op, shapes, lo=None):
    def build(rng):
        cases = []
        for shape in shapes:
            x = _leaf(rng, shape, lo)
            w = rng.standard_normal(op(Tensor(x.data)).shape)
            cases.append((lambda x, w=w: _weighted(op(x), w), {"x": x}))
        return cases
    return build


def _binary(op, shape_pairs, lo_b=None):
    def build(rng):
        cases = []
        for sa, sb in shape_pairs:
            a, b = _leaf(rng, sa), _leaf(rng, sb, lo_b)
            w = rng.standard_normal(op(Tensor(a.data), Tensor(b.data)).shape)
            cases.append((lambda a, b, w=w: _weighted(op(a, b), w), {"a": a, "b": b}))
        return cases
    return build


def _cross_entropy(rng):
    cases = []
    for n, c in ((4, 3), (6, 10), (1, 5)):
        logits = _leaf(rng, (n, c))
        labels = rng.integers(0, c, size=n)
        cases.append((lambda z, y=labels: T.cross_entropy(z, y), {"z": logits}))
    return cases


def _layer_norm(rng):
    cases = []
    for shape in ((4, 8), (2, 3, 5), (7, 2)):
        d = shape[-1]
        x, g, b = _leaf(rng, shape), _leaf(rng, (d,)), _leaf(rng, (d,))
        w = rng.standard_normal(shape)
        cases.append((lambda x, gamma, beta, w=w: _weighted(T.layer_norm(x, gamma, beta), w), {"x": x, "gamma": g, "beta": b}))
    return cases


def _linear(rng):
    cases = []
    for lead, fi, fo in (((3,), 4, 5), ((2, 3), 5, 2), ((1,), 1, 3)):
        x, wt, b = _leaf(rng, lead + (fi,)), _leaf(rng, (fi, fo)), _leaf(rng, (fo,))
        r = rng.standard_normal(lead + (fo,))
        cases.append((lambda x, w, b, r=r: _weighted(T.linear(x, w, b), r), {"x": x, "w": wt, "b": b}))
    return cases


def _conv2d(rng):
    cases = []
    for (b, cin, h, w), cout, k, s, p in (((1, 2, 6, 6), 3, 3, 1, 1), ((2, 1, 4, 4), 2, 3, 2, 1), ((1, 3, 5, 5), 2, 1, 1, 0)):
        x, wt, bias = _leaf(rng, (b, cin, h, w)), _leaf(rng, (cout, cin, k, k)), _leaf(rng, (cout,))
        r = rng.standard_normal(T.conv2d(Tensor(x.data), Tensor(wt.data), None, s, p).shape)
        cases.append((lambda x, w, b, r=r, s=s, p=p: _weighted(T.conv2d(x, w, b, s, p), r),
                      {"x": x, "w": wt, "b": bias}))
    return cases


def _rotate(rng):
    cases = []
    for shape in ((3, 4), (2, 5, 6), (1, 2)):
        x = _leaf(rng, shape)
        ang = rng.uniform(-np.pi, np.pi, shape[:-1] + (shape[-1] // 2,))
        r = rng.standard_normal(shape)
        cases.append((lambda x, c=np.cos(ang), s=np.sin(ang), r=r: _weighted(T.rotate_pairs(x, c, s), r), {"x": x}))
    return cases


def _dropout(rng):
    cases = []
    for shape in ((4,), (3, 5), (2, 2, 3)):
        x = _leaf(rng, shape)
        r = rng.standard_normal(shape)
        cases.append((lambda x, r=r: _weighted(T.dropout(x, 0.3, np.random.default_rng(7)), r), {"x": x}))
    return cases


def _concat(rng):
    cases = []
    for sa, sb, ax in (((2, 3), (4, 3), 0), ((2, 3), (2, 1), 1), ((1, 2, 2), (1, 3, 2), 1)):
        a, b = _leaf(rng, sa), _leaf(rng, sb)
        r = rng.standard_normal(np.concatenate([a.data, b.data], axis=ax).shape)
        cases.append((lambda a, b, r=r, ax=ax: _weighted(T.concat([a, b], ax), r), {"a": a, "b": b}))
    return cases


def _op_cases() -> list[GradCase]:
    s3 = [(5,), (3, 4), (2, 3, 4)]
    cases = [
        GradCase("add", "ops", _binary(T.add, [((3,), (3,)), ((2, 3), (3,)), ((2, 1, 4), (3, 1))])),
        GradCase("sub", "ops", _binary(T.sub, [((3,), (3,)), ((2, 3), (1, 3)), ((4, 1), (1, 5))])),
        GradCase("mul", "ops", _binary(T.mul, [((3,), (3,)), ((2, 3), (3,)), ((2, 1, 4), (3, 1))])),
        GradCase("div", "ops", _binary(T.div, [((3,), (3,)), ((2, 3), (3,)), ((2, 4), (2, 1))], lo_b=0.5)),
        GradCase("neg", "ops", _unary(T.neg, s3)),
        GradCase("scale", "ops", _unary(lambda x: T.scale(x, -1.7), s3)),
        GradCase("exp", "ops", _unary(T.exp, s3)),
        GradCase("log", "ops", _unary(T.log, s3, lo=0.3)),
        GradCase("abs", "ops", _unary(T.abs_, s3)),
        GradCase("relu", "ops", _unary(T.relu, s3)),
        GradCase("gelu", "ops", _unary(T.gelu, s3)),
        GradCase("sum", "ops", _unary(lambda x: T.sum_(x, axis=-1), s3)),
        GradCase("mean", "ops", _unary(lambda x: T.mean(x, axis=0, keepdims=True), s3)),
        GradCase("amax", "ops", _unary(lambda x: T.amax(x, axis=-1), s3)),
        GradCase("reshape", "ops", _unary(lambda x: T.reshape(x, (-1,)), s3)),
        GradCase("transpose", "ops", _unary(T.transpose, s3)),
        GradCase("swapaxes", "ops", _unary(lambda x: T.swapaxes(x, 0, -1), s3)),
        GradCase("broadcast_to", "ops", _unary(lambda x: T.broadcast_to(x, (2,) + x.shape), s3)),
        GradCase("getitem", "ops", _unary(lambda x: T.getitem(x, slice(1, None)), s3)),
        GradCase("concat", "ops", _concat),
        GradCase("matmul", "ops", _binary(T.matmul, [((4, 5), (5, 6)), ((2, 3, 4), (4, 2)), ((2, 1, 3, 2), (3, 2, 4))])),
        GradCase("linear", "ops", _linear),
        GradCase("softmax", "ops", _unary(T.softmax, s3)),
        GradCase("log_softmax", "ops", _unary(T.log_softmax, s3)),
        GradCase("cross_entropy", "ops", _cross_entropy),
        GradCase("layer_norm", "ops", _layer_norm),
        GradCase("rotate_pairs", "ops", _rotate),
        GradCase("conv2d", "ops", _conv2d),
        GradCase("dft2_real", "ops", _unary(T.dft2_real, [(4, 3), (2, 5, 3), (1, 6, 2)])),
        GradCase("dropout", "ops", _dropout),
    ]
    return cases


# --------------------------------------------------------------------------
# mixers
# --------------------------------------------------------------------------

_MIXER_SETTINGS = {
    MixerKind.EXACT: {},
    MixerKind.PERFORMER: {"qkv_bias": True},
    MixerKind.LINFORMER: {"proj_rank": 3},
    MixerKind.NYSTROM: {"landmarks": 3, "residual_conv_kernel": 3},
    MixerKind.FOURIER: {},
    MixerKind.MLPMIX: {"token_mlp_dim": 4},
}


def _as_leaves(params: dict[str, Tensor]) -> dict[str, Tensor]:
    return {k: Tensor(v.data.copy(), requires_grad=True) for k, v in params.items()}


def _mixer_case(kind: MixerKind) -> GradCase:
    def build(rng):
        b, n, d = 1, 6, 8
        cfg = MixerConfig(kind=kind, heads=2, dim=d, seq_len=n, **_MIXER_SETTINGS[kind])
        if kind is MixerKind.MLPMIX:
            specs = (norm_specs("norm1", d) + prefix_specs("mixer.", mixer_param_specs(cfg))
                     + norm_specs("norm2", d) + prefix_specs("mlp.", linear_specs("fc1", d, 12) + linear_specs("fc2", 12, d)))
        else:
            specs = mixer_param_specs(cfg)
        params = init_params(specs, int(rng.integers(1 << 30)))
        # lift the 0.02-scale init so attention is far from uniform
        for key, p in params.items():
            p.data = p.data + 0.3 * rng.standard_normal(p.shape)
        leaves = _as_leaves(params)
        leaves["x"] = _leaf(rng, (b, n, d))
        r = rng.standard_normal((b, n, d))
        names = list(leaves)

        def f(**kw):
            x = kw["x"]
            p = {k: kw[k] for k in names if k != "x"}
            out = mlp_mixer_block(x, p, cfg) if kind is MixerKind.MLPMIX else mix(x, cfg, p)
            return _weighted(out, r)

        return [(f, leaves)]
    return GradCase(kind.value, "mixers", build)


# --------------------------------------------------------------------------
# embeddings
# --------------------------------------------------------------------------

def _patch_embed(rng):
    cases = []
    for (b, c, h, w), p, d in (((1, 3, 4, 4), 1, 5), ((2, 3, 4, 4), 2, 6), ((1, 1, 6, 6), 3, 4)):
        img, wt, bias = _leaf(rng, (b, c, h, w)), _leaf(rng, (c * p * p, d)), _leaf(rng, (d,))
        r = rng.standard_normal((b, (h // p) * (w // p), d))
        cases.append((lambda img, w, b, p=p, r=r: _weighted(linear_patch_embed(patchify(img, p), w, b), r),
                      {"img": img, "w": wt, "b": bias}))
    return cases


def _conv_stem(rng):
    cases = []
    for stride, (h, w) in ((1, (4, 4)), (2, (6, 6))):
        cfg = EmbeddingConfig(kind="conv_stem", stem_channels=(3, 4, 5), stem_stride_first=stride, dim=5)
        params = _as_leaves(init_params(embedding_param_specs(cfg, 2), int(rng.integers(1 << 30))))
        for t in params.values():
            t.data = t.data + 0.3 * rng.standard_normal(t.shape)
        params["img"] = _leaf(rng, (1, 2, h, w))
        r = rng.standard_normal((1, (h // stride) * (w // stride), 5))

        def f(cfg=cfg, r=r, **kw):
            img = kw.pop("img")
            return _weighted(conv_stem(img, kw, cfg), r)

        cases.append((f, params))
    return cases


def _class_token(rng):
    cases = []
    for b, n, d in ((1, 3, 4), (2, 5, 3), (3, 1, 2)):
        x, cls = _leaf(rng, (b, n, d)), _leaf(rng, (d,))
        r = rng.standard_normal((b, n + 1, d))
        cases.append((lambda x, cls, r=r: _weighted(prepend_class_token(x, cls), r), {"x": x, "cls": cls}))
    return cases


def _learnable_pos(rng):
    cases = []
    for b, n, d, m in ((1, 3, 4, 3), (2, 4, 3, 6), (2, 1, 2, 2)):
        x, table = _leaf(rng, (b, n, d)), _leaf(rng, (m, d))
        r = rng.standard_normal((b, n, d))
        cases.append((lambda x, table, r=r: _weighted(add_learnable_pos(x, table), r), {"x": x, "table": table}))
    return cases


def _rope(rng):
    cases = []
    for shape in ((1, 2, 5, 4), (2, 1, 3, 6), (1, 1, 7, 2)):
        x = _leaf(rng, shape)
        r = rng.standard_normal(shape)
        cases.append((lambda x, r=r: _weighted(rope(x, 10000.0), r), {"x": x}))
    return cases


def _embedding_cases() -> list[GradCase]:
    return [
        GradCase("patch_embed", "embeddings", _patch_embed),
        GradCase("conv_stem", "embeddings", _conv_stem),
        GradCase("class_token", "embeddings", _class_token),
        GradCase("learnable_pos", "embeddings", _learnable_pos),
        GradCase("rope", "embeddings", _rope),
    ]


# --------------------------------------------------------------------------
# end-to-end
# --------------------------------------------------------------------------

def tiny_model_config(**mixer_kw) -> ModelConfig:
    """d=8, one layer, two heads, 4x4 pixels + class token = 17 tokens, 3 classes."""
    return ModelConfig(
        embedding=EmbeddingConfig(dim=8, patch_size=1),
        mixer=MixerConfig(dim=8, heads=2, **mixer_kw),
        depth=1, mlp_dim=16, num_classes=3, image_shape=(3, 4, 4),
    )


def _model(rng):
    model = build_model(tiny_model_config(), int(rng.integers(1 << 30)))
    for p in model.params.values():
        p.data = p.data + 0.2 * rng.standard_normal(p.shape)
    images = rng.standard_normal((2, 3, 4, 4))
    labels = rng.integers(0, 3, size=2)
    names = list(model.params)

    def f(**kw):
        model.params = {k: kw[k] for k in names}
        return T.cross_entropy(forward(model, Tensor(images)), labels)

    return [(f, {k: Tensor(v.data, requires_grad=True) for k, v in model.params.items()})]


def all_cases() -> list[GradCase]:
    return (_op_cases() + [_mixer_case(k) for k in MixerKind] + _embedding_cases()
            + [GradCase("tiny_model", "model", _model)])


def select(scope: str = "all") -> list[GradCase]:
    if scope != "all" and scope not in SCOPES:
        raise ValueError(f"unknown scope {scope!r}; expected all or one of {', '.join(SCOPES)}")
    return [c for c in all_cases() if scope == "all" or c.scope == scope]


def run_case(case: GradCase, seed: int = 0, h: float = H, tol: float = TOL) -> GradCheckReport:
    """Check every shape of ``case``; the report keeps the worst error per input."""
    rng = np.random.default_rng([seed, sum(map(ord, case.name))])
    merged = GradCheckReport(name=case.name, tol=tol)
    for i, (f, inputs) in enumerate(case.build(rng)):
        rep = grad_check(f, inputs, h=h, tol=tol, name=case.name)
        for key, err in rep.max_rel_error.items():
            merged.max_rel_error[f"shape{i}.{key}"] = err
    return merged


def run_suite(scope: str = "all", seed: int = 0) -> list[tuple[GradCase, GradCheckReport]]:
    return [(c, run_case(c, seed)) for c in select(scope)]
