import numpy as np
import pytest

from vix import tensor as T
from vix.errors import ConfigError, DimensionError
from vix.gradcheck import grad_check
from vix.mixers import (
    MixerConfig,
    MixerKind,
    exact_attention,
    fourier_mix,
    iterative_pinv,
    linformer_attention,
    mix,
    mixer_param_specs,
    mlp_mixer_block,
    nystrom_attention,
    performer_attention,
    segment_mean_matrix,
)
from vix.params import init_params, linear_specs, norm_specs, prefix_specs
from vix.tensor import Tensor

from oracles import loop_attention, naive_dft2_real, performer_row_weights, quadratic_performer


def weights(rng, d, scale=None, bias=True):
    s = d**-0.5 if scale is None else scale
    p = {f"{n}.weight": Tensor(rng.normal(0, s, (d, d))) for n in ("to_q", "to_k", "to_v", "to_out")}
    p["to_out.bias"] = Tensor(rng.normal(0, 0.1, d) if bias else np.zeros(d))
    return p


def value_path(x, p):
    return x @ p["to_v.weight"].data @ p["to_out.weight"].data + p["to_out.bias"].data


def rel_frob(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


# -- exact ------------------------------------------------------------------

def test_exact_single_token_is_value_path(rng):
    p = weights(rng, 8)
    x = rng.standard_normal((2, 1, 8))
    out = exact_attention(Tensor(x), p, MixerConfig(heads=2, dim=8))
    assert np.allclose(out.data, value_path(x, p), atol=1e-12)


def test_exact_identical_tokens_half_weights(rng, monkeypatch):
    seen = []
    real = T.softmax
    monkeypatch.setattr(T, "softmax", lambda a, axis=-1: seen.append(real(a, axis)) or seen[-1])
    p = weights(rng, 8)
    tok = rng.standard_normal(8)
    out = exact_attention(Tensor(np.stack([tok, tok])[None]), p, MixerConfig(heads=2, dim=8)).data
    assert np.allclose(seen[0].data, 0.5, atol=1e-15)
    assert np.allclose(out[0, 0], out[0, 1], atol=1e-15)


def test_exact_matches_loop_oracle(rng):
    p = weights(rng, 8)
    x = rng.standard_normal((2, 7, 8))
    out = exact_attention(Tensor(x), p, MixerConfig(heads=2, dim=8)).data
    ref = loop_attention(x, *(p[f"{n}.weight"].data for n in ("to_q", "to_k", "to_v", "to_out")),
                         p["to_out.bias"].data, heads=2)
    assert np.max(np.abs(out - ref)) < 1e-10


def test_heads_must_divide_dim():
    with pytest.raises(ConfigError):
        MixerConfig(heads=3, dim=8)


# -- performer --------------------------------------------------------------

def test_performer_single_token_is_value_path(rng):
    p = weights(rng, 8, scale=0.5)
    x = np.abs(rng.standard_normal((1, 1, 8)))
    for k in ("to_q.weight", "to_k.weight"):
        p[k] = Tensor(np.abs(p[k].data))
    out = performer_attention(Tensor(x), p, MixerConfig(kind="performer", heads=2, dim=8)).data
    # weight collapses to s / (s + eps) for a single token
    assert np.allclose(out, value_path(x, p), atol=1e-6)


def test_performer_linear_order_equals_quadratic_order(rng):
    p = weights(rng, 8)
    x = rng.standard_normal((2, 6, 8))
    out = performer_attention(Tensor(x), p, MixerConfig(kind="performer", heads=2, dim=8)).data
    ref = quadratic_performer(x, *(p[f"{n}.weight"].data for n in ("to_q", "to_k", "to_v", "to_out")),
                              p["to_out.bias"].data, heads=2)
    assert rel_frob(out, ref) < 1e-10


def test_performer_row_weights_are_distributions(rng):
    x = rng.uniform(0, 1, (1, 6, 8))
    wq, wk = rng.uniform(0, 1, (8, 8)), rng.uniform(0, 1, (8, 8))
    for w in performer_row_weights(x, wq, wk, heads=2):
        assert np.all(w >= 0)
        assert np.allclose(w.sum(-1), 1.0, atol=1e-8)


def test_performer_all_zero_features_are_finite(rng):
    p = weights(rng, 8)
    p["to_k.weight"] = Tensor(np.zeros((8, 8)))
    out = performer_attention(Tensor(rng.standard_normal((1, 5, 8))), p, MixerConfig(kind="performer", heads=2, dim=8))
    assert np.all(np.isfinite(out.data))


# -- linformer --------------------------------------------------------------

def test_linformer_identity_projection_is_exact(rng):
    n = 7
    p = weights(rng, 8)
    x = Tensor(rng.standard_normal((2, n, 8)))
    ref = exact_attention(x, p, MixerConfig(heads=2, dim=8)).data
    p["proj_e"] = Tensor(np.eye(n))
    out = linformer_attention(x, p, MixerConfig(kind="linformer", heads=2, dim=8, proj_rank=n, seq_len=n)).data
    assert rel_frob(out, ref) < 1e-10


def test_linformer_single_token(rng):
    p = weights(rng, 8)
    p["proj_e"] = Tensor(np.ones((1, 1)))
    x = rng.standard_normal((1, 1, 8))
    out = linformer_attention(Tensor(x), p, MixerConfig(kind="linformer", heads=2, dim=8, proj_rank=1, seq_len=1))
    assert np.allclose(out.data, value_path(x, p), atol=1e-12)


def test_linformer_rows_and_shape(rng, monkeypatch):
    seen = []
    real = T.softmax
    monkeypatch.setattr(T, "softmax", lambda a, axis=-1: seen.append(real(a, axis)) or seen[-1])
    cfg = MixerConfig(kind="linformer", heads=2, dim=8, proj_rank=4, seq_len=8)
    p = init_params(mixer_param_specs(cfg), 0)
    out = linformer_attention(Tensor(rng.standard_normal((3, 8, 8))), p, cfg)
    assert out.shape == (3, 8, 8)
    assert seen[0].shape == (3, 2, 8, 4)
    assert np.allclose(seen[0].data.sum(-1), 1, atol=1e-6)


def test_linformer_length_mismatch(rng):
    cfg = MixerConfig(kind="linformer", heads=2, dim=8, proj_rank=4, seq_len=8)
    with pytest.raises(DimensionError):
        linformer_attention(Tensor(rng.standard_normal((1, 6, 8))), init_params(mixer_param_specs(cfg), 0), cfg)


def test_linformer_projection_init_variance():
    cfg = MixerConfig(kind="linformer", dim=8, heads=2, proj_rank=64, seq_len=400)
    e = init_params(mixer_param_specs(cfg), 3)["proj_e"].data
    assert e.shape == (400, 64)
    assert abs(e.var() - 1 / 400) < 0.1 / 400


def test_linformer_shared_kv_layout():
    cfg = MixerConfig(kind="linformer", dim=128, heads=4, proj_rank=256, seq_len=1025, share_kv=True, one_kv_head=True)
    names = {s.name: s.shape for s in mixer_param_specs(cfg)}
    assert "to_v.weight" not in names and names["to_k.weight"] == (128, 32)


# -- nystrom ----------------------------------------------------------------

def test_nystrom_full_landmarks_exact_pinv_is_exact(rng):
    n = 6
    p = weights(rng, 8)
    x = Tensor(rng.standard_normal((2, n, 8)))
    ref = exact_attention(x, p, MixerConfig(heads=2, dim=8)).data
    cfg = MixerConfig(kind="nystrom", heads=2, dim=8, landmarks=n, exact_pinv=True)
    assert rel_frob(nystrom_attention(x, p, cfg).data, ref) < 1e-6


def test_nystrom_identical_tokens_single_landmark(rng):
    p = weights(rng, 8)
    tok = rng.standard_normal(8)
    x = np.stack([tok, tok])[None]
    out = nystrom_attention(Tensor(x), p, MixerConfig(kind="nystrom", heads=2, dim=8, landmarks=1)).data
    mean_value = value_path(x, p).mean(axis=1)
    assert np.allclose(out[0], mean_value, atol=1e-10)


def test_pinv_of_identity():
    assert np.allclose(iterative_pinv(Tensor(np.eye(4))).data, np.eye(4), atol=1e-8)


def test_pinv_on_well_conditioned_softmax(rng):
    for _ in range(10):
        a = T.softmax(Tensor(6 * np.eye(64) + rng.standard_normal((64, 64)))).data
        assert np.linalg.cond(a) < 10
        z = iterative_pinv(Tensor(a)).data
        assert np.max(np.abs(a @ z @ a - a)) < 1e-4


def test_landmarks_exceeding_length():
    with pytest.raises(ConfigError):
        nystrom_attention(Tensor(np.zeros((1, 3, 8))), weights(np.random.default_rng(0), 8),
                          MixerConfig(kind="nystrom", heads=2, dim=8, landmarks=4))


def test_segment_means_last_absorbs_remainder():
    p = segment_mean_matrix(10, 3)
    assert [int((row > 0).sum()) for row in p] == [3, 3, 4]
    assert np.allclose(p.sum(1), 1)


# -- fourier / mlp-mixer ----------------------------------------------------

def test_fourier_has_no_parameters():
    assert mixer_param_specs(MixerConfig(kind="fourier")) == []


def test_fourier_matches_naive_dft(rng):
    x = rng.standard_normal((1, 4, 3))
    assert np.max(np.abs(fourier_mix(Tensor(x)).data - naive_dft2_real(x))) < 1e-10


def _mixer_block_params(n, d, t, f, seed=0):
    cfg = MixerConfig(kind="mlpmix", dim=d, heads=1, token_mlp_dim=t, seq_len=n)
    specs = (norm_specs("norm1", d) + prefix_specs("mixer.", mixer_param_specs(cfg)) + norm_specs("norm2", d)
             + prefix_specs("mlp.", linear_specs("fc1", d, f) + linear_specs("fc2", f, d)))
    return cfg, specs, init_params(specs, seed)


def test_mixer_block_zero_branches_is_identity(rng):
    cfg, _, p = _mixer_block_params(5, 6, 7, 9)
    for k in ("mixer.fc2.weight", "mlp.fc2.weight"):
        p[k] = Tensor(np.zeros(p[k].shape))
    x = rng.standard_normal((2, 5, 6))
    assert np.array_equal(mlp_mixer_block(Tensor(x), p, cfg).data, x)


@pytest.mark.parametrize("n,d,t,f", [(5, 6, 7, 9), (1025, 128, 1024, 128), (3, 2, 1, 4)])
def test_mixer_block_count_closed_form(n, d, t, f):
    _, specs, _ = _mixer_block_params(n, d, t, f) if n < 100 else (None, None, None)
    if specs is None:
        cfg = MixerConfig(kind="mlpmix", dim=d, heads=1, token_mlp_dim=t, seq_len=n)
        specs = (norm_specs("norm1", d) + prefix_specs("mixer.", mixer_param_specs(cfg)) + norm_specs("norm2", d)
                 + prefix_specs("mlp.", linear_specs("fc1", d, f) + linear_specs("fc2", f, d)))
    assert sum(s.count for s in specs) == n * t + t + t * n + n + d * f + f + f * d + d + 2 * (2 * d)


def test_mixer_block_gradients(rng):
    cfg, _, p = _mixer_block_params(5, 6, 4, 8, seed=2)
    leaves = {k: Tensor(v.data + 0.3 * rng.standard_normal(v.shape), requires_grad=True) for k, v in p.items()}
    leaves["x"] = Tensor(rng.standard_normal((1, 5, 6)), requires_grad=True)
    r = Tensor(rng.standard_normal((1, 5, 6)))

    def f(**kw):
        x = kw.pop("x")
        return T.sum_(mlp_mixer_block(x, kw, cfg) * r)

    assert grad_check(f, leaves).worst < 1e-4


def test_mixer_block_length_mismatch(rng):
    cfg, _, p = _mixer_block_params(5, 6, 4, 8)
    with pytest.raises(DimensionError):
        mlp_mixer_block(Tensor(np.zeros((1, 4, 6))), p, cfg)


# -- dispatch ---------------------------------------------------------------

def test_dispatch_exact(rng):
    p = weights(rng, 8)
    x = Tensor(rng.standard_normal((1, 5, 8)))
    cfg = MixerConfig(heads=2, dim=8)
    assert np.array_equal(mix(x, cfg, p).data, exact_attention(x, p, cfg).data)


def test_unknown_kind():
    with pytest.raises(ConfigError):
        MixerConfig(kind="sparse")


def test_all_kinds_preserve_shape(rng):
    x = Tensor(rng.standard_normal((2, 9, 8)))
    for kind in MixerKind:
        cfg = MixerConfig(kind=kind, heads=2, dim=8, seq_len=9, landmarks=3, proj_rank=4, token_mlp_dim=5)
        assert mix(x, cfg, init_params(mixer_param_specs(cfg), 0)).shape == x.shape, kind


@pytest.mark.parametrize("kind", ["exact", "performer"])
def test_permutation_equivariance(rng, kind):
    p = weights(rng, 8)
    x = rng.standard_normal((1, 7, 8))
    perm = rng.permutation(7)
    cfg = MixerConfig(kind=kind, heads=2, dim=8)
    a = mix(Tensor(x), cfg, p).data
    b = mix(Tensor(x[:, perm]), cfg, p).data
    assert np.max(np.abs(a[:, perm] - b)) < 1e-8


def test_rope_rejected_for_parameter_free_mixer(rng):
    with pytest.raises(ConfigError):
        mix(Tensor(np.zeros((1, 4, 8))), MixerConfig(kind="fourier", heads=2, dim=8), {}, rope_base=10000.0)


def test_rope_changes_attention_but_not_shape(rng):
    p = weights(rng, 8)
    x = Tensor(rng.standard_normal((1, 6, 8)))
    cfg = MixerConfig(heads=2, dim=8)
    a, b = mix(x, cfg, p).data, mix(x, cfg, p, rope_base=10000.0).data
    assert a.shape == b.shape and not np.allclose(a, b)
