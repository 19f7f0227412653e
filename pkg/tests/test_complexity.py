import numpy as np
import pytest

from vix import tensor as T
from vix.complexity import (
    estimate_activation_memory,
    estimate_flops,
    estimate_mixer_peak,
    mixer_macs,
)
from vix.configfile import model_config_for
from vix.mixers import MixerConfig, MixerKind, mix, mixer_param_specs
from vix.model import build_model
from vix.params import init_params
from vix.tensor import Tensor

LENGTHS = (256, 512, 1024)
IMAGE_FOR = {256: "16,16", 512: "16,32", 1024: "32,32"}


def bench_mixer(kind, n, d=32, heads=4):
    return MixerConfig(kind=kind, dim=d, heads=heads, seq_len=n, proj_rank=64, landmarks=16, token_mlp_dim=64)


def measured_mixer_peak(cfg, n, batch=1):
    p = init_params(mixer_param_specs(cfg), 0)
    x = Tensor(np.random.default_rng(0).standard_normal((batch, n, cfg.dim)))
    with T.no_grad(), T.track_memory() as tr:
        out = mix(x, cfg, p)
        del out
    return tr.peak


def test_exact_score_term_at_reference_geometry():
    rep = estimate_activation_memory(model_config_for("vit-cifar10"))
    assert rep.score_term == 4 * 1025**2 == 4_202_500


def test_exact_peak_ratio_band():
    cfg = model_config_for("vit-cifar10")
    r = estimate_activation_memory(cfg, 512).peak_scalars / estimate_activation_memory(cfg, 256).peak_scalars
    assert 3.5 <= r <= 4.1


def test_non_exact_mixers_have_no_score_term():
    for name in ("fnet-cifar10", "vip-cifar10", "vin-cifar10", "vil-cifar10", "mixer-cifar10"):
        assert estimate_activation_memory(model_config_for(name)).score_term == 0


def test_fourier_estimate_is_linear_in_length():
    cfg = bench_mixer("fourier", 256)
    assert estimate_mixer_peak(cfg, 512) == 2 * estimate_mixer_peak(cfg, 256)


def test_exact_quadratic_mac_term():
    cfg = MixerConfig(dim=128, heads=4)
    macs = mixer_macs(cfg, 1025)
    assert macs["scores"] + macs["weighted_values"] == 2 * 4 * 1025**2 * 32


def test_performer_has_no_quadratic_mac_term():
    cfg = MixerConfig(kind="performer", dim=128, heads=4)
    a, b = mixer_macs(cfg, 300), mixer_macs(cfg, 600)
    assert all(b[k] == 2 * a[k] for k in a)


@pytest.mark.parametrize("n", [512, 1024, 2048])
def test_performer_work_doubles_with_length(n):
    cfg = model_config_for("vip-cifar10")
    a, b = estimate_flops(cfg, n), estimate_flops(cfg, 2 * n)
    work = lambda f: f["mixer"] + f["mlp"]
    assert abs(work(b) / work(a) - 2) <= 0.1


def test_flops_total_is_sum_of_parts():
    f = estimate_flops(model_config_for("hybrid-vin-cifar10"))
    assert f["total"] == f["embed"] + f["mixer"] + f["mlp"] + f["head"]


@pytest.mark.parametrize("kind", [k.value for k in MixerKind])
@pytest.mark.parametrize("n", LENGTHS)
def test_mixer_estimate_within_2x(kind, n):
    cfg = bench_mixer(kind, n)
    measured = measured_mixer_peak(cfg, n, batch=2)
    assert 0.5 <= estimate_mixer_peak(cfg, n, batch=2) / measured <= 2


@pytest.mark.parametrize("kind", [k.value for k in MixerKind])
@pytest.mark.parametrize("n", LENGTHS)
def test_forward_estimate_within_2x(kind, n):
    over = dict(mixer__kind=kind, model__image_shape=f"3,{IMAGE_FOR[n]}", model__dim="32", model__mlp_dim="64",
                model__depth="2", mixer__proj_rank="64", mixer__landmarks="16", mixer__token_mlp_dim="64")
    if kind in ("fourier", "mlpmix"):
        over["position__kind"] = "none"
    cfg = model_config_for("hybrid-vit-cifar10", embedding__stem_channels="8,16,32", **over)
    model = build_model(cfg)
    x = Tensor(np.random.default_rng(0).standard_normal((2, *cfg.image_shape)))
    with T.no_grad(), T.track_memory() as tr:
        out = model(x)
        del out
    est = estimate_activation_memory(cfg, batch=2)
    assert 0.5 <= est.peak_scalars / tr.peak <= 2


def test_growth_bands():
    peaks = {k: [measured_mixer_peak(MixerConfig(kind=k, dim=128, heads=4, seq_len=n, proj_rank=256, landmarks=64), n)
                 for n in LENGTHS]
             for k in ("exact", "performer", "linformer", "nystrom")}
    g = {k: [v[1] / v[0], v[2] / v[1]] for k, v in peaks.items()}
    assert min(g["exact"]) >= 3.5
    for k in ("performer", "linformer", "nystrom"):
        assert max(g[k]) <= 2.5, (k, g[k])


def test_report_dict():
    d = estimate_activation_memory(model_config_for("vit-cifar10"), batch=2).to_dict()
    assert d["peak_bytes"] == 8 * d["peak_scalars"]
    assert [s["name"] for s in d["stages"]] == ["embed", "layer.mixer", "layer.mlp", "head"]
