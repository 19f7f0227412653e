"""Named configurations as flat ``key=value`` maps.

Paper-geometry presets are named ``[hybrid-]<arch>-<dataset>[-rope]`` with
arch in vit/vip/vil/vin/fnet/mixer and dataset in cifar10 (32x32, 10 classes)
or tiny (64x64 Tiny-ImageNet geometry, 200 classes). ``tiny-*`` presets are
desk-scale models for synthetic data.
"""

from __future__ import annotations

ARCH_MIXER = {
    "vit": "exact",
    "vip": "performer",
    "vil": "linformer",
    "vin": "nystrom",
    "fnet": "fourier",
    "mixer": "mlpmix",
}

# registered-parameter totals reported for the CIFAR-10 and Tiny ImageNet tables
PAPER_TARGETS = {
    "vit-cifar10": 530_442,
    "vip-cifar10": 531_978,
    "vil-cifar10": 415_754,
    "vin-cifar10": 530_970,
    "fnet-cifar10": 267_786,
    "mixer-cifar10": 8_533_002,
    "hybrid-vit-cifar10": 623_178,
    "hybrid-vip-cifar10": 624_714,
    "hybrid-vil-cifar10": 508_490,
    "hybrid-vin-cifar10": 623_706,
    "hybrid-fnet-cifar10": 360_522,
    "hybrid-mixer-cifar10": 8_625_738,
    "vit-tiny": 556_104,
    "vip-tiny": 557_640,
    "vil-tiny": 441_416,
    "vin-tiny": 556_632,
    "fnet-tiny": 293_448,
    "mixer-tiny": 8_558_664,
    "hybrid-vit-tiny": 647_688,
    "hybrid-vip-tiny": 649_224,
    "hybrid-vil-tiny": 533_000,
    "hybrid-vin-tiny": 648_216,
    "hybrid-fnet-tiny": 385_032,
    "hybrid-mixer-tiny": 8_650_248,
}

_COMMON = {
    "model.dim": "128",
    "model.depth": "4",
    "model.mlp_dim": "256",
    "model.dropout": "0",
    "mixer.heads": "4",
    "embedding.stem_channels": "32,64,128",
    "train.lr": "0.001",
    "train.beta1": "0.9",
    "train.beta2": "0.999",
    "train.eps": "1e-8",
    "train.weight_decay": "0.01",
    "train.batch_size": "64",
}

_DATASETS = {
    "cifar10": {"model.image_shape": "3,32,32", "model.num_classes": "10", "patch": "1", "data.source": "cifar10"},
    "tiny": {"model.image_shape": "3,64,64", "model.num_classes": "200", "patch": "2", "data.source": "synthetic",
             "data.classes": "200", "data.image_size": "64"},
}

# per-mixer settings of the reference layouts that reproduce the reported counts
_MIXER_CONVENTIONS = {
    "exact": {},
    "performer": {"mixer.qkv_bias": "true"},
    "linformer": {"mixer.proj_rank": "256", "mixer.share_kv": "true", "mixer.one_kv_head": "true"},
    "nystrom": {"mixer.landmarks": "64", "mixer.pinv_iters": "6", "mixer.residual_conv_kernel": "33"},
    "fourier": {},
    "mlpmix": {"mixer.token_mlp_dim": "1024", "model.mlp_dim": "128", "position.kind": "none"},
}


def _paper_preset(arch: str, dataset: str, hybrid: bool, rope: bool) -> dict[str, str]:
    kind = ARCH_MIXER[arch]
    ds = _DATASETS[dataset]
    out = dict(_COMMON)
    out.update({k: v for k, v in ds.items() if k != "patch"})
    out["mixer.kind"] = kind
    out["position.kind"] = "rope" if rope else "learnable1d"
    if hybrid:
        out["embedding.kind"] = "conv_stem"
        out["embedding.stem_stride_first"] = ds["patch"]
    else:
        out["embedding.kind"] = "linear_patch"
        out["embedding.patch_size"] = ds["patch"]
    out.update(_MIXER_CONVENTIONS[kind])
    return out


def _tiny_preset(arch: str, hybrid: bool = False) -> dict[str, str]:
    kind = ARCH_MIXER[arch]
    out = {
        "model.dim": "32",
        "model.depth": "2",
        "model.mlp_dim": "64",
        "model.num_classes": "8",
        "model.image_shape": "3,16,16",
        "mixer.kind": kind,
        "mixer.heads": "4",
        "mixer.landmarks": "8",
        "mixer.proj_rank": "32",
        "mixer.token_mlp_dim": "64",
        "position.kind": "none" if kind == "mlpmix" else "learnable1d",
        "train.lr": "0.001",
        "train.weight_decay": "0.01",
        "train.batch_size": "64",
        "train.epochs": "75",
        "train.seed": "0",
        "data.source": "synthetic",
        "data.classes": "8",
        "data.n_per_class": "32",
        "data.image_size": "16",
        "data.seed": "0",
    }
    if hybrid:
        out.update({"embedding.kind": "conv_stem", "embedding.stem_channels": "8,16,32",
                    "embedding.stem_stride_first": "2"})
    else:
        out.update({"embedding.kind": "linear_patch", "embedding.patch_size": "2"})
    return out


def _build() -> dict[str, dict[str, str]]:
    presets: dict[str, dict[str, str]] = {}
    for arch, kind in ARCH_MIXER.items():
        for dataset in _DATASETS:
            for hybrid in (False, True):
                name = f"{'hybrid-' if hybrid else ''}{arch}-{dataset}"
                presets[name] = _paper_preset(arch, dataset, hybrid, rope=False)
                if kind in ("exact", "performer", "linformer", "nystrom"):
                    presets[name + "-rope"] = _paper_preset(arch, dataset, hybrid, rope=True)
        presets[f"tiny-{arch}"] = _tiny_preset(arch)
        presets[f"tiny-hybrid-{arch}"] = _tiny_preset(arch, hybrid=True)
    return presets


PRESETS = _build()


def paper_target(name: str) -> int | None:
    """Reported registered-parameter count for a preset; rope variants share their base target."""
    return PAPER_TARGETS.get(name.removesuffix("-rope"))
