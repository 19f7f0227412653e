"""Flat ``key=value`` run configuration: parsing, preset expansion, typed resolution.

Resolution order: ``preset`` keys first, then the file's own keys, then
command-line overrides. The resolved flat map is what gets echoed into reports,
so feeding it back in reproduces the run.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping

from .embeddings import EmbeddingConfig, PositionConfig
from .errors import ConfigError
from .mixers import MixerConfig
from .model import ModelConfig
from .presets import PRESETS
from .training import SynthSpec, TrainConfig


def _bool(v: str) -> bool:
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _ints(v: str) -> tuple[int, ...]:
    return tuple(int(x) for x in v.replace("x", ",").split(",") if x.strip())


def _opt_int(v: str) -> int | None:
    return None if v.strip().lower() in ("", "none", "null") else int(v)


_str = str.strip

# key -> (parser, section, field)
_SCHEMA: dict[str, tuple[Callable[[str], Any], str, str]] = {
    "model.dim": (int, "model", "dim"),
    "model.depth": (int, "model", "depth"),
    "model.mlp_dim": (int, "model", "mlp_dim"),
    "model.num_classes": (int, "model", "num_classes"),
    "model.image_shape": (_ints, "model", "image_shape"),
    "model.dropout": (float, "model", "dropout"),
    "model.norm_eps": (float, "model", "norm_eps"),
    "model.seed": (int, "run", "model_seed"),
    "embedding.kind": (_str, "embedding", "kind"),
    "embedding.patch_size": (int, "embedding", "patch_size"),
    "embedding.stem_channels": (_ints, "embedding", "stem_channels"),
    "embedding.stem_stride_first": (int, "embedding", "stem_stride_first"),
    "position.kind": (_str, "position", "kind"),
    "position.max_len": (_opt_int, "position", "max_len"),
    "position.rope_base": (float, "position", "rope_base"),
    "position.keep_table": (_bool, "position", "keep_table"),
    "mixer.kind": (_str, "mixer", "kind"),
    "mixer.heads": (int, "mixer", "heads"),
    "mixer.landmarks": (int, "mixer", "landmarks"),
    "mixer.proj_rank": (int, "mixer", "proj_rank"),
    "mixer.pinv_iters": (int, "mixer", "pinv_iters"),
    "mixer.token_mlp_dim": (_opt_int, "mixer", "token_mlp_dim"),
    "mixer.qkv_bias": (_bool, "mixer", "qkv_bias"),
    "mixer.share_kv": (_bool, "mixer", "share_kv"),
    "mixer.one_kv_head": (_bool, "mixer", "one_kv_head"),
    "mixer.residual_conv_kernel": (int, "mixer", "residual_conv_kernel"),
    "mixer.exact_pinv": (_bool, "mixer", "exact_pinv"),
    "mixer.denom_eps": (float, "mixer", "denom_eps"),
    "train.lr": (float, "train", "lr"),
    "train.beta1": (float, "train", "beta1"),
    "train.beta2": (float, "train", "beta2"),
    "train.eps": (float, "train", "eps"),
    "train.weight_decay": (float, "train", "weight_decay"),
    "train.decoupled_weight_decay": (_bool, "train", "decoupled_weight_decay"),
    "train.batch_size": (int, "train", "batch_size"),
    "train.epochs": (int, "train", "epochs"),
    "train.max_steps": (_opt_int, "train", "max_steps"),
    "train.seed": (int, "train", "seed"),
    "train.log_every": (int, "train", "log_every"),
    "data.source": (_str, "data", "source"),
    "data.dir": (_str, "data", "dir"),
    "data.limit": (_opt_int, "data", "limit"),
    "data.classes": (int, "data", "classes"),
    "data.n_per_class": (int, "data", "n_per_class"),
    "data.image_size": (int, "data", "image_size"),
    "data.seed": (int, "data", "seed"),
    "data.noise": (float, "data", "noise"),
}

KNOWN_KEYS = frozenset(_SCHEMA) | {"preset"}
DATA_SOURCES = ("synthetic", "cifar10")


@dataclass(frozen=True)
class DataConfig:
    source: str = "synthetic"
    dir: str | None = None
    limit: int | None = None
    classes: int = 8
    n_per_class: int = 32
    image_size: int = 16
    seed: int = 0
    noise: float = 0.3

    def __post_init__(self):
        if self.source not in DATA_SOURCES:
            raise ConfigError(f"data.source must be one of {', '.join(DATA_SOURCES)}, got {self.source!r}")
        if self.limit is not None and self.limit < 1:
            raise ConfigError("data.limit must be positive")

    def synth_spec(self, channels: int = 3, seed_offset: int = 0) -> SynthSpec:
        return SynthSpec(self.classes, self.n_per_class, self.image_size, self.image_size, channels,
                         self.seed + seed_offset, self.noise)


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig
    train: TrainConfig
    data: DataConfig
    model_seed: int
    flat: dict[str, str]
    preset: str | None = None


class Flat(dict):
    """``key -> value`` strings that remember where each key was set."""

    def __init__(self, *args, **kw):
        super().__init__(*args, **kw)
        self.origin: dict[str, str] = {}


def parse_lines(lines: Iterable[str], source: str = "<config>") -> Flat:
    """Parse ``key=value`` lines; ``#`` starts a comment. Errors carry ``source:line``."""
    out = Flat()
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
        out.origin[key] = f"{source}:{lineno}"
    return out


def parse_file(path) -> Flat:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {p}") from None
    except UnicodeDecodeError as err:
        raise ConfigError(f"{p}: not valid UTF-8 ({err.reason})") from None
    return parse_lines(text.splitlines(), str(p))


def parse_overrides(items: Iterable[str]) -> Flat:
    return parse_lines(items, "--set")


def expand(flat: Mapping[str, str], overrides: Mapping[str, str] | None = None,
           preset: str | None = None) -> tuple[dict[str, str], str | None]:
    """Merge preset keys, file keys and overrides, in that order of precedence (last wins)."""
    merged = {**dict(flat), **dict(overrides or {})}
    name = preset or merged.pop("preset", None)
    merged.pop("preset", None)
    base: dict[str, str] = {}
    if name is not None:
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}")
        base = dict(PRESETS[name])
    base.update(merged)
    return base, name


def _origins(*flats) -> dict[str, str]:
    out: dict[str, str] = {}
    for f in flats:
        out.update(getattr(f, "origin", {}))
    return out


def resolve(flat: Mapping[str, str], overrides: Mapping[str, str] | None = None,
            preset: str | None = None) -> RunConfig:
    merged, name = expand(flat, overrides, preset)
    origin = _origins(flat, overrides)
    sections: dict[str, dict[str, Any]] = {s: {} for s in ("model", "embedding", "position", "mixer", "train", "data", "run")}
    for key, value in merged.items():
        if key not in _SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
        parse, section, fld = _SCHEMA[key]
        try:
            sections[section][fld] = parse(value)
        except ValueError as err:
            where = origin.get(key, f"preset {name}" if name else "<config>")
            raise ConfigError(f"{where}: {key}={value!r}: {err}") from None
    m = sections["model"]
    dim = m.pop("dim", 128)
    try:
        model = ModelConfig(
            embedding=EmbeddingConfig(dim=dim, **sections["embedding"]),
            position=PositionConfig(**sections["position"]),
            mixer=MixerConfig(dim=dim, **sections["mixer"]),
            **m,
        )
        train = TrainConfig(**sections["train"])
        data = DataConfig(**sections["data"])
    except TypeError as err:
        raise ConfigError(str(err)) from None
    return RunConfig(model, train, data, sections["run"].get("model_seed", train.seed), merged, name)


def load(path=None, overrides: Iterable[str] = (), preset: str | None = None) -> RunConfig:
    flat = parse_file(path) if path else {}
    return resolve(flat, parse_overrides(overrides), preset)


def model_config_for(preset: str, **overrides: str) -> ModelConfig:
    return resolve({}, {k.replace("__", "."): str(v) for k, v in overrides.items()}, preset).model


def dump(flat: Mapping[str, str]) -> str:
    return "".join(f"{k}={flat[k]}\n" for k in sorted(flat))


def replace_train(run: RunConfig, **kw) -> RunConfig:
    return dataclasses.replace(run, train=dataclasses.replace(run.train, **kw))
