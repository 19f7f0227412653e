"""Desk-scale supervised training: datasets, Adam, cross-entropy, top-k metrics.

Randomness is keyed by step and epoch index: epoch ``e`` shuffles with
``default_rng([seed, e])`` and dropout at step ``s`` draws from
``default_rng([seed, s, 1])``. A run resumed from a checkpoint therefore replays
exactly the batches and masks of the uninterrupted run.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

from . import tensor as T
from .errors import ConfigError, IngestionError, NonFiniteError, VixError
from .model import Model, forward
from .tensor import Tape, Tensor

CIFAR_RECORD = 1 + 3 * 32 * 32
CIFAR_RECORDS_PER_FILE = 10_000
CIFAR_TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
CIFAR_TEST_FILE = "test_batch.bin"


class TrainingError(VixError, RuntimeError):
    """Training aborted (e.g. the loss became NaN)."""


# --------------------------------------------------------------------------
# data
# --------------------------------------------------------------------------

@dataclass
class DatasetHandle:
    images: np.ndarray  # [N, C, H, W], standardized
    labels: np.ndarray  # [N] int64
    split: str
    mean: np.ndarray  # per-channel constants from the training split
    std: np.ndarray
    num_classes: int

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise IngestionError(f"{len(self.images)} images but {len(self.labels)} labels")

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, n: int) -> "DatasetHandle":
        return replace(self, images=self.images[:n], labels=self.labels[:n])


def channel_stats(images01: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = images01.mean(axis=(0, 2, 3))
    std = images01.std(axis=(0, 2, 3))
    return mean, np.where(std > 0, std, 1.0)


def standardize(images01: np.ndarray, mean: np.ndarray, std: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    out = np.subtract(images01, mean[None, :, None, None], out=out)
    return np.divide(out, std[None, :, None, None], out=out)


def _check_cifar_file(path: Path) -> None:
    if not path.is_file():
        raise IngestionError(f"missing CIFAR-10 batch file: {path}")
    expected = CIFAR_RECORDS_PER_FILE * CIFAR_RECORD
    size = path.stat().st_size
    if size != expected:
        raise IngestionError(f"{path}: expected {expected} bytes ({CIFAR_RECORDS_PER_FILE} x {CIFAR_RECORD}), found {size}")


def read_cifar10_batch(path: Path, limit: int | None = None,
                       out: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Parse one binary batch: records of 1 label byte + 3072 plane-major RGB bytes.

    The file size is always validated in full; ``limit`` parses only the leading
    records. Pixels are scaled to [0, 1], written into ``out`` when given.
    """
    path = Path(path)
    _check_cifar_file(path)
    count = CIFAR_RECORDS_PER_FILE if limit is None else min(limit, CIFAR_RECORDS_PER_FILE)
    raw = np.fromfile(path, dtype=np.uint8, count=count * CIFAR_RECORD).reshape(count, CIFAR_RECORD)
    labels = raw[:, 0].astype(np.int64)
    if count and labels.max() > 9:
        raise IngestionError(f"{path}: label {labels.max()} outside [0, 9]")
    if out is None:
        out = np.empty((count, 3, 32, 32))
    np.divide(raw[:, 1:].reshape(count, 3, 32, 32), 255.0, out=out)
    return out, labels


def _read_split(d: Path, names, limit: int | None) -> tuple[np.ndarray, np.ndarray]:
    total = len(names) * CIFAR_RECORDS_PER_FILE
    n = total if limit is None else min(limit, total)
    images = np.empty((n, 3, 32, 32))
    labels = []
    for i, name in enumerate(names):
        lo = i * CIFAR_RECORDS_PER_FILE
        if lo >= n:
            break
        hi = min(n, lo + CIFAR_RECORDS_PER_FILE)
        labels.append(read_cifar10_batch(d / name, hi - lo, out=images[lo:hi])[1])
    return images, np.concatenate(labels)


def load_cifar10(directory, limit: int | None = None) -> tuple[DatasetHandle, DatasetHandle]:
    """Both splits, standardized with per-channel constants of the loaded training images.

    Every batch file is size-checked up front; ``limit`` caps the records parsed
    per split, taking them in file order.
    """
    d = Path(directory)
    if not d.is_dir():
        raise IngestionError(f"CIFAR-10 directory not found: {d} (expected {', '.join(CIFAR_TRAIN_FILES)}, {CIFAR_TEST_FILE})")
    for name in (*CIFAR_TRAIN_FILES, CIFAR_TEST_FILE):
        _check_cifar_file(d / name)
    train_x, train_y = _read_split(d, CIFAR_TRAIN_FILES, limit)
    test_x, test_y = _read_split(d, (CIFAR_TEST_FILE,), limit)
    mean, std = channel_stats(train_x)
    train = DatasetHandle(standardize(train_x, mean, std, out=train_x), train_y, "train", mean, std, 10)
    test = DatasetHandle(standardize(test_x, mean, std, out=test_x), test_y, "test", mean, std, 10)
    return train, test


@dataclass(frozen=True)
class SynthSpec:
    classes: int = 8
    n_per_class: int = 32
    height: int = 16
    width: int = 16
    channels: int = 3
    seed: int = 0
    noise: float = 0.3


def synth_images01(spec: SynthSpec) -> tuple[np.ndarray, np.ndarray]:
    """Oriented sinusoidal gratings, one orientation/colour pattern per class, plus noise."""
    if spec.classes < 2:
        raise ConfigError("synthetic data needs at least 2 classes")
    rng = np.random.default_rng(spec.seed)
    yy, xx = np.meshgrid(np.arange(spec.height), np.arange(spec.width), indexing="ij")
    n = spec.classes * spec.n_per_class
    images = np.empty((n, spec.channels, spec.height, spec.width))
    labels = np.repeat(np.arange(spec.classes), spec.n_per_class)
    freq = 2.0 * np.pi / max(4.0, min(spec.height, spec.width) / 2.0)
    for i, c in enumerate(labels):
        theta = np.pi * c / spec.classes
        phase = rng.uniform(0, 2 * np.pi)
        wave = np.sin(freq * (xx * np.cos(theta) + yy * np.sin(theta)) + phase)
        for ch in range(spec.channels):
            tint = 0.5 + 0.5 * np.cos(2 * np.pi * (c / spec.classes + ch / spec.channels))
            images[i, ch] = 0.5 + 0.35 * tint * wave
    images += spec.noise * 0.25 * rng.standard_normal(images.shape)
    return np.clip(images, 0.0, 1.0), labels


def synth_dataset(spec: SynthSpec, split: str = "train") -> DatasetHandle:
    x, y = synth_images01(spec)
    mean, std = channel_stats(x)
    return DatasetHandle(standardize(x, mean, std), y, split, mean, std, spec.classes)


def synth_split(spec: SynthSpec, stats_from: DatasetHandle, split: str = "test") -> DatasetHandle:
    """Another synthetic draw standardized with ``stats_from``'s constants."""
    x, y = synth_images01(spec)
    return DatasetHandle(standardize(x, stats_from.mean, stats_from.std), y, split,
                         stats_from.mean, stats_from.std, spec.classes)


# --------------------------------------------------------------------------
# optimization
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    decoupled_weight_decay: bool = False
    batch_size: int = 64
    epochs: int = 1
    max_steps: int | None = None
    seed: int = 0
    log_every: int = 10

    def __post_init__(self):
        if self.lr <= 0 or self.eps <= 0 or self.weight_decay < 0:
            raise ConfigError("train.lr and train.eps must be positive, weight_decay non-negative")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigError("train.beta1 and train.beta2 must lie in (0, 1)")
        if self.batch_size < 1 or self.epochs < 1 or self.log_every < 1:
            raise ConfigError("train.batch_size, epochs and log_every must be positive")
        if self.max_steps is not None and self.max_steps < 1:
            raise ConfigError("train.max_steps must be positive")


@dataclass
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, Tensor], grads: dict[str, np.ndarray], state: AdamState,
              tcfg: TrainConfig) -> None:
    """One Adam update in place. Weight decay is L2 added to the gradient unless decoupled."""
    state.step += 1
    t = state.step
    b1, b2 = tcfg.beta1, tcfg.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros(p.shape)
        if g.shape != p.shape:
            raise T.DimensionError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        if tcfg.weight_decay and not tcfg.decoupled_weight_decay:
            g = g + tcfg.weight_decay * p.data
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros(p.shape)
            v = np.zeros(p.shape)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        state.m[name], state.v[name] = m, v
        update = tcfg.lr * (m / c1) / (np.sqrt(v / c2) + tcfg.eps)
        if tcfg.weight_decay and tcfg.decoupled_weight_decay:
            update = update + tcfg.lr * tcfg.weight_decay * p.data
        p.data = p.data - update


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------

@dataclass
class Metrics:
    loss: float
    top1: float
    top5: float
    step: int = 0
    epoch: int = 0
    split: str = "train"
    wall_ms: float = 0.0

    def record(self) -> dict:
        return {
            "step": self.step,
            "split": self.split,
            "loss": self.loss,
            "top1": self.top1,
            "top5": self.top5,
            "wall_ms": round(self.wall_ms, 3),
        }


def topk_hits(logits: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    """True where the label is among the k largest logits; ties go to the lower class index."""
    order = np.argsort(-logits, axis=1, kind="stable")[:, :k]
    return (order == labels[:, None]).any(axis=1)


def cross_entropy_np(logits: np.ndarray, labels: np.ndarray) -> float:
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return T._centered_mean(-logp[np.arange(len(labels)), labels])


def metrics_from_logits(logits: np.ndarray, labels: np.ndarray, **kw) -> Metrics:
    k5 = min(5, logits.shape[1])
    return Metrics(
        loss=cross_entropy_np(logits, labels),
        top1=float(topk_hits(logits, labels, 1).mean()),
        top5=float(topk_hits(logits, labels, k5).mean()),
        **kw,
    )


def evaluate(model: Model, data: DatasetHandle, batch_size: int = 64) -> Metrics:
    start = time.perf_counter()
    chunks = []
    with T.no_grad():
        for i in range(0, len(data), batch_size):
            chunks.append(forward(model, Tensor(data.images[i : i + batch_size])).data)
    logits = np.concatenate(chunks)
    return metrics_from_logits(logits, data.labels, split=data.split,
                               wall_ms=1e3 * (time.perf_counter() - start))


# --------------------------------------------------------------------------
# training loop
# --------------------------------------------------------------------------

def epoch_order(n: int, seed: int, epoch: int) -> np.ndarray:
    return np.random.default_rng([seed, epoch]).permutation(n)


def iter_batches(n: int, tcfg: TrainConfig, start_step: int = 0) -> Iterator[tuple[int, int, np.ndarray]]:
    """Yield ``(step, epoch, indices)`` from ``start_step`` on; batches never straddle epochs."""
    per_epoch = math.ceil(n / tcfg.batch_size)
    total = per_epoch * tcfg.epochs
    if tcfg.max_steps is not None:
        total = min(total, tcfg.max_steps)
    step = start_step
    while step < total:
        epoch, j = divmod(step, per_epoch)
        order = epoch_order(n, tcfg.seed, epoch)
        yield step, epoch, order[j * tcfg.batch_size : (j + 1) * tcfg.batch_size]
        step += 1


def _diagnose_nan(model: Model, x: np.ndarray, y: np.ndarray, rng) -> str:
    try:
        with T.no_grad(), T.detect_anomaly():
            T.cross_entropy(forward(model, Tensor(x), rng), y)
    except NonFiniteError as err:
        return err.op
    return "unknown"


def train_step(model: Model, x: np.ndarray, y: np.ndarray, state: AdamState, tcfg: TrainConfig,
               step: int) -> float:
    rng = np.random.default_rng([tcfg.seed, step, 1]) if model.config.dropout > 0 else None
    model.zero_grad()
    with Tape() as tape:
        loss = T.cross_entropy(forward(model, Tensor(x), rng), y)
        value = float(loss.data)
        if not math.isfinite(value):
            rng = np.random.default_rng([tcfg.seed, step, 1]) if rng is not None else None
            op = _diagnose_nan(model, x, y, rng)
            raise TrainingError(f"non-finite loss at step {step}; first non-finite op: {op}")
        tape.backward(loss)
    adam_step(model.params, {k: p.grad for k, p in model.params.items() if p.grad is not None}, state, tcfg)
    return value


@dataclass
class TrainResult:
    history: list[Metrics]
    state: AdamState
    losses: list[float]


def train(model: Model, data: DatasetHandle, tcfg: TrainConfig, state: AdamState | None = None,
          on_metrics: Callable[[Metrics], None] | None = None,
          stop_at: int | None = None) -> TrainResult:
    """Minibatch Adam on cross-entropy. Resumes from ``state.step`` when a state is given.

    ``stop_at`` halts before that global step (used to split a run for checkpointing).
    """
    state = state or AdamState()
    history: list[Metrics] = []
    losses: list[float] = []
    start = time.perf_counter()
    for step, epoch, idx in iter_batches(len(data), tcfg, state.step):
        if stop_at is not None and step >= stop_at:
            break
        x, y = data.images[idx], data.labels[idx]
        loss = train_step(model, x, y, state, tcfg, step)
        losses.append(loss)
        if (step + 1) % tcfg.log_every == 0:
            with T.no_grad():
                logits = forward(model, Tensor(x)).data
            m = metrics_from_logits(logits, y, step=step + 1, epoch=epoch, split="train",
                                    wall_ms=1e3 * (time.perf_counter() - start))
            m.loss = loss
            history.append(m)
            if on_metrics:
                on_metrics(m)
    return TrainResult(history, state, losses)


class MetricsLog:
    """Line-delimited JSON metrics sink."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "a", encoding="utf-8")

    def __call__(self, m: Metrics) -> None:
        self._fh.write(json.dumps(m.record()) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def train_config_dict(tcfg: TrainConfig) -> dict:
    return asdict(tcfg)


def cifar_dir_from_env() -> str | None:
    return os.environ.get("VIX_CIFAR10_DIR")
