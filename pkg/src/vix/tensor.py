"""Dense float64 tensors with tape-based reverse-mode differentiation.

Every op computes its forward value with numpy and, when any input requires a
gradient and grad mode is on, appends a node to the thread's active :class:`Tape`.
Gradients are accumulated by :meth:`Tape.backward`, which walks the nodes in
reverse creation order.

Live tensor storage can be observed with :func:`track_memory`; the counter is
keyed by the underlying numpy buffer, so views do not count twice.
"""

from __future__ import annotations

import contextlib
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import ContractError, DimensionError, NonFiniteError

DTYPE = np.float64

# tanh-approximation GELU constants (frozen; checkpoints depend on them)
GELU_C = math.sqrt(2.0 / math.pi)
GELU_A = 0.044715


# --------------------------------------------------------------------------
# per-thread state
# --------------------------------------------------------------------------

class _State(threading.local):
    def __init__(self):
        self.grad_enabled = True
        self.anomaly = False
        self.tapes: list[Tape] = []


_state = _State()


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    prev = _state.grad_enabled
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = prev


def is_grad_enabled() -> bool:
    return _state.grad_enabled


@contextlib.contextmanager
def detect_anomaly() -> Iterator[None]:
    """Raise :class:`NonFiniteError` naming the first op that emits NaN/Inf."""
    prev = _state.anomaly
    _state.anomaly = True
    try:
        yield
    finally:
        _state.anomaly = prev


# --------------------------------------------------------------------------
# live-storage counter
# --------------------------------------------------------------------------

class MemoryTracker:
    """Counts scalars held by live tensors created while the tracker is active."""

    def __init__(self):
        self.live = 0
        self.peak = 0
        self._roots: dict[int, list] = {}

    def _acquire(self, arr: np.ndarray) -> int:
        root = arr
        while isinstance(root.base, np.ndarray):
            root = root.base
        key = id(root)
        entry = self._roots.get(key)
        if entry is None:
            # holding the root keeps id(root) unique while counted
            self._roots[key] = [1, root.size, root]
            self.live += root.size
            if self.live > self.peak:
                self.peak = self.live
        else:
            entry[0] += 1
        return key

    def _release(self, key: int) -> None:
        entry = self._roots.get(key)
        if entry is None:
            return
        entry[0] -= 1
        if entry[0] == 0:
            self.live -= entry[1]
            del self._roots[key]


_tracker: MemoryTracker | None = None


@contextlib.contextmanager
def track_memory() -> Iterator[MemoryTracker]:
    """Measure peak live tensor scalars for tensors created inside the block.

    Tensors that already existed on entry (inputs, parameters) are not counted,
    so ``peak`` is the high-water mark above the entry baseline.
    """
    global _tracker
    prev = _tracker
    tracker = MemoryTracker()
    _tracker = tracker
    try:
        yield tracker
    finally:
        _tracker = prev


# --------------------------------------------------------------------------
# Tensor and Tape
# --------------------------------------------------------------------------

class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "node", "_mem", "__weakref__")
    # make ndarray <op> Tensor dispatch to the Tensor's reflected operator
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=DTYPE)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.node: Node | None = None
        self._mem = None
        if _tracker is not None:
            self._mem = (_tracker, _tracker._acquire(arr))

    def __del__(self):
        mem = self._mem
        if mem is not None:
            mem[0]._release(mem[1])

    # -- basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        rg = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{rg})"

    # -- operators --------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)


@dataclass(eq=False)
class Node:
    op: str
    parents: tuple[Tensor, ...]
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]
    index: int


@dataclass(eq=False)
class Tape:
    """Append-only record of differentiable ops.

    Use as a context manager to scope recording; otherwise a per-thread default
    tape is used. :meth:`backward` clears the tape unless ``retain`` is set.
    """

    nodes: list[Node] = field(default_factory=list)
    grads: dict[int, np.ndarray] = field(default_factory=dict)
    keep_grads: bool = False

    def __enter__(self) -> "Tape":
        _state.tapes.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _state.tapes.pop()

    def record(self, out: Tensor, op: str, parents: tuple[Tensor, ...], fn) -> Node:
        node = Node(op, parents, fn, len(self.nodes))
        self.nodes.append(node)
        out.node = node
        return node

    def clear(self) -> None:
        self.nodes = []
        self.grads = {}

    def backward(self, loss: Tensor, retain: bool = False) -> None:
        if loss.data.size != 1:
            raise ContractError(f"backward requires a scalar loss, got shape {loss.shape}")
        if not loss.requires_grad:
            raise ContractError("loss does not depend on any tensor that requires grad")
        seed = np.ones_like(loss.data)
        if loss.node is None:
            _accumulate_leaf(loss, seed)
            return
        pending: dict[int, np.ndarray] = {id(loss.node): seed}
        self.grads = {}
        stop = loss.node.index
        for node in reversed(self.nodes[: stop + 1]):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            if self.keep_grads:
                self.grads[node.index] = g
            for parent, pg in zip(node.parents, node.backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                pg = _unbroadcast(pg, parent.shape)
                if parent.node is None:
                    _accumulate_leaf(parent, pg)
                else:
                    key = id(parent.node)
                    prev = pending.get(key)
                    pending[key] = pg if prev is None else prev + pg
        if not retain:
            self.nodes = []


_default = threading.local()


def current_tape() -> Tape:
    if _state.tapes:
        return _state.tapes[-1]
    tape = getattr(_default, "tape", None)
    if tape is None:
        tape = _default.tape = Tape()
    return tape


def backward(loss: Tensor, retain: bool = False) -> None:
    current_tape().backward(loss, retain=retain)


def _accumulate_leaf(t: Tensor, g: np.ndarray) -> None:
    g = np.array(g, dtype=DTYPE, copy=True).reshape(t.shape)
    t.grad = g if t.grad is None else t.grad + g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data: np.ndarray, op: str, parents: tuple[Tensor, ...], fn) -> Tensor:
    if _state.anomaly and not np.all(np.isfinite(data)):
        raise NonFiniteError(op)
    out = Tensor(data)
    if _state.grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        current_tape().record(out, op, parents, fn)
    return out


def parameter(data) -> Tensor:
    return Tensor(np.array(data, dtype=DTYPE, copy=True), requires_grad=True)


# --------------------------------------------------------------------------
# elementwise arithmetic
# --------------------------------------------------------------------------

def _broadcast_check(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} are not broadcastable") from None


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, "add")
    return _result(a.data + b.data, "add", (a, b), lambda g: (g, g))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, "sub")
    return _result(a.data - b.data, "sub", (a, b), lambda g: (g, -g))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, "mul")
    ad, bd = a.data, b.data
    return _result(ad * bd, "mul", (a, b), lambda g: (g * bd, g * ad))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, "div")
    ad, bd = a.data, b.data
    out = ad / bd
    return _result(out, "div", (a, b), lambda g: (g / bd, -g * out / bd))


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _result(-a.data, "neg", (a,), lambda g: (-g,))


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    c = float(c)
    return _result(a.data * c, "scale", (a,), lambda g: (g * c,))


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _result(out, "exp", (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    return _result(np.log(ad), "log", (a,), lambda g: (g / ad,))


def abs_(a) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    return _result(np.abs(ad), "abs", (a,), lambda g: (g * np.sign(ad),))


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0  # subgradient 0 at 0
    return _result(np.where(mask, a.data, 0.0), "relu", (a,), lambda g: (g * mask,))


def _gelu_derivative(x: np.ndarray) -> np.ndarray:
    u = GELU_C * (x + GELU_A * x**3)
    t = np.tanh(u)
    du = GELU_C * (1.0 + 3.0 * GELU_A * x**2)
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du


def gelu(a) -> Tensor:
    """GELU, tanh approximation."""
    a = as_tensor(a)
    x = a.data
    out = 0.5 * x * (1.0 + np.tanh(GELU_C * (x + GELU_A * x**3)))
    return _result(out, "gelu", (a,), lambda g: (g * _gelu_derivative(x),))


def dropout(a, p: float, rng: np.random.Generator | None) -> Tensor:
    a = as_tensor(a)
    if p <= 0.0 or rng is None:
        return a
    keep = (rng.random(a.shape) >= p) / (1.0 - p)
    return _result(a.data * keep, "dropout", (a,), lambda g: (g * keep,))


# --------------------------------------------------------------------------
# reductions
# --------------------------------------------------------------------------

def _norm_axes(axis, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    out = []
    for ax in axis:
        if not -ndim <= ax < ndim:
            raise DimensionError(f"axis {ax} out of range for ndim {ndim}")
        out.append(ax % ndim)
    return tuple(sorted(out))


def sum_(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _norm_axes(axis, a.ndim)
    shape = a.shape

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, shape),)

    return _result(np.sum(a.data, axis=axes, keepdims=keepdims), "sum", (a,), bw)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _norm_axes(axis, a.ndim)
    count = int(np.prod([a.shape[i] for i in axes])) if axes else 1
    shape = a.shape

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g / count, shape),)

    return _result(np.mean(a.data, axis=axes, keepdims=keepdims), "mean", (a,), bw)


def amax(a, axis: int, keepdims: bool = False) -> Tensor:
    """Max along one axis; the gradient goes to the first maximal entry."""
    a = as_tensor(a)
    (ax,) = _norm_axes(axis, a.ndim)
    idx = np.argmax(a.data, axis=ax)
    out = np.take_along_axis(a.data, np.expand_dims(idx, ax), axis=ax)
    if not keepdims:
        out = np.squeeze(out, ax)
    shape = a.shape

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, ax)
        full = np.zeros(shape)
        np.put_along_axis(full, np.expand_dims(idx, ax), g, axis=ax)
        return (full,)

    return _result(out, "amax", (a,), bw)


# --------------------------------------------------------------------------
# shape manipulation
# --------------------------------------------------------------------------

def reshape(a, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    shape = tuple(int(s) for s in shape)
    if -1 in shape:
        known = int(np.prod([s for s in shape if s != -1]))
        if known == 0 or a.size % known:
            raise DimensionError(f"reshape: cannot infer {shape} from {a.shape}")
        shape = tuple(a.size // known if s == -1 else s for s in shape)
    if int(np.prod(shape)) != a.size:
        raise DimensionError(f"reshape: {a.shape} has {a.size} elements, target {shape} does not")
    src = a.shape
    return _result(a.data.reshape(shape), "reshape", (a,), lambda g: (g.reshape(src),))


def transpose(a, axes: Sequence[int] | None = None) -> Tensor:
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    axes = tuple(axes)
    if sorted(ax % a.ndim for ax in axes) != list(range(a.ndim)):
        raise DimensionError(f"transpose: invalid permutation {axes} for shape {a.shape}")
    inv = tuple(np.argsort([ax % a.ndim for ax in axes]))
    return _result(np.transpose(a.data, axes), "transpose", (a,), lambda g: (np.transpose(g, inv),))


def swapaxes(a, ax1: int, ax2: int) -> Tensor:
    a = as_tensor(a)
    perm = list(range(a.ndim))
    perm[ax1], perm[ax2] = perm[ax2], perm[ax1]
    return transpose(a, perm)


def broadcast_to(a, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    shape = tuple(shape)
    try:
        out = np.broadcast_to(a.data, shape)
    except ValueError:
        raise DimensionError(f"broadcast_to: {a.shape} cannot broadcast to {shape}") from None
    return _result(out, "broadcast_to", (a,), lambda g: (g,))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    ts = tuple(as_tensor(t) for t in tensors)
    if not ts:
        raise DimensionError("concat: no tensors")
    ax = axis % ts[0].ndim
    for t in ts[1:]:
        if t.ndim != ts[0].ndim or any(
            t.shape[i] != ts[0].shape[i] for i in range(t.ndim) if i != ax
        ):
            raise DimensionError(f"concat: shapes {ts[0].shape} and {t.shape} differ off axis {ax}")
    sizes = np.cumsum([t.shape[ax] for t in ts])[:-1]

    def bw(g):
        return tuple(np.split(g, sizes, axis=ax))

    return _result(np.concatenate([t.data for t in ts], axis=ax), "concat", ts, bw)


def getitem(a, idx) -> Tensor:
    """Basic (slice/int) indexing."""
    a = as_tensor(a)
    if not isinstance(idx, tuple):
        idx = (idx,)
    for i in idx:
        if not isinstance(i, (slice, int, type(Ellipsis), type(None))):
            raise DimensionError(f"getitem supports basic indexing only, got {type(i).__name__}")
    shape = a.shape

    def bw(g):
        full = np.zeros(shape)
        full[idx] = g
        return (full,)

    return _result(a.data[idx], "slice", (a,), bw)


# --------------------------------------------------------------------------
# linear algebra
# --------------------------------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} are incompatible")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise DimensionError(
            f"matmul: batch extents of {a.shape} and {b.shape} are not broadcastable"
        ) from None
    ad, bd = a.data, b.data

    def bw(g):
        return (g @ np.swapaxes(bd, -1, -2), np.swapaxes(ad, -1, -2) @ g)

    return _result(ad @ bd, "matmul", (a, b), bw)


def linear(x, w, b=None) -> Tensor:
    """``x @ w + b`` over the last axis of ``x``."""
    x, w = as_tensor(x), as_tensor(w)
    if x.shape[-1] != w.shape[0] or w.ndim != 2:
        raise DimensionError(f"linear: input {x.shape} and weight {w.shape} are incompatible")
    xd, wd = x.data, w.data
    out = xd @ wd
    if b is None:
        return _result(out, "linear", (x, w), lambda g: (g @ wd.T, _flat_outer(xd, g)))
    b = as_tensor(b)
    if b.shape != (w.shape[1],):
        raise DimensionError(f"linear: bias {b.shape} does not match weight {w.shape}")
    out += b.data

    def bw(g):
        return (g @ wd.T, _flat_outer(xd, g), g.reshape(-1, g.shape[-1]).sum(axis=0))

    return _result(out, "linear", (x, w, b), bw)


def _flat_outer(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    return x.reshape(-1, x.shape[-1]).T @ g.reshape(-1, g.shape[-1])


# --------------------------------------------------------------------------
# fused neural-network ops
# --------------------------------------------------------------------------

def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    (ax,) = _norm_axes(axis, a.ndim)
    z = a.data - a.data.max(axis=ax, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=ax, keepdims=True)
    y = z

    def bw(g):
        return (y * (g - (g * y).sum(axis=ax, keepdims=True)),)

    return _result(y, "softmax", (a,), bw)


def log_softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    (ax,) = _norm_axes(axis, a.ndim)
    z = a.data - a.data.max(axis=ax, keepdims=True)
    out = z - np.log(np.exp(z).sum(axis=ax, keepdims=True))

    def bw(g):
        return (g - np.exp(out) * g.sum(axis=ax, keepdims=True),)

    return _result(out, "log_softmax", (a,), bw)


def _centered_mean(v: np.ndarray) -> float:
    # exact when all terms are equal (uniform logits give ln(classes) exactly)
    return float(v[0] + (v - v[0]).mean())


def cross_entropy(logits, labels: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer ``labels`` under ``softmax(logits)``."""
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise DimensionError(f"cross_entropy: logits {logits.shape} vs labels {labels.shape}")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - lse
    rows = np.arange(labels.shape[0])
    loss = _centered_mean(-logp[rows, labels])
    bsz = labels.shape[0]

    def bw(g):
        p = np.exp(logp)
        p[rows, labels] -= 1.0
        return (g * p / bsz,)

    return _result(np.asarray(loss), "cross_entropy", (logits,), bw)


def layer_norm(x, gamma, beta, eps: float = 1e-5) -> Tensor:
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise DimensionError(f"layer_norm: input {x.shape}, gamma {gamma.shape}, beta {beta.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    gd = gamma.data
    out = xhat * gd + beta.data

    def bw(g):
        dxhat = g * gd
        dx = inv * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        flat = g.reshape(-1, d)
        return dx, (flat * xhat.reshape(-1, d)).sum(axis=0), flat.sum(axis=0)

    return _result(out, "layer_norm", (x, gamma, beta), bw)


def rotate_pairs(x, cos: np.ndarray, sin: np.ndarray) -> Tensor:
    """Rotate consecutive coordinate pairs ``(2j, 2j+1)`` of the last axis.

    ``cos``/``sin`` broadcast against ``x[..., ::2]``. The backward pass is the
    rotation by the negated angle.
    """
    x = as_tensor(x)
    if x.shape[-1] % 2:
        raise DimensionError(f"rotate_pairs: last extent {x.shape[-1]} is odd")
    even, odd = x.data[..., 0::2], x.data[..., 1::2]
    out = np.empty(x.shape)
    out[..., 0::2] = even * cos - odd * sin
    out[..., 1::2] = even * sin + odd * cos

    def bw(g):
        ge, go = g[..., 0::2], g[..., 1::2]
        gx = np.empty_like(g)
        gx[..., 0::2] = ge * cos + go * sin
        gx[..., 1::2] = -ge * sin + go * cos
        return (gx,)

    return _result(out, "rotate_pairs", (x,), bw)


# --------------------------------------------------------------------------
# convolution (patch gather + matmul)
# --------------------------------------------------------------------------

def conv_output_size(size: int, k: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - k) // stride + 1


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int, ho: int, wo: int) -> np.ndarray:
    # xp: (B, C, Hp, Wp) -> (B, ho*wo, C*kh*kw), channel-major then kernel row-major
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, : (ho - 1) * stride + 1 : stride, : (wo - 1) * stride + 1 : stride]
    b, c = xp.shape[:2]
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(b, ho * wo, c * kh * kw)


def conv2d(x, w, b=None, stride: int = 1, padding: int = 0) -> Tensor:
    """2D cross-correlation ``x[B,Cin,H,W] * w[Cout,Cin,kh,kw] + b[Cout]``."""
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
        raise DimensionError(f"conv2d: input {x.shape} and weight {w.shape} are incompatible")
    bsz, cin, h, wd = x.shape
    cout, _, kh, kw = w.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise DimensionError(f"conv2d: kernel {kh}x{kw} must have odd extents")
    if stride not in (1, 2):
        raise DimensionError(f"conv2d: stride {stride} not in (1, 2)")
    if h % stride or wd % stride:
        raise DimensionError(f"conv2d: spatial size {h}x{wd} not divisible by stride {stride}")
    ho, wo = conv_output_size(h, kh, stride, padding), conv_output_size(wd, kw, stride, padding)
    if ho < 1 or wo < 1:
        raise DimensionError(f"conv2d: kernel {kh}x{kw} larger than padded input {h}x{wd}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    cols = _im2col(xp, kh, kw, stride, ho, wo)
    wmat = w.data.reshape(cout, -1)
    out = cols @ wmat.T  # (B, ho*wo, Cout)
    if b is not None:
        b = as_tensor(b)
        if b.shape != (cout,):
            raise DimensionError(f"conv2d: bias {b.shape} does not match {cout} output channels")
        out += b.data
    out = np.ascontiguousarray(out.transpose(0, 2, 1)).reshape(bsz, cout, ho, wo)
    xshape = xp.shape

    def bw(g):
        gm = g.reshape(bsz, cout, ho * wo).transpose(0, 2, 1)  # (B, L, Cout)
        gw = np.einsum("blo,blk->ok", gm, cols).reshape(w.shape)
        gcols = (gm @ wmat).reshape(bsz, ho, wo, cin, kh, kw)
        gxp = np.zeros(xshape)
        for i in range(kh):
            for j in range(kw):
                gxp[:, :, i : i + (ho - 1) * stride + 1 : stride, j : j + (wo - 1) * stride + 1 : stride] += (
                    gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
                )
        gx = gxp[:, :, padding : padding + h, padding : padding + wd]
        grads = [gx, gw]
        if b is not None:
            grads.append(gm.sum(axis=(0, 1)))
        return tuple(grads)

    parents = (x, w) if b is None else (x, w, b)
    return _result(out, "conv2d", parents, bw)


# --------------------------------------------------------------------------
# Fourier mixing
# --------------------------------------------------------------------------

def dft2_real(x) -> Tensor:
    """``Re(DFT_seq(DFT_hidden(x)))`` over the last two axes, unnormalized.

    The map is self-adjoint (the DFT matrix is symmetric), so the backward pass
    applies the same transform to the incoming gradient.
    """
    x = as_tensor(x)
    if x.ndim < 2:
        raise DimensionError(f"dft2_real: need at least 2 axes, got {x.shape}")
    out = np.fft.fft2(x.data, axes=(-2, -1)).real
    return _result(out, "dft2_real", (x,), lambda g: (np.fft.fft2(g, axes=(-2, -1)).real,))


# --------------------------------------------------------------------------
# pseudo-inverse helpers
# --------------------------------------------------------------------------

def eye_like(n: int) -> Tensor:
    return Tensor(np.eye(n))


def exact_pinv(a) -> Tensor:
    """SVD pseudo-inverse over the last two axes; not differentiable (oracle use)."""
    a = as_tensor(a)
    return Tensor(np.linalg.pinv(a.data))
