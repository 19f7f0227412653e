"""Reference implementations written with plain loops, independent of the package."""

from __future__ import annotations

import cmath
import math

import numpy as np


def naive_dft2_real(x: np.ndarray) -> np.ndarray:
    """Re(DFT over axis -2 of DFT over axis -1), both by explicit O(n^2) sums."""
    *lead, n, d = x.shape
    out = np.zeros(x.shape)
    for idx in np.ndindex(*lead):
        a = x[idx]
        hid = np.zeros((n, d), dtype=complex)
        for t in range(n):
            for k in range(d):
                hid[t, k] = sum(a[t, j] * cmath.exp(-2j * math.pi * k * j / d) for j in range(d))
        for s in range(n):
            for k in range(d):
                out[idx + (s, k)] = sum(hid[t, k] * cmath.exp(-2j * math.pi * s * t / n) for t in range(n)).real
    return out


def loop_conv2d(x, w, b, stride, pad):
    """Six nested loops: batch, out channel, out row, out col, in channel, kernel offset."""
    B, C, H, W = x.shape
    O, _, KH, KW = w.shape
    Ho = (H + 2 * pad - KH) // stride + 1
    Wo = (W + 2 * pad - KW) // stride + 1
    out = np.zeros((B, O, Ho, Wo))
    for bi in range(B):
        for o in range(O):
            for i in range(Ho):
                for j in range(Wo):
                    acc = b[o] if b is not None else 0.0
                    for c in range(C):
                        for u in range(KH):
                            for v in range(KW):
                                r, s = i * stride + u - pad, j * stride + v - pad
                                if 0 <= r < H and 0 <= s < W:
                                    acc += x[bi, c, r, s] * w[o, c, u, v]
                    out[bi, o, i, j] = acc
    return out


def _softmax_row(v):
    m = max(v)
    e = [math.exp(t - m) for t in v]
    s = sum(e)
    return [t / s for t in e]


def loop_attention(x, wq, wk, wv, wo, bo, heads):
    """Per-element multi-head softmax attention; weights laid out (in, out)."""
    B, n, d = x.shape
    dh = d // heads
    q, k, v = x @ wq, x @ wk, x @ wv
    out = np.zeros((B, n, d))
    for b in range(B):
        concat = np.zeros((n, d))
        for h in range(heads):
            sl = slice(h * dh, (h + 1) * dh)
            for i in range(n):
                scores = [sum(q[b, i, sl][t] * k[b, j, sl][t] for t in range(dh)) / math.sqrt(dh) for j in range(n)]
                a = _softmax_row(scores)
                for t in range(dh):
                    concat[i, h * dh + t] = sum(a[j] * v[b, j, sl][t] for j in range(n))
        out[b] = concat @ wo + bo
    return out


def quadratic_performer(x, wq, wk, wv, wo, bo, heads, eps=1e-6):
    """ReLU-kernel attention evaluated through the explicit n x n weight matrix."""
    B, n, d = x.shape
    dh = d // heads
    q, k, v = np.maximum(x @ wq, 0), np.maximum(x @ wk, 0), x @ wv
    out = np.zeros((B, n, d))
    for h in range(heads):
        sl = slice(h * dh, (h + 1) * dh)
        a = q[:, :, sl] @ np.swapaxes(k[:, :, sl], 1, 2)  # B,n,n
        out[:, :, sl] = (a @ v[:, :, sl]) / (a.sum(-1, keepdims=True) + eps)
    return out @ wo + bo


def performer_row_weights(x, wq, wk, heads, eps=1e-6):
    B, n, d = x.shape
    dh = d // heads
    q, k = np.maximum(x @ wq, 0), np.maximum(x @ wk, 0)
    ws = []
    for h in range(heads):
        sl = slice(h * dh, (h + 1) * dh)
        a = q[:, :, sl] @ np.swapaxes(k[:, :, sl], 1, 2)
        ws.append(a / (a.sum(-1, keepdims=True) + eps))
    return ws


def scalar_adam(w, g, m, v, t, lr, b1, b2, eps, wd):
    """One coupled-L2 Adam step on a Python float."""
    g = g + wd * w
    m = b1 * m + (1 - b1) * g
    v = b2 * v + (1 - b2) * g * g
    mh = m / (1 - b1**t)
    vh = v / (1 - b2**t)
    return w - lr * mh / (math.sqrt(vh) + eps), m, v


def central_difference(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    g = np.zeros_like(x)
    for i in np.ndindex(*x.shape):
        orig = x[i]
        x[i] = orig + h
        fp = f(x)
        x[i] = orig - h
        fm = f(x)
        x[i] = orig
        g[i] = (fp - fm) / (2 * h)
    return g


def rope_vector(v: np.ndarray, pos: float, base: float = 10000.0) -> np.ndarray:
    """Rotate pair (2j, 2j+1) of a single vector by pos * base^(-2j/d)."""
    d = len(v)
    out = np.empty(d)
    for j in range(d // 2):
        th = pos * base ** (-2.0 * j / d)
        c, s = math.cos(th), math.sin(th)
        out[2 * j] = v[2 * j] * c - v[2 * j + 1] * s
        out[2 * j + 1] = v[2 * j] * s + v[2 * j + 1] * c
    return out


def write_cifar_batch(path, labels: np.ndarray, images_u8: np.ndarray) -> None:
    """Write records of 1 label byte + 3072 plane-major pixel bytes."""
    recs = np.empty((len(labels), 3073), dtype=np.uint8)
    recs[:, 0] = labels
    recs[:, 1:] = images_u8.reshape(len(labels), 3072)
    recs.tofile(path)
