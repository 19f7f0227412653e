"""Central finite-difference gradient checking."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError
from .tensor import Tape, Tensor, no_grad


@dataclass
class GradCheckReport:
    name: str
    max_rel_error: dict[str, float] = field(default_factory=dict)
    tol: float = 1e-4

    @property
    def worst(self) -> float:
        return max(self.max_rel_error.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.worst < self.tol


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return np.abs(analytic - numeric) / denom


def _scalar(out) -> float:
    if not isinstance(out, Tensor) or out.data.size != 1:
        shape = out.shape if isinstance(out, Tensor) else type(out).__name__
        raise ContractError(f"grad_check: function must return a scalar Tensor, got {shape}")
    return float(out.data.reshape(()))


def grad_check(
    f: Callable[..., Tensor],
    inputs: Sequence[Tensor] | dict[str, Tensor],
    h: float = 1e-5,
    tol: float = 1e-4,
    name: str = "f",
) -> GradCheckReport:
    """Compare tape gradients of scalar ``f(*inputs)`` with central differences.

    ``inputs`` may be a list (passed positionally) or a name->Tensor mapping
    (passed as keywords); either way every entry must have ``requires_grad``.
    """
    named = dict(inputs) if isinstance(inputs, dict) else {f"arg{i}": t for i, t in enumerate(inputs)}

    def call():
        if isinstance(inputs, dict):
            return f(**named)
        return f(*named.values())

    for t in named.values():
        t.grad = None
    with Tape() as tape:
        out = call()
        _scalar(out)
        tape.backward(out)
    report = GradCheckReport(name=name, tol=tol)
    with no_grad():
        for key, t in named.items():
            analytic = t.grad if t.grad is not None else np.zeros(t.shape)
            numeric = np.zeros(t.shape)
            flat = t.data.reshape(-1)
            nflat = numeric.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                fp = _scalar(call())
                flat[i] = orig - h
                fm = _scalar(call())
                flat[i] = orig
                nflat[i] = (fp - fm) / (2.0 * h)
            report.max_rel_error[key] = float(rel_error(analytic, numeric).max()) if t.size else 0.0
    return report
