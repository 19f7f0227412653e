"""Parameter declarations and seeded initialization.

Every component declares its parameters as :class:`ParamSpec` lists; counting
walks the specs without allocating, and :func:`init_params` materializes them
in declaration order from a single seeded generator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .tensor import Tensor, parameter

TRUNC_STD = 0.02


@dataclass(frozen=True)
class ParamSpec:
    name: str
    shape: tuple[int, ...]
    init: str = "trunc_normal"  # trunc_normal | zeros | ones | normal
    std: float = TRUNC_STD
    # False for bare tensors that are not owned by a layer object in the
    # reference code (position table, class token, Linformer projection)
    registered: bool = True

    @property
    def count(self) -> int:
        return int(np.prod(self.shape)) if self.shape else 1

    def prefixed(self, prefix: str) -> "ParamSpec":
        return ParamSpec(prefix + self.name, self.shape, self.init, self.std, self.registered)


def linear_specs(name: str, fan_in: int, fan_out: int, bias: bool = True) -> list[ParamSpec]:
    specs = [ParamSpec(f"{name}.weight", (fan_in, fan_out))]
    if bias:
        specs.append(ParamSpec(f"{name}.bias", (fan_out,), "zeros"))
    return specs


def norm_specs(name: str, dim: int) -> list[ParamSpec]:
    return [ParamSpec(f"{name}.gamma", (dim,), "ones"), ParamSpec(f"{name}.beta", (dim,), "zeros")]


def prefix_specs(prefix: str, specs: Iterable[ParamSpec]) -> list[ParamSpec]:
    return [s.prefixed(prefix) for s in specs]


def trunc_normal(rng: np.random.Generator, shape, std: float) -> np.ndarray:
    """Normal(0, std) truncated at two standard deviations by resampling."""
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2 * std
    return out


def init_array(spec: ParamSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.init == "zeros":
        return np.zeros(spec.shape)
    if spec.init == "ones":
        return np.ones(spec.shape)
    if spec.init == "normal":
        return rng.normal(0.0, spec.std, size=spec.shape)
    if spec.init == "trunc_normal":
        return trunc_normal(rng, spec.shape, spec.std)
    raise ValueError(f"unknown init scheme {spec.init!r}")


def init_params(specs: Iterable[ParamSpec], seed: int) -> dict[str, Tensor]:
    rng = np.random.default_rng(seed)
    return {s.name: parameter(init_array(s, rng)) for s in specs}


def subtree(params: Mapping[str, Tensor], prefix: str) -> dict[str, Tensor]:
    """Entries under ``prefix`` with the prefix stripped."""
    n = len(prefix)
    return {k[n:]: v for k, v in params.items() if k.startswith(prefix)}
