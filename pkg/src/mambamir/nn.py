"""Parameterised layers built on the autodiff ops.

Modules hold their weights as ``Tensor`` attributes; ``named_parameters``
walks the attribute tree in assignment order, which fixes checkpoint names.
"""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


class Module:
    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for name, val in vars(self).items():
            key = f"{prefix}{name}" if prefix else name
            _collect(val, key, out)
        return out

    def param_count(self) -> int:
        return sum(p.size for p in self.named_parameters().values())

    def astype(self, dtype) -> "Module":
        """Cast every held Tensor (trainable or frozen) in place."""
        _cast(vars(self), dtype)
        return self


def _cast(val, dtype) -> None:
    if isinstance(val, Tensor):
        val.data = np.ascontiguousarray(val.data, dtype=dtype)
    elif isinstance(val, Module):
        _cast(vars(val), dtype)
    elif isinstance(val, dict):
        for v in val.values():
            _cast(v, dtype)
    elif isinstance(val, (list, tuple)):
        for v in val:
            _cast(v, dtype)


def _collect(val, key: str, out: dict[str, Tensor]) -> None:
    if isinstance(val, Tensor):
        if val.requires_grad:
            out[key] = val
    elif isinstance(val, Module):
        out.update(val.named_parameters(prefix=key + "."))
    elif isinstance(val, (list, tuple)):
        for i, item in enumerate(val):
            _collect(item, f"{key}.{i}", out)


def _uniform(rng: np.random.Generator, shape, scale: float) -> np.ndarray:
    return rng.uniform(-scale, scale, size=shape)


class Linear(Module):
    """Affine map on the last axis: y = x @ W + b."""

    def __init__(self, din: int, dout: int, rng: np.random.Generator,
                 bias: bool = True, zero_init: bool = False):
        scale = 1.0 / np.sqrt(din)
        w = np.zeros((din, dout)) if zero_init else _uniform(rng, (din, dout), scale)
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.zeros(dout), requires_grad=True) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        lead = x.shape[:-1]
        flat = x.reshape((-1, x.shape[-1])) if x.ndim != 2 else x
        y = ad.matmul(flat, self.weight)
        if self.bias is not None:
            y = y + self.bias
        return y.reshape(lead + (self.weight.shape[1],)) if x.ndim != 2 else y


class Conv2d(Module):
    """Cross-correlation layer on NCHW maps."""

    def __init__(self, cin: int, cout: int, k: int, rng: np.random.Generator,
                 stride: int = 1, padding: int | None = None, groups: int = 1,
                 bias: bool = True, zero_init: bool = False):
        fan_in = (cin // groups) * k * k
        scale = 1.0 / np.sqrt(fan_in)
        shape = (cout, cin // groups, k, k)
        w = np.zeros(shape) if zero_init else _uniform(rng, shape, scale)
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.zeros(cout), requires_grad=True) if bias else None
        self.stride = stride
        self.padding = k // 2 if padding is None else padding
        self.groups = groups

    def __call__(self, x: Tensor) -> Tensor:
        return ad.conv2d(x, self.weight, self.bias, stride=self.stride,
                         padding=self.padding, groups=self.groups)


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-6):
        self.gain = Tensor(np.ones(dim), requires_grad=True)
        self.bias = Tensor(np.zeros(dim), requires_grad=True)
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return ad.layer_norm(x, self.gain, self.bias, self.eps)


class GroupNorm(Module):
    def __init__(self, channels: int, groups: int = 8, eps: float = 1e-6):
        self.gain = Tensor(np.ones(channels), requires_grad=True)
        self.bias = Tensor(np.zeros(channels), requires_grad=True)
        self.groups = groups
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return ad.group_norm(x, self.groups, self.gain, self.bias, self.eps)


class Mlp(Module):
    """Two-layer feed-forward sublayer with SiLU, applied channels-last."""

    def __init__(self, dim: int, hidden: int, rng: np.random.Generator):
        self.fc1 = Linear(dim, hidden, rng)
        self.fc2 = Linear(hidden, dim, rng)

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(ad.silu(self.fc1(x)))
