"""Orthonormal Haar analysis/synthesis and the wavelet-embedded blocks.

One decomposition level splits a map into four half-resolution subbands
{LL, HL, LH, HH}; the transform is orthonormal, so synthesis is both the
inverse and the adjoint, which also drives the backward pass. Odd extents
are reflect-padded to even and cropped again on synthesis.

Blocks built on the transform: wavelet downsampling (WDown) and upsampling
(WUp) with a high-frequency skip between the pair, a wavelet-decomposition
side path for injecting subband features into the encoder, and a
wavelet-wrapped state-space block (WAMSS) that runs its inner block on the
low-frequency subband only while the high bands pass through untouched.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError
from .nn import Conv2d, GroupNorm, Module

WAVELET_FAMILIES = ("haar",)  # config enum; only the orthonormal Haar kernels exist


class HighBands(NamedTuple):
    hl: Tensor
    lh: Tensor
    hh: Tensor


@dataclass
class Subbands:
    """One decomposition level; all four subbands share a shape."""

    ll: Tensor
    hl: Tensor
    lh: Tensor
    hh: Tensor
    origin_shape: tuple[int, int]

    @property
    def highs(self) -> HighBands:
        return HighBands(self.hl, self.lh, self.hh)


def _dwt2_core(x: np.ndarray):
    a = x[..., 0::2, 0::2]
    b = x[..., 0::2, 1::2]
    c = x[..., 1::2, 0::2]
    d = x[..., 1::2, 1::2]
    ll = (a + b + c + d) * 0.5
    hl = (a + b - c - d) * 0.5
    lh = (a - b + c - d) * 0.5
    hh = (a - b - c + d) * 0.5
    return ll, hl, lh, hh


def _idwt2_core(ll, hl, lh, hh) -> np.ndarray:
    a = (ll + hl + lh + hh) * 0.5
    b = (ll + hl - lh - hh) * 0.5
    c = (ll - hl + lh - hh) * 0.5
    d = (ll - hl - lh + hh) * 0.5
    out = np.empty(ll.shape[:-2] + (2 * ll.shape[-2], 2 * ll.shape[-1]), dtype=ll.dtype)
    out[..., 0::2, 0::2] = a
    out[..., 0::2, 1::2] = b
    out[..., 1::2, 0::2] = c
    out[..., 1::2, 1::2] = d
    return out


def dwt2(x: Tensor, family: str = "haar") -> Subbands:
    """One orthonormal analysis level of (..., H, W); pads odd extents."""
    if family not in WAVELET_FAMILIES:
        raise ContractError(f"unknown wavelet family {family!r}")
    H, W = x.shape[-2], x.shape[-1]
    if H % 2 or W % 2:
        pad_width = tuple([(0, 0)] * (x.ndim - 2) + [(0, H % 2), (0, W % 2)])
        x = ad.pad(x, pad_width, mode="reflect")
    arrays = _dwt2_core(x.data)

    def vjp(gouts):
        parts = [g if g is not None else np.zeros_like(arrays[0]) for g in gouts]
        return (_idwt2_core(*parts),)

    ll, hl, lh, hh = ad.apply_op((x,), [np.ascontiguousarray(s) for s in arrays], vjp)
    return Subbands(ll, hl, lh, hh, origin_shape=(H, W))


def idwt2(s: Subbands, family: str = "haar") -> Tensor:
    """Synthesis of one level; crops any analysis padding back off."""
    if family not in WAVELET_FAMILIES:
        raise ContractError(f"unknown wavelet family {family!r}")
    shapes = {t.shape for t in (s.ll, s.hl, s.lh, s.hh)}
    if len(shapes) != 1:
        raise ContractError(f"subband shapes disagree: {sorted(shapes)}")
    out_data = _idwt2_core(s.ll.data, s.hl.data, s.lh.data, s.hh.data)

    def vjp(g):
        return _dwt2_core(g)

    out = ad.apply_op((s.ll, s.hl, s.lh, s.hh), out_data, vjp)
    H, W = s.origin_shape
    if out.shape[-2] != H or out.shape[-1] != W:
        idx = (Ellipsis, slice(0, H), slice(0, W))
        out = out[idx]
    return out


class WDown(Module):
    """Wavelet downsampling: halve resolution, hand the high bands onward.

    Main path: Conv(GN(x)) -> analysis -> Conv(GN(LL')); skip path keeps the
    LL of analysing Conv(x); the two sum to the output. Returns the main
    path's high-frequency triple for the paired WUp.
    """

    def __init__(self, cin: int, cout: int, rng: np.random.Generator, k: int = 3,
                 norm_groups: int = 8, use_norm: bool = True):
        self.norm1 = GroupNorm(cin, norm_groups) if use_norm else None
        self.conv1 = Conv2d(cin, cin, k, rng)
        self.norm2 = GroupNorm(cin, norm_groups) if use_norm else None
        self.conv2 = Conv2d(cin, cout, k, rng)
        self.conv_skip = Conv2d(cin, cout, k, rng)

    def __call__(self, x: Tensor) -> tuple[Tensor, HighBands]:
        skip = dwt2(self.conv_skip(x)).ll
        xp = self.conv1(self.norm1(x) if self.norm1 else x)
        bands = dwt2(xp)
        main = self.conv2(self.norm2(bands.ll) if self.norm2 else bands.ll)
        return main + skip, bands.highs


class WUp(Module):
    """Wavelet upsampling consuming the paired WDown's high-frequency triple."""

    def __init__(self, cin: int, cout: int, rng: np.random.Generator, k: int = 3,
                 norm_groups: int = 8, use_norm: bool = True):
        self.norm1 = GroupNorm(cin, norm_groups) if use_norm else None
        self.conv1 = Conv2d(cin, cout, k, rng)
        self.conv_skip = Conv2d(cin, cout, k, rng)
        self.norm2 = GroupNorm(cout, norm_groups) if use_norm else None
        self.conv2 = Conv2d(cout, cout, k, rng)

    def __call__(self, x: Tensor, hfreq: HighBands) -> Tensor:
        if hfreq is None:
            raise ContractError("WUp needs the high-frequency triple from its WDown")
        H2, W2 = hfreq.hl.shape[-2] * 2, hfreq.hl.shape[-1] * 2
        skip = idwt2(Subbands(self.conv_skip(x), *hfreq, origin_shape=(H2, W2)))
        xp = self.conv1(self.norm1(x) if self.norm1 else x)
        up = idwt2(Subbands(xp, *hfreq, origin_shape=(H2, W2)))
        main = self.conv2(self.norm2(up) if self.norm2 else up)
        return main + skip


class WaveletDecompose(Module):
    """Analysis subbands concatenated on channels (4C) and fused to C'."""

    def __init__(self, cin: int, cout: int, rng: np.random.Generator, k: int = 3):
        self.fuse = Conv2d(4 * cin, cout, k, rng)

    def __call__(self, x: Tensor) -> Tensor:
        s = dwt2(x)
        stacked = ad.concat([s.ll, s.hl, s.lh, s.hh], axis=1)
        return self.fuse(stacked)


class WaveletAMSS(Module):
    """Run the inner block on the LL subband only; high bands pass through."""

    def __init__(self, inner: Callable[..., Tensor]):
        self.inner = inner

    def __call__(self, x: Tensor, **inner_kwargs) -> Tensor:
        s = dwt2(x)
        processed = self.inner(s.ll, **inner_kwargs)
        return idwt2(Subbands(processed, s.hl, s.lh, s.hh, origin_shape=s.origin_shape))


def wamss_forward(x: Tensor, inner: Callable[[Tensor], Tensor]) -> Tensor:
    """Functional form of the wavelet-wrapped block."""
    return WaveletAMSS(inner)(x)
