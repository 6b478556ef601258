"""Cross-scan expansion, arbitrary scan masking, and merging.

A 2-D feature map is unrolled into four directional sequences (row-major and
column-major, each from the top-left and from the bottom-right), optionally
one uniformly chosen scan is zeroed (ASM), each sequence runs through the
selective scan, and the results are inverse-permuted and summed back into
map form. Unmasked inference rescales the merged sum by 3/4 so it matches
the training-time expectation of summing three live branches.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError
from .ssm import SSMParams, selective_scan_seq

MODES = ("train", "mc", "deterministic")
DETERMINISTIC_SCALE = 0.75  # expectation correction: 3 of 4 scans live in training


@dataclass
class ScanSet:
    """Four directional unrollings of one feature map, shape (B, 4, C, L)."""

    scans: Tensor
    origin_shape: tuple[int, int]
    masked_index: int | None = None


@dataclass(frozen=True)
class MaskDraw:
    """Record of one uniform mask draw, for seed provenance."""

    index: int
    seed_info: str = ""


def scan_expand(x: Tensor) -> ScanSet:
    """Unroll (B, C, H, W) into the four directional scans.

    scan 0: row-major from top-left; scan 1: column-major from top-left;
    scan 2: reverse of scan 0; scan 3: reverse of scan 1.
    """
    B, C, H, W = x.shape
    s0 = x.reshape((B, C, H * W))
    s1 = x.transpose((0, 1, 3, 2)).reshape((B, C, H * W))
    s2 = ad.flip(s0, 2)
    s3 = ad.flip(s1, 2)
    return ScanSet(ad.stack([s0, s1, s2, s3], axis=1), (H, W))


def asm_mask(s: ScanSet, rng: np.random.Generator, index: int | None = None) -> ScanSet:
    """Zero one uniformly drawn scan (shared across the batch of this call).

    ``index`` overrides the draw, for exhaustive averaging in tests. The
    input set is untouched; exactly one scan may ever be masked.
    """
    if s.masked_index is not None:
        raise ContractError(f"scan {s.masked_index} already masked")
    if index is None:
        index = int(rng.integers(0, 4))
    elif index not in (0, 1, 2, 3):
        raise ContractError(f"mask index must be in 0..3, got {index}")
    keep = np.ones((1, 4, 1, 1), dtype=s.scans.data.dtype)
    keep[0, index] = 0.0
    return ScanSet(s.scans * Tensor(keep), s.origin_shape, masked_index=index)


def scan_merge(y: ScanSet) -> Tensor:
    """Inverse-permute each directional sequence to 2-D and sum the branches."""
    if y.origin_shape is None:
        raise ContractError("scan set lacks its origin shape")
    H, W = y.origin_shape
    B, S, C, L = y.scans.shape
    if L != H * W:
        raise ContractError(f"scan length {L} does not match origin shape {(H, W)}")
    b0 = y.scans[:, 0].reshape((B, C, H, W))
    b1 = y.scans[:, 1].reshape((B, C, W, H)).transpose((0, 1, 3, 2))
    b2 = ad.flip(y.scans[:, 2], 2).reshape((B, C, H, W))
    b3 = ad.flip(y.scans[:, 3], 2).reshape((B, C, W, H)).transpose((0, 1, 3, 2))
    # pairwise sum keeps the unmasked case bit-exact at 4x
    return (b0 + b2) + (b1 + b3)


def ams6_forward(x: Tensor, params: SSMParams, mode: str,
                 rng: np.random.Generator | None = None,
                 mask_index: int | None = None) -> Tensor:
    """Expand -> (mask) -> per-scan selective scan -> merge.

    ``train`` and ``mc`` draw one mask per call from ``rng``; deterministic
    mode skips masking and rescales the merged sum by 3/4.
    """
    if mode not in MODES:
        raise ContractError(f"mode must be one of {MODES}, got {mode!r}")
    s = scan_expand(x)
    if mode in ("train", "mc"):
        if rng is None and mask_index is None:
            raise ContractError("train/mc mode needs an rng for the mask draw")
        s = asm_mask(s, rng, index=mask_index)
    B, S, C, L = s.scans.shape
    seqs = s.scans.reshape((B * S, C, L)).transpose((0, 2, 1))  # (G, L, C)
    ys = selective_scan_seq(seqs, params)
    ys = ys.transpose((0, 2, 1)).reshape((B, S, C, L))
    merged = scan_merge(ScanSet(ys, s.origin_shape, s.masked_index))
    if mode == "deterministic":
        merged = merged * DETERMINISTIC_SCALE
    return merged
