"""Training objectives: Charbonnier penalties in image and frequency space,
plus a fixed random-feature perceptual proxy.

Both Charbonnier terms take the global form sqrt(||d||_2^2 + eps^2) with
eps = 1e-9 by default, so the loss of a perfect reconstruction is exactly
eps and the gradient at the minimum stays finite. The frequency term
measures the complex spectrum difference under the unitary centered DFT,
so for eps -> 0 it coincides with the image term.

The perceptual term replaces an external pretrained feature stack with a
seed-pinned, randomly initialised four-layer conv pyramid; features are
compared with an L1 distance per scale. Reference-fidelity runs simply set
its weight to zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigurationError, DimensionError
from .nn import Conv2d, Module

CHARBONNIER_EPS = 1e-9
_EXTRACTOR_SEED = 20240201


@dataclass
class LossWeights:
    """Balancing weights; eta is reserved for adversarial variants."""

    alpha: float = 15.0
    beta: float = 0.1
    gamma: float = 0.0025
    eta: float = 0.1
    eps: float = CHARBONNIER_EPS

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma, self.eta) < 0:
            raise ConfigurationError("loss weights must be non-negative")
        if self.eps <= 0:
            raise ConfigurationError(f"charbonnier eps must be positive, got {self.eps}")


def _check_shapes(xhat: Tensor, x: Tensor) -> None:
    if xhat.shape != x.shape:
        raise DimensionError(f"shape mismatch: {xhat.shape} vs {x.shape}")


def charbonnier_img(xhat: Tensor, x: Tensor, eps: float = CHARBONNIER_EPS) -> Tensor:
    """sqrt(||x - xhat||_2^2 + eps^2)."""
    _check_shapes(xhat, x)
    d = x - xhat
    return ad.sqrt((d * d).sum() + eps * eps)


def charbonnier_freq(xhat: Tensor, x: Tensor, eps: float = CHARBONNIER_EPS) -> Tensor:
    """sqrt(||F x - F xhat||_2^2 + eps^2) with the complex L2 norm."""
    _check_shapes(xhat, x)
    d = ad.fft2_centered(x) - ad.fft2_centered(xhat)
    return ad.sqrt((d * d).sum() + eps * eps)


class FeatureExtractor(Module):
    """Frozen four-layer strided conv pyramid on magnitude images."""

    def __init__(self, seed: int = _EXTRACTOR_SEED):
        rng = np.random.default_rng(seed)
        widths = [8, 16, 32, 32]
        self.convs = []
        cin = 1
        for w in widths:
            conv = Conv2d(cin, w, 3, rng, stride=2, padding=1)
            conv.weight.requires_grad = False
            conv.bias.requires_grad = False
            self.convs.append(conv)
            cin = w

    def __call__(self, x: Tensor) -> list[Tensor]:
        feats = []
        h = x
        for conv in self.convs:
            h = ad.silu(conv(h))
            feats.append(h)
        return feats


_extractor: FeatureExtractor | None = None


def default_extractor() -> FeatureExtractor:
    global _extractor
    if _extractor is None:
        _extractor = FeatureExtractor()
    return _extractor


def _magnitude(x: Tensor) -> Tensor:
    if x.shape[1] == 1:
        return x
    if x.shape[1] == 2:
        re = x[:, 0:1]
        im = x[:, 1:2]
        return ad.sqrt(re * re + im * im + 1e-24)
    raise DimensionError(f"expected 1 or 2 channels, got {x.shape[1]}")


def perceptual_proxy(xhat: Tensor, x: Tensor,
                     extractor: FeatureExtractor | None = None) -> Tensor:
    """Mean L1 distance between frozen multi-scale features."""
    _check_shapes(xhat, x)
    extractor = extractor or default_extractor()
    fa = extractor(_magnitude(xhat))
    fb = extractor(_magnitude(x))
    terms = [ad.abs_(a - b).mean() for a, b in zip(fa, fb)]
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return total * (1.0 / len(terms))


def total_loss(xhat: Tensor, x: Tensor, w: LossWeights | None = None,
               extractor: FeatureExtractor | None = None) -> Tensor:
    """alpha * image + beta * frequency + gamma * perceptual."""
    w = w or LossWeights()
    loss = charbonnier_img(xhat, x, w.eps) * w.alpha
    if w.beta:
        loss = loss + charbonnier_freq(xhat, x, w.eps) * w.beta
    if w.gamma:
        loss = loss + perceptual_proxy(xhat, x, extractor) * w.gamma
    return loss
