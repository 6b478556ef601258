"""Reconstruction quality metrics on plain arrays."""
from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, DimensionError

PSNR_CAP_DB = 200.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def psnr(xhat: np.ndarray, x: np.ndarray, data_range: float) -> float:
    """10 log10(range^2 / MSE), capped for identical inputs."""
    xhat = np.asarray(xhat, dtype=float)
    x = np.asarray(x, dtype=float)
    if xhat.shape != x.shape:
        raise DimensionError(f"shape mismatch: {xhat.shape} vs {x.shape}")
    if data_range <= 0:
        raise ConfigurationError(f"data_range must be positive, got {data_range}")
    mse = float(np.mean((xhat - x) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(data_range * data_range / mse), PSNR_CAP_DB)


def _gaussian_window() -> np.ndarray:
    half = SSIM_WINDOW // 2
    t = np.arange(-half, half + 1, dtype=float)
    g = np.exp(-(t * t) / (2.0 * SSIM_SIGMA * SSIM_SIGMA))
    g /= g.sum()
    return np.outer(g, g)


_WINDOW = _gaussian_window()


def _filter_valid(img: np.ndarray) -> np.ndarray:
    win = np.lib.stride_tricks.sliding_window_view(img, _WINDOW.shape)
    return np.einsum("xykl,kl->xy", win, _WINDOW, optimize=True)


def ssim(xhat: np.ndarray, x: np.ndarray, data_range: float | None = None) -> float:
    """Mean local structural similarity, 11x11 Gaussian window (sigma 1.5)."""
    xhat = np.asarray(xhat, dtype=float)
    x = np.asarray(x, dtype=float)
    if xhat.shape != x.shape:
        raise DimensionError(f"shape mismatch: {xhat.shape} vs {x.shape}")
    if xhat.ndim != 2:
        raise DimensionError(f"ssim expects 2-D images, got shape {x.shape}")
    if min(xhat.shape) < SSIM_WINDOW:
        raise DimensionError(f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    if data_range is None:
        data_range = float(x.max() - x.min())
    if data_range <= 0:
        raise ConfigurationError(f"data_range must be positive, got {data_range}")
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    mu1 = _filter_valid(xhat)
    mu2 = _filter_valid(x)
    s11 = _filter_valid(xhat * xhat) - mu1 * mu1
    s22 = _filter_valid(x * x) - mu2 * mu2
    s12 = _filter_valid(xhat * x) - mu1 * mu2
    num = (2.0 * mu1 * mu2 + c1) * (2.0 * s12 + c2)
    den = (mu1 * mu1 + mu2 * mu2 + c1) * (s11 + s22 + c2)
    return float(np.mean(num / den))
