"""The gated scan block, attention bottleneck, and the U-shaped model.

Layout: patch embed -> M encoder stages (scan blocks then wavelet
downsampling, with wavelet-decomposed input features added ahead of each
stage) -> bottleneck (two wavelet-wrapped scan blocks around one attention
block) -> M decoder stages (wavelet upsampling, skip fusion, scan blocks)
-> patch unembed, plus a global input-to-output residual so the network
learns a correction to its degraded input.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigurationError, ContractError, DimensionError
from .nn import Conv2d, LayerNorm, Linear, Mlp, Module
from .scan import MODES, ams6_forward
from .ssm import SSMParams
from .wavelet import WaveletAMSS, WaveletDecompose, WDown, WUp


@dataclass
class AMSSConfig:
    """Architecture knobs; ``multipliers`` and ``depths`` share one length M."""

    in_channels: int = 2
    embed_dim: int = 32
    depths: tuple[int, ...] = (2, 2)
    multipliers: tuple[int, ...] = (1, 2)
    state_dim: int = 16
    patch_size: int = 2
    mlp_ratio: float = 2.0
    use_mlp: bool = True
    use_attn: bool = True
    attn_heads: int = 4
    norm_groups: int = 8
    dropout_p: float = 0.0

    def __post_init__(self):
        if len(self.multipliers) != len(self.depths):
            raise ConfigurationError(
                f"multipliers {self.multipliers} and depths {self.depths} disagree in length"
            )
        if self.patch_size not in (1, 2):
            raise ConfigurationError(f"patch_size must be 1 or 2, got {self.patch_size}")
        for m in self.multipliers:
            dim = self.embed_dim * m
            if dim % self.norm_groups:
                raise ConfigurationError(
                    f"stage width {dim} not divisible by norm_groups {self.norm_groups}"
                )
        if (self.embed_dim * self.multipliers[-1]) % self.attn_heads:
            raise ConfigurationError(
                f"bottleneck width {self.embed_dim * self.multipliers[-1]} "
                f"not divisible by attn_heads {self.attn_heads}"
            )

    @property
    def stages(self) -> int:
        return len(self.multipliers)

    @property
    def stage_dims(self) -> list[int]:
        return [self.embed_dim * m for m in self.multipliers]


class AMSSBlock(Module):
    """Gated block: LN, linear + depthwise conv + SiLU into the masked scan,
    a SiLU-gated second path, output projection, residual, optional MLP."""

    def __init__(self, dim: int, state_dim: int, rng: np.random.Generator,
                 mlp_ratio: float = 2.0, use_mlp: bool = True):
        self.ln_in = LayerNorm(dim)
        self.in_proj = Linear(dim, dim, rng)
        self.dwconv = Conv2d(dim, dim, 3, rng, groups=dim)
        self.ssm = SSMParams(dim, state_dim, rng)
        self.ln_scan = LayerNorm(dim)
        self.gate_proj = Linear(dim, dim, rng)
        self.out_proj = Linear(dim, dim, rng)
        self.ln_mlp = LayerNorm(dim) if use_mlp else None
        self.mlp = Mlp(dim, max(1, int(dim * mlp_ratio)), rng) if use_mlp else None

    def __call__(self, x: Tensor, mode: str, rng: np.random.Generator | None = None,
                 dropout_p: float = 0.0) -> Tensor:
        xi = x.transpose((0, 2, 3, 1))  # channels-last for norms and linears
        xn = self.ln_in(xi)
        path = self.in_proj(xn).transpose((0, 3, 1, 2))
        path = ad.silu(self.dwconv(path))
        path = ams6_forward(path, self.ssm, mode, rng)
        path = self.ln_scan(path.transpose((0, 2, 3, 1)))
        gate = ad.silu(self.gate_proj(xi))
        y = self.out_proj(gate * path) + xi
        if self.mlp is not None:
            y = y + self.mlp(self.ln_mlp(y))
        out = y.transpose((0, 3, 1, 2))
        if dropout_p > 0.0 and mode in ("train", "mc"):
            if rng is None:
                raise ContractError("dropout needs an rng in train/mc mode")
            keep = (rng.random(out.shape) >= dropout_p).astype(out.data.dtype)
            out = out * Tensor(keep / (1.0 - dropout_p))
        return out


class AttentionBlock(Module):
    """Multi-head self-attention over the bottleneck tokens, no positions."""

    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        if dim % heads:
            raise ConfigurationError(f"heads {heads} must divide width {dim}")
        self.ln = LayerNorm(dim)
        self.q = Linear(dim, dim, rng)
        self.k = Linear(dim, dim, rng)
        self.v = Linear(dim, dim, rng)
        self.proj = Linear(dim, dim, rng)
        self.heads = heads

    def __call__(self, x: Tensor, return_weights: bool = False):
        B, C, H, W = x.shape
        L = H * W
        dh = C // self.heads
        tokens = x.reshape((B, C, L)).transpose((0, 2, 1))
        xn = self.ln(tokens)

        def split(t):
            return t.reshape((B, L, self.heads, dh)).transpose((0, 2, 1, 3))

        q, k, v = split(self.q(xn)), split(self.k(xn)), split(self.v(xn))
        logits = ad.matmul(q, k.transpose((0, 1, 3, 2))) * (1.0 / np.sqrt(dh))
        attn = ad.softmax(logits, axis=-1)
        out = ad.matmul(attn, v).transpose((0, 2, 1, 3)).reshape((B, L, C))
        out = self.proj(out) + tokens
        out = out.transpose((0, 2, 1)).reshape((B, C, H, W))
        return (out, attn) if return_weights else out


class PatchEmbed(Module):
    """Non-overlapping p x p patches projected to the embedding width."""

    def __init__(self, cin: int, dim: int, p: int, rng: np.random.Generator):
        self.proj = Linear(cin * p * p, dim, rng)
        self.p = p

    def __call__(self, x: Tensor) -> Tensor:
        B, C, H, W = x.shape
        p = self.p
        if H % p or W % p:
            raise DimensionError(f"patch embed: {H}x{W} not divisible by patch size {p}")
        t = x.reshape((B, C, H // p, p, W // p, p))
        t = t.transpose((0, 2, 4, 1, 3, 5)).reshape((B, H // p, W // p, C * p * p))
        return self.proj(t).transpose((0, 3, 1, 2))


class PatchUnembed(Module):
    def __init__(self, dim: int, cout: int, p: int, rng: np.random.Generator):
        self.proj = Linear(dim, cout * p * p, rng)
        self.p = p
        self.cout = cout

    def __call__(self, x: Tensor) -> Tensor:
        B, D, h, w = x.shape
        p = self.p
        t = self.proj(x.transpose((0, 2, 3, 1)))  # (B, h, w, cout*p*p)
        t = t.reshape((B, h, w, self.cout, p, p)).transpose((0, 3, 1, 4, 2, 5))
        return t.reshape((B, self.cout, h * p, w * p))


class MambaMIR(Module):
    """Full U-shaped reconstruction model."""

    def __init__(self, config: AMSSConfig, rng: np.random.Generator):
        cfg = config
        dims = cfg.stage_dims
        M = cfg.stages
        self.config = cfg
        self.patch_embed = PatchEmbed(cfg.in_channels, dims[0], cfg.patch_size, rng)

        # wavelet side path: stage i sits at resolution H / (p * 2^i), i.e.
        # decomposition level i + log2(p); levels >= 1 get injected features
        lvl0 = 1 if cfg.patch_size == 2 else 0
        self.side_decomps = []
        prev_c = cfg.in_channels
        for i in range(M):
            if i + lvl0 >= 1:
                self.side_decomps.append(WaveletDecompose(prev_c, dims[i], rng))
                prev_c = dims[i]
            else:
                self.side_decomps.append(None)

        def make_blocks(dim, depth):
            return [AMSSBlock(dim, cfg.state_dim, rng, cfg.mlp_ratio, cfg.use_mlp)
                    for _ in range(depth)]

        self.enc_blocks = [make_blocks(dims[i], cfg.depths[i]) for i in range(M)]
        down_dims = dims + [dims[-1]]
        self.downs = [WDown(dims[i], down_dims[i + 1], rng, norm_groups=cfg.norm_groups)
                      for i in range(M)]
        bott = dims[-1]
        self.bott_wamss1 = WaveletAMSS(
            AMSSBlock(bott, cfg.state_dim, rng, cfg.mlp_ratio, cfg.use_mlp))
        self.bott_attn = AttentionBlock(bott, cfg.attn_heads, rng) if cfg.use_attn else None
        self.bott_wamss2 = WaveletAMSS(
            AMSSBlock(bott, cfg.state_dim, rng, cfg.mlp_ratio, cfg.use_mlp))
        self.ups = [WUp(down_dims[i + 1], dims[i], rng, norm_groups=cfg.norm_groups)
                    for i in range(M)]
        self.fuses = [Conv2d(2 * dims[i], dims[i], 1, rng) for i in range(M)]
        self.dec_blocks = [make_blocks(dims[i], cfg.depths[i]) for i in range(M)]
        self.patch_unembed = PatchUnembed(dims[0], cfg.in_channels, cfg.patch_size, rng)
        self.dropout_p = cfg.dropout_p

    def identity_init(self) -> "MambaMIR":
        """Zero the unembedding projection: forward becomes the identity."""
        self.patch_unembed.proj.weight.data[:] = 0.0
        self.patch_unembed.proj.bias.data[:] = 0.0
        return self

    def with_dropout(self, p: float) -> "MambaMIR":
        """Shallow copy sharing all weights, with elementwise dropout rate p."""
        if not 0.0 < p < 1.0:
            raise ConfigurationError(f"dropout rate must lie in (0, 1), got {p}")
        clone = copy.copy(self)
        clone.dropout_p = p
        return clone

    def forward(self, x: Tensor, mode: str = "deterministic",
                rng: np.random.Generator | None = None) -> Tensor:
        if mode not in MODES:
            raise ContractError(f"mode must be one of {MODES}, got {mode!r}")
        cfg = self.config
        if x.shape[1] != cfg.in_channels:
            raise DimensionError(
                f"expected {cfg.in_channels} input channels, got {x.shape[1]}")
        B, C, H, W = x.shape
        multiple = cfg.patch_size * (2 ** cfg.stages)
        padH = (-H) % multiple
        padW = (-W) % multiple
        xp = ad.pad(x, ((0, 0), (0, 0), (0, padH), (0, padW)), mode="reflect") \
            if (padH or padW) else x

        feat = self.patch_embed(xp)
        side = xp
        skips: list[Tensor] = []
        hfreqs = []
        for i in range(cfg.stages):
            if self.side_decomps[i] is not None:
                side = self.side_decomps[i](side)
                feat = feat + side
            for block in self.enc_blocks[i]:
                feat = block(feat, mode, rng, self.dropout_p)
            skips.append(feat)
            feat, hf = self.downs[i](feat)
            hfreqs.append(hf)

        feat = self.bott_wamss1(feat, mode=mode, rng=rng, dropout_p=self.dropout_p)
        if self.bott_attn is not None:
            feat = self.bott_attn(feat)
        feat = self.bott_wamss2(feat, mode=mode, rng=rng, dropout_p=self.dropout_p)

        for i in reversed(range(cfg.stages)):
            feat = self.ups[i](feat, hfreqs[i])
            feat = self.fuses[i](ad.concat([feat, skips[i]], axis=1))
            for block in self.dec_blocks[i]:
                feat = block(feat, mode, rng, self.dropout_p)

        out = self.patch_unembed(feat)
        if padH or padW:
            out = out[:, :, :H, :W]
        return out + x

    __call__ = forward


def conv_baseline(channels: int, width: int, rng: np.random.Generator) -> "ConvBaseline":
    return ConvBaseline(channels, width, rng)


class ConvBaseline(Module):
    """Three-layer conv net with a global residual; the local-receptive-field
    reference point for sensitivity comparisons."""

    def __init__(self, channels: int, width: int, rng: np.random.Generator):
        self.conv1 = Conv2d(channels, width, 3, rng)
        self.conv2 = Conv2d(width, width, 3, rng)
        self.conv3 = Conv2d(width, channels, 3, rng)

    def forward(self, x: Tensor, mode: str = "deterministic",
                rng: np.random.Generator | None = None) -> Tensor:
        h = ad.silu(self.conv1(x))
        h = ad.silu(self.conv2(h))
        return self.conv3(h) + x

    __call__ = forward
