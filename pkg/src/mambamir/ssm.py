"""Selective state-space parameterisation and scan (sequential and chunked).

Continuous dynamics h' = A h + B x, y = C h + D x are discretised with a
per-step timescale: Abar = exp(delta * A) elementwise on the diagonal A,
Bbar = delta * B to first order (the exact zero-order-hold integral
(exp(delta*A) - 1) / A * B is available behind ``exact_bbar``), C and D pass
through unchanged. B, C, delta are projected from the input sequence at
every step, which is what makes the scan selective.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from ._scan_kernels import dummy_f, scan_bwd, scan_fwd
from .autodiff import Tensor
from .errors import ContractError, NumericError
from .nn import Linear, Module


@dataclass
class ScanState:
    """Hidden state of one scan position, shape (channels, state_dim)."""

    h: np.ndarray

    def finite(self) -> bool:
        return bool(np.isfinite(self.h).all())


class SSMParams(Module):
    """Per-channel diagonal state matrix plus input-dependent projections.

    A is stored as a log-magnitude so the realised matrix -exp(a_log) stays
    strictly negative, giving |exp(delta*A)| < 1 for delta > 0. The delta
    projection bias is initialised so softplus lands in [dt_min, dt_max].
    """

    def __init__(self, channels: int, state_dim: int, rng: np.random.Generator,
                 dt_min: float = 1e-3, dt_max: float = 0.1, exact_bbar: bool = False):
        self.a_log = Tensor(
            np.log(np.tile(np.arange(1.0, state_dim + 1.0), (channels, 1))),
            requires_grad=True,
        )
        self.d = Tensor(np.ones(channels), requires_grad=True)
        self.proj_b = Linear(channels, state_dim, rng, bias=True)
        self.proj_c = Linear(channels, state_dim, rng, bias=True)
        self.proj_dt = Linear(channels, channels, rng, bias=True)
        dt = np.exp(rng.uniform(np.log(dt_min), np.log(dt_max), size=channels))
        self.proj_dt.bias.data[:] = dt + np.log(-np.expm1(-dt))  # inverse softplus
        self.channels = channels
        self.state_dim = state_dim
        self.exact_bbar = exact_bbar

    def realized_a(self) -> Tensor:
        return ad.neg(ad.exp(self.a_log))


def discretize(a: np.ndarray, b_k: np.ndarray, delta_k: np.ndarray,
               exact: bool = False, allow_zero: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Discretise diagonal dynamics: Abar = exp(delta*a), Bbar = delta*b.

    ``a``: (C, N) realised diagonal entries; ``b_k``: (..., L, N) per-step
    input matrices; ``delta_k``: (..., L, C) positive timescales. Returns
    (Abar, Bbar) shaped (..., L, C, N). ``exact`` switches Bbar to the
    zero-order-hold integral, with the delta*b limit where a == 0.
    """
    a = np.asarray(a, dtype=float)
    b_k = np.asarray(b_k, dtype=float)
    delta_k = np.asarray(delta_k, dtype=float)
    if (delta_k < 0).any() or (not allow_zero and (delta_k == 0).any()):
        bad = delta_k.min()
        raise ContractError(f"timescale delta must be positive, found {bad}")
    expo = delta_k[..., :, None] * a  # (..., L, C, N)
    abar = np.exp(expo)
    if exact:
        with np.errstate(invalid="ignore", divide="ignore"):
            f = np.expm1(expo) / a
        f = np.where(a == 0.0, delta_k[..., :, None] * np.ones_like(a), f)
        bbar = f * b_k[..., :, None, :]
    else:
        bbar = delta_k[..., :, None] * b_k[..., :, None, :]
    return abar, bbar


def _project(x: Tensor, params: SSMParams) -> tuple[Tensor, Tensor, Tensor, Tensor, Tensor]:
    """Input-dependent B, C, delta plus realised A and D."""
    bk = params.proj_b(x)
    ck = params.proj_c(x)
    delta = ad.softplus(params.proj_dt(x))
    return bk, ck, delta, params.realized_a(), params.d


def _check_scan_input(x: Tensor) -> tuple[np.ndarray, bool]:
    if x.ndim == 2:
        arr = x.data[None]
        squeeze = True
    elif x.ndim == 3:
        arr = x.data
        squeeze = False
    else:
        raise ContractError(f"scan input must be (L, C) or (G, L, C), got {x.shape}")
    if arr.shape[1] < 1:
        raise ContractError("scan needs at least one step")
    if np.isnan(arr).any():
        k = int(np.argwhere(np.isnan(arr))[0][1])
        raise NumericError(f"NaN in scan input at step {k}")
    return arr, squeeze


def _decay_factors(delta: np.ndarray, a: np.ndarray, exact: bool):
    """Vectorised da = exp(delta*A) and, when exact, f = expm1(delta*A)/A."""
    expo = delta[:, :, :, None] * a[None, None]
    da = np.exp(expo)
    f = (np.expm1(expo) / a[None, None]) if exact else dummy_f(delta.dtype)
    return da, f


def _scan_core(x: Tensor, bk: Tensor, ck: Tensor, delta: Tensor,
               a: Tensor, d: Tensor, forward_fn, exact: bool,
               return_states: bool = False):
    """Custom-gradient scan op; backward always differentiates the
    sequential recurrence, regardless of the forward algorithm."""
    da, f = _decay_factors(delta.data, a.data, exact)
    y, h = forward_fn(da, f, delta.data, bk.data, ck.data, x.data, d.data, exact)

    def vjp(gy):
        gdelta, ga, gb, gc, gx, gd = scan_bwd(
            da, f, delta.data, a.data, bk.data, ck.data, x.data, d.data, h, gy, exact
        )
        return gx, gb, gc, gdelta, ga, gd

    out = ad.apply_op((x, bk, ck, delta, a, d), y, vjp)
    return (out, h) if return_states else out


def selective_scan_seq(x: Tensor, params: SSMParams,
                       return_states: bool = False):
    """Sequential selective scan over (L, C) or batched (G, L, C) input."""
    arr, squeeze = _check_scan_input(x)
    xb = x.reshape((1,) + x.shape) if squeeze else x
    bk, ck, delta, a, d = _project(xb, params)
    res = _scan_core(xb, bk, ck, delta, a, d, scan_fwd, params.exact_bbar,
                     return_states=return_states)
    y, h = res if return_states else (res, None)
    if squeeze:
        y = y.reshape(y.shape[1:])
        if h is not None:
            h = h[0]
    return (y, h) if return_states else y


def _scan_par_fwd(da, f, delta, bk, ck, x, d, exact, chunks):
    """Chunked forward: local scans from zero state, then associative
    carry combine (a2, b2) o (a1, b1) = (a2*a1, a2*b1 + b2) across chunks."""
    G, L, C = delta.shape
    N = da.shape[3]
    P = max(1, min(chunks, L))
    bounds = np.linspace(0, L, P + 1).astype(int)
    y = np.empty_like(x)
    h = np.empty((G, L, C, N), dtype=delta.dtype)
    carry = np.zeros((G, C, N), dtype=delta.dtype)
    for j in range(P):
        lo, hi = bounds[j], bounds[j + 1]
        if lo == hi:
            continue
        fj = f[:, lo:hi] if exact else f
        _, h_loc = scan_fwd(da[:, lo:hi], fj, delta[:, lo:hi], bk[:, lo:hi],
                            ck[:, lo:hi], x[:, lo:hi], d, exact)
        # within-chunk decay products via cumulative product of the factors
        prod = np.cumprod(da[:, lo:hi], axis=1)
        h[:, lo:hi] = h_loc + prod * carry[:, None]
        carry = h[:, hi - 1]
        y[:, lo:hi] = (
            np.einsum("glcn,gln->glc", h[:, lo:hi], ck[:, lo:hi], optimize=True)
            + d[None, None, :] * x[:, lo:hi]
        )
    return y, h


def selective_scan_par(x: Tensor, params: SSMParams, chunks: int = 4):
    """Work-partitioned scan; matches the sequential form within fp rounding."""
    arr, squeeze = _check_scan_input(x)
    xb = x.reshape((1,) + x.shape) if squeeze else x
    bk, ck, delta, a, d = _project(xb, params)

    def fwd(da, f, dl, bb, cc, xx, dd, exact):
        return _scan_par_fwd(da, f, dl, bb, cc, xx, dd, exact, chunks)

    y = _scan_core(xb, bk, ck, delta, a, d, fwd, params.exact_bbar)
    if squeeze:
        y = y.reshape(y.shape[1:])
    return y
