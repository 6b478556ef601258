"""Hot selective-scan recurrence kernels (numba-jitted, numpy fallback).

The decay factors da = exp(delta * A) arrive precomputed (numpy's exp is
vectorised; scalar exp inside a jitted loop is not) and are reused by the
backward pass. ``f`` carries the exact zero-order-hold input factor
expm1(delta*A)/A when ``exact`` is set, else a dummy placeholder.

Recurrence per group g, channel c, state n:
    bb  = delta * B[k, n]      (first-order), or  f * B[k, n]  (exact)
    h_k = da * h_{k-1} + bb * x_k
    y_k = sum_n h_k[c, n] * C[k, n] + D[c] * x_k
"""
from __future__ import annotations

import numpy as np

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    _HAVE_NUMBA = False


def _scan_fwd_py(da, f, delta, Bk, Ck, x, D, exact):
    G, L, C = delta.shape
    N = da.shape[3]
    h = np.zeros((G, L, C, N), dtype=delta.dtype)
    hprev = np.zeros((G, C, N), dtype=delta.dtype)
    for k in range(L):
        if exact:
            bb = f[:, k] * Bk[:, k, None, :]
        else:
            bb = delta[:, k, :, None] * Bk[:, k, None, :]
        hprev = da[:, k] * hprev + bb * x[:, k, :, None]
        h[:, k] = hprev
    y = np.einsum("glcn,gln->glc", h, Ck, optimize=True) + D[None, None, :] * x
    return y.astype(delta.dtype, copy=False), h


def _scan_bwd_py(da, f, delta, A, Bk, Ck, x, D, h, gy, exact):
    G, L, C = delta.shape
    gdelta = np.zeros_like(delta)
    gA = np.zeros_like(A)
    gB = np.zeros_like(Bk)
    gC = np.zeros_like(Ck)
    gx = np.zeros_like(x)
    gD = np.zeros_like(D)
    gh = np.zeros((G, C, da.shape[3]), dtype=delta.dtype)
    Ae = A[None, :, :]
    for k in range(L - 1, -1, -1):
        gyk = gy[:, k]
        gD += np.einsum("gc,gc->c", gyk, x[:, k])
        gxk = gyk * D[None, :]
        gC[:, k] = np.einsum("gc,gcn->gn", gyk, h[:, k])
        ghv = gh + gyk[:, :, None] * Ck[:, k, None, :]
        dak = da[:, k]
        if exact:
            fk = f[:, k]
            gB[:, k] = np.einsum("gcn,gc->gn", ghv * fk, x[:, k])
            gxk = gxk + np.einsum("gcn,gn->gc", ghv * fk, Bk[:, k])
            gdk = np.einsum("gcn,gn->gc", ghv * dak * x[:, k, :, None], Bk[:, k])
            gA += (ghv * x[:, k, :, None] * Bk[:, k, None, :]
                   * (delta[:, k, :, None] * dak / Ae - fk)).sum(axis=0)
        else:
            gB[:, k] = np.einsum("gcn,gc->gn", ghv * delta[:, k, :, None], x[:, k])
            gxk = gxk + np.einsum("gcn,gn->gc", ghv, Bk[:, k]) * delta[:, k]
            gdk = np.einsum("gcn,gc,gn->gc", ghv, x[:, k], Bk[:, k])
        if k > 0:
            hp = h[:, k - 1]
            gdk = gdk + (ghv * dak * Ae * hp).sum(axis=-1)
            gA += (ghv * dak * delta[:, k, :, None] * hp).sum(axis=0)
            gh = ghv * dak
        else:
            gh = np.zeros_like(gh)
        gdelta[:, k] = gdk
        gx[:, k] = gxk
    return gdelta, gA, gB, gC, gx, gD


if _HAVE_NUMBA:

    @numba.njit(cache=True, fastmath=True)
    def _scan_fwd_nb(da, f, delta, Bk, Ck, x, D, exact):  # pragma: no cover - jitted
        G, L, C = delta.shape
        N = da.shape[3]
        h = np.zeros((G, L, C, N), dtype=delta.dtype)
        y = np.empty((G, L, C), dtype=delta.dtype)
        for g in range(G):
            for k in range(L):
                for c in range(C):
                    d = delta[g, k, c]
                    xc = x[g, k, c]
                    acc = d * 0.0
                    if k == 0:
                        for n in range(N):
                            bb = (f[g, k, c, n] if exact else d) * Bk[g, k, n]
                            hv = bb * xc
                            h[g, k, c, n] = hv
                            acc += hv * Ck[g, k, n]
                    else:
                        for n in range(N):
                            bb = (f[g, k, c, n] if exact else d) * Bk[g, k, n]
                            hv = da[g, k, c, n] * h[g, k - 1, c, n] + bb * xc
                            h[g, k, c, n] = hv
                            acc += hv * Ck[g, k, n]
                    y[g, k, c] = acc + D[c] * xc
        return y, h

    @numba.njit(cache=True, fastmath=True)
    def _scan_bwd_nb(da, f, delta, A, Bk, Ck, x, D, h, gy, exact):  # pragma: no cover
        G, L, C = delta.shape
        N = da.shape[3]
        gdelta = np.zeros((G, L, C), dtype=delta.dtype)
        gA = np.zeros((C, N), dtype=delta.dtype)
        gB = np.zeros((G, L, N), dtype=delta.dtype)
        gC = np.zeros((G, L, N), dtype=delta.dtype)
        gx = np.zeros((G, L, C), dtype=delta.dtype)
        gD = np.zeros(C, dtype=delta.dtype)
        gh = np.zeros((C, N), dtype=delta.dtype)
        for g in range(G):
            for c in range(C):
                for n in range(N):
                    gh[c, n] = 0.0
            for k in range(L - 1, -1, -1):
                for c in range(C):
                    d = delta[g, k, c]
                    xc = x[g, k, c]
                    gyv = gy[g, k, c]
                    gD[c] += gyv * xc
                    gxv = gyv * D[c]
                    gdv = gyv * 0.0
                    for n in range(N):
                        a = A[c, n]
                        dav = da[g, k, c, n]
                        ghv = gh[c, n] + gyv * Ck[g, k, n]
                        gC[g, k, n] += gyv * h[g, k, c, n]
                        if exact:
                            fv = f[g, k, c, n]
                            gB[g, k, n] += ghv * xc * fv
                            gxv += ghv * Bk[g, k, n] * fv
                            gdv += ghv * xc * Bk[g, k, n] * dav
                            gA[c, n] += ghv * xc * Bk[g, k, n] * (d * dav / a - fv)
                        else:
                            gB[g, k, n] += ghv * d * xc
                            gxv += ghv * d * Bk[g, k, n]
                            gdv += ghv * Bk[g, k, n] * xc
                        if k > 0:
                            hp = h[g, k - 1, c, n]
                            gdv += ghv * dav * a * hp
                            gA[c, n] += ghv * dav * d * hp
                            gh[c, n] = ghv * dav
                        else:
                            gh[c, n] = 0.0
                    gx[g, k, c] = gxv
                    gdelta[g, k, c] = gdv
        return gdelta, gA, gB, gC, gx, gD

    scan_fwd = _scan_fwd_nb
    scan_bwd = _scan_bwd_nb
else:
    scan_fwd = _scan_fwd_py
    scan_bwd = _scan_bwd_py


_DUMMY: dict[str, np.ndarray] = {}


def dummy_f(dtype) -> np.ndarray:
    """Placeholder for the exact-form factor when the first-order form runs."""
    key = np.dtype(dtype).name
    if key not in _DUMMY:
        _DUMMY[key] = np.zeros((1, 1, 1, 1), dtype=dtype)
    return _DUMMY[key]
