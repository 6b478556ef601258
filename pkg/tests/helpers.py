"""Shared test oracles: central finite differences against taped gradients."""
from __future__ import annotations

import numpy as np

from mambamir import autodiff as ad
from mambamir.autodiff import Tensor, backward


def finite_difference_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar f at x, elementwise."""
    g = np.zeros_like(x, dtype=float)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * h)
    return g


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(np.abs(b).max(), 1e-8)
    return float(np.abs(a - b).max() / denom)


def check_gradients(build_loss, tensors: dict[str, Tensor], h: float = 1e-5,
                    tol: float = 1e-6) -> dict[str, float]:
    """Compare taped grads of build_loss() against finite differences.

    ``build_loss`` must recompute the loss from the current tensor values;
    ``tensors`` maps names to the leaves to check. Returns per-leaf errors.
    """
    for t in tensors.values():
        t.grad = None
    loss = build_loss()
    backward(loss)
    errors = {}
    for name, t in tensors.items():
        assert t.grad is not None, f"no gradient reached {name}"

        def f(arr, _t=t):
            with ad.no_grad():
                return build_loss().item()

        fd = finite_difference_grad(f, t.data, h=h)
        errors[name] = rel_error(t.grad, fd)
        assert errors[name] < tol, f"{name}: rel error {errors[name]:.3e} >= {tol}"
    return errors
