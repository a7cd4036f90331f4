"""Small dense kernels shared by the embedding and CRF models.

Everything is float64. Random streams come from numpy's PCG64 bit generator
(``numpy.random.default_rng``), whose output for a given seed is identical on
every platform numpy supports.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def linear_forward(W: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Affine map ``W @ x + b``; raises ConfigError on a shape mismatch."""
    if W.ndim != 2 or W.shape[1] != x.shape[0] or W.shape[0] != b.shape[0]:
        raise ConfigError(
            f"linear_forward: W{W.shape}, b{b.shape}, x{x.shape} are incompatible"
        )
    return W @ x + b


def hardtanh(x: np.ndarray) -> np.ndarray:
    return np.clip(x, -1.0, 1.0)


def hardtanh_grad(x: np.ndarray) -> np.ndarray:
    # derivative taken as 0 on the saturation boundary itself
    return ((x > -1.0) & (x < 1.0)).astype(np.float64)


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - np.max(z, axis=axis, keepdims=True))
    return e / np.sum(e, axis=axis, keepdims=True)


def log_sum_exp(z: np.ndarray, axis: int | None = None) -> np.ndarray | float:
    """Max-shifted log-sum-exp. Entries may be -inf (masked); an all -inf
    slice gives -inf rather than nan."""
    z = np.asarray(z, dtype=np.float64)
    m = np.max(z, axis=axis, keepdims=True)
    m_safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(z - m_safe), axis=axis, keepdims=True)) + m_safe
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)


def sgd_step(param: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
    """In-place ``param -= lr * grad``; returns ``param`` for chaining."""
    if param.shape != grad.shape:
        raise ConfigError(f"sgd_step: param {param.shape} vs grad {grad.shape}")
    if not lr > 0:
        raise ConfigError(f"sgd_step: learning rate must be positive, got {lr}")
    param -= lr * grad
    return param


def finite_diff_check(
    f: Callable[[], float],
    params: Sequence[np.ndarray],
    analytic_grads: Sequence[np.ndarray],
    eps: float = 1e-5,
) -> float:
    """Max relative error between ``analytic_grads`` and central differences.

    ``f`` is evaluated with no arguments and must read ``params`` (which are
    perturbed in place, one coordinate at a time, and restored afterwards).
    The relative error of a coordinate is ``|a - n| / max(|a|, |n|, 1e-8)``.
    """
    if not eps > 0:
        raise ConfigError("finite_diff_check: eps must be positive")
    worst = 0.0
    for p, g in zip(params, analytic_grads):
        g = np.asarray(g, dtype=np.float64)
        if p.shape != g.shape:
            raise ConfigError(f"finite_diff_check: param {p.shape} vs grad {g.shape}")
        flat = p.reshape(-1)
        if not np.shares_memory(flat, p):
            raise ConfigError("finite_diff_check: parameters must be contiguous arrays")
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = f()
            flat[i] = orig - eps
            down = f()
            flat[i] = orig
            num = (up - down) / (2.0 * eps)
            a = gflat[i]
            err = abs(a - num) / max(abs(a), abs(num), 1e-8)
            worst = max(worst, err)
    return worst
