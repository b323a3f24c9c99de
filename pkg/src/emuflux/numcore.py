"""Numerical substrate: activations, initialization, Adam, matrix helpers.

Everything is 64-bit float and row-major throughout. Matrix products are
delegated to numpy (BLAS); the elementwise hot paths go through
:mod:`emuflux.kernels`, which picks a numba or pure-numpy backend at import.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidArgumentError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def as_matrix(a) -> np.ndarray:
    """Coerce to a C-contiguous float64 2-D array."""
    out = np.ascontiguousarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise InvalidArgumentError(f"expected a 2-D array, got ndim={out.ndim}")
    return out


def softplus(z):
    """log(1 + exp(z)), overflow-safe for any finite z.

    Computed as max(z, 0) + log1p(exp(-|z|)): the exp argument is always
    <= 0, so the result is finite and strictly positive for all inputs.
    Accepts scalars or arrays.
    """
    arr = np.asarray(z, dtype=np.float64)
    out = kernels.softplus(np.ascontiguousarray(arr))
    return float(out) if arr.ndim == 0 else out


def softplus_grad(z):
    """Derivative of softplus: the logistic sigmoid 1 / (1 + exp(-z))."""
    arr = np.asarray(z, dtype=np.float64)
    out = kernels.sigmoid(np.ascontiguousarray(arr))
    return float(out) if arr.ndim == 0 else out


def xavier_normal_init(fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    """fan_in x fan_out matrix of N(0, 2/(fan_in+fan_out)) entries."""
    if fan_in < 1 or fan_out < 1:
        raise InvalidArgumentError(
            f"fan dimensions must be >= 1, got ({fan_in}, {fan_out})"
        )
    sigma = np.sqrt(2.0 / (fan_in + fan_out))
    return rng.standard_normal((fan_in, fan_out)) * sigma


@dataclass
class AdamState:
    """Per-parameter Adam accumulators plus hyperparameters."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 2e-4
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps_adam: float = ADAM_EPS

    @classmethod
    def for_param(cls, param: np.ndarray, lr: float) -> "AdamState":
        return cls(m=np.zeros_like(param), v=np.zeros_like(param), lr=lr)


def adam_step(param: np.ndarray, grad: np.ndarray, state: AdamState) -> None:
    """One in-place Adam update with bias correction; increments state.t."""
    if param.shape != grad.shape or param.shape != state.m.shape:
        raise InvalidArgumentError(
            f"shape mismatch: param {param.shape}, grad {grad.shape}, "
            f"state {state.m.shape}"
        )
    state.t += 1
    kernels.adam_update(
        param, grad, state.m, state.v,
        state.t, state.lr, state.beta1, state.beta2, state.eps_adam,
    )


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise InvalidArgumentError(
            f"matmul shapes not conformable: {a.shape} x {b.shape}"
        )
    return a @ b


def add_bias(a: np.ndarray, bias: np.ndarray) -> np.ndarray:
    a = as_matrix(a)
    bias = np.ascontiguousarray(bias, dtype=np.float64)
    if bias.ndim != 1 or bias.shape[0] != a.shape[1]:
        raise InvalidArgumentError(
            f"bias shape {bias.shape} does not match {a.shape[1]} columns"
        )
    return a + bias


def elementwise_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidArgumentError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a * b
