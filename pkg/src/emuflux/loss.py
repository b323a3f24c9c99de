"""Heteroscedastic Gaussian training objective and gradient-sign perturbation.

The per-element objective is 0.5*log(sigma2) + (y-mu)^2 / (2*sigma2),
summed over output dimensions and averaged over the batch, plus a weight
prior beta * R(theta) where R is either the squared L2 norm (default, the
usual Gaussian-prior term) or the plain L2 norm. The 0.5*log(2*pi) constant
is gradient-free; it is excluded from the training objective and only added
to reported values when include_constant is set.

Input perturbations are one-step gradient-sign: x' = x + eps * sign(dL/dx),
computed in standardized input space, and the blended objective is
alpha * L(x) + (1 - alpha) * L(x') with x' treated as a constant.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidArgumentError
from .model import ProbNet, backward, forward, param_vector_norms

REG_KINDS = ("squared_l2", "l2_norm")
LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class LossConfig:
    beta: float = 5e-4
    alpha: float = 0.9
    epsilon: float = 5e-4
    reg_kind: str = "squared_l2"
    include_constant: bool = False

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidArgumentError("alpha must lie in [0, 1]")
        if self.beta < 0 or self.epsilon < 0:
            raise InvalidArgumentError("beta and epsilon must be >= 0")
        if self.reg_kind not in REG_KINDS:
            raise InvalidArgumentError(f"reg_kind must be one of {REG_KINDS}")


def gaussian_nll(
    y: np.ndarray,
    mu: np.ndarray,
    sigma2: np.ndarray,
    cfg: LossConfig,
    reg_term: float = 0.0,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Batch-mean NLL plus beta*reg_term, with gradients in mu and sigma2.

    Gradients carry the same 1/batch scaling as the loss, so they are the
    exact derivatives of the returned scalar.
    """
    if y.shape != mu.shape or y.shape != sigma2.shape:
        raise InvalidArgumentError(
            f"shape mismatch: y {y.shape}, mu {mu.shape}, sigma2 {sigma2.shape}"
        )
    if not np.all(sigma2 > 0):
        raise InvalidArgumentError("sigma2 must be strictly positive")
    n = y.shape[0]
    total, d_mu, d_sigma2 = kernels.nll_core(
        np.ascontiguousarray(y, dtype=np.float64),
        np.ascontiguousarray(mu, dtype=np.float64),
        np.ascontiguousarray(sigma2, dtype=np.float64),
    )
    loss = total / n
    if cfg.include_constant:
        loss += 0.5 * LOG_2PI * y.shape[1]
    loss += cfg.beta * reg_term
    d_mu /= n
    d_sigma2 /= n
    return loss, d_mu, d_sigma2


def fgsm_perturb(x: np.ndarray, input_grads: np.ndarray, epsilon: float) -> np.ndarray:
    """x + epsilon * sign(input_grads), with sign(0) = 0.

    Where rounding of x + epsilon lands one ulp outside the epsilon ball,
    the result is nudged back in, so max|x_adv - x| <= epsilon holds in
    exact arithmetic too.
    """
    x = np.asarray(x, dtype=np.float64)
    g = np.asarray(input_grads, dtype=np.float64)
    if x.shape != g.shape:
        raise InvalidArgumentError(f"shape mismatch: {x.shape} vs {g.shape}")
    if epsilon < 0:
        raise InvalidArgumentError("epsilon must be >= 0")
    x_adv = x + epsilon * np.sign(g)
    over = np.abs(x_adv - x) > epsilon
    if np.any(over):
        x_adv[over] = np.nextafter(x_adv[over], x[over])
    return x_adv


def regularization_gradients(net: ProbNet, cfg: LossConfig) -> tuple[float, list[np.ndarray]]:
    """(reg_term, its gradient per parameter) for the configured norm."""
    l2_squared, l2 = param_vector_norms(net)
    if cfg.reg_kind == "squared_l2":
        return l2_squared, [2.0 * cfg.beta * p for p in net.params()]
    if l2 == 0.0:
        return 0.0, [np.zeros_like(p) for p in net.params()]
    return l2, [(cfg.beta / l2) * p for p in net.params()]


def adversarial_loss(
    net: ProbNet,
    x: np.ndarray,
    y: np.ndarray,
    cfg: LossConfig,
) -> tuple[float, list[np.ndarray]]:
    """Blended clean/perturbed objective and its parameter gradients.

    With alpha == 1 or epsilon == 0 this reduces bit-for-bit to the plain
    objective on x (the perturbed pass is skipped entirely).
    """
    reg_term, reg_grads = regularization_gradients(net, cfg)
    mu, sigma2, cache = forward(net, x)
    loss_clean, d_mu, d_sigma2 = gaussian_nll(y, mu, sigma2, cfg, reg_term)
    grads_clean, input_grads = backward(net, cache, d_mu, d_sigma2)

    if cfg.alpha == 1.0 or cfg.epsilon == 0.0:
        return loss_clean, [g + rg for g, rg in zip(grads_clean, reg_grads)]

    x_adv = fgsm_perturb(x, input_grads, cfg.epsilon)
    mu_a, sigma2_a, cache_a = forward(net, x_adv)
    loss_adv, d_mu_a, d_sigma2_a = gaussian_nll(y, mu_a, sigma2_a, cfg, reg_term)
    grads_adv, _ = backward(net, cache_a, d_mu_a, d_sigma2_a)

    a = cfg.alpha
    loss = a * loss_clean + (1.0 - a) * loss_adv
    grads = [
        a * gc + (1.0 - a) * ga + rg
        for gc, ga, rg in zip(grads_clean, grads_adv, reg_grads)
    ]
    return loss, grads


def mse_loss(
    net: ProbNet,
    x: np.ndarray,
    y: np.ndarray,
    cfg: LossConfig,
) -> tuple[float, list[np.ndarray]]:
    """Mean-over-batch, sum-over-dims squared error plus the weight prior.

    Alternative objective for the empirical-variance baseline; the sigma
    head receives no data gradient here.
    """
    reg_term, reg_grads = regularization_gradients(net, cfg)
    mu, sigma2, cache = forward(net, x)
    n = x.shape[0]
    r = mu - y
    loss = float(np.sum(r * r)) / n + cfg.beta * reg_term
    d_mu = (2.0 / n) * r
    grads, _ = backward(net, cache, d_mu, np.zeros_like(sigma2))
    return loss, [g + rg for g, rg in zip(grads, reg_grads)]
