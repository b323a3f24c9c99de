"""Probabilistic feedforward network with dual mean/variance heads.

Hidden wiring: with h0 = x, layer 1 reads h0 and every later layer k reads
concat(h_{k-1}, h_{k-2}), so at width w the input widths run
d_in, w + d_in, 2w, 2w, ... All hidden layers use softplus. The mean head is
linear; the deviation head is softplus plus a floor of sqrt(sigma_min), and
its square is the predicted variance, so sigma2 >= sigma_min always holds.

The backward pass returns exact reverse-mode gradients of
sum(d_mu * mu + d_sigma2 * sigma2) with respect to every parameter and to
the input batch (needed for gradient-sign input perturbations).
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import InvalidArgumentError, InvalidStateError, NumericOverflowError
from .numcore import xavier_normal_init
from .rng import derive_seed, make_generator

INIT_STREAM = 0  # substream tag: parameter initialization


@dataclass(frozen=True)
class ArchSpec:
    """Network shape: input/output dims, hidden stack size, variance floor."""

    d_in: int
    d_out: int
    n_hidden: int
    width: int
    sigma_min: float = 1e-6

    def __post_init__(self):
        for name in ("d_in", "d_out", "n_hidden", "width"):
            if getattr(self, name) < 1:
                raise InvalidArgumentError(f"{name} must be >= 1")
        if not self.sigma_min > 0:
            raise InvalidArgumentError("sigma_min must be > 0")

    def hidden_input_widths(self) -> list[int]:
        """Input width of each hidden layer under the concatenation rule."""
        widths = [self.d_in]
        for k in range(2, self.n_hidden + 1):
            prev = self.width
            prev2 = self.d_in if k == 2 else self.width
            widths.append(prev + prev2)
        return widths

    def n_params(self) -> int:
        hidden = sum(w * self.width + self.width for w in self.hidden_input_widths())
        heads = 2 * (self.width * self.d_out + self.d_out)
        return hidden + heads


@dataclass
class ProbNet:
    """One ensemble member: hidden stack plus mu and sigma heads."""

    spec: ArchSpec
    hidden: list[tuple[np.ndarray, np.ndarray]]
    mu_w: np.ndarray
    mu_b: np.ndarray
    sigma_w: np.ndarray
    sigma_b: np.ndarray
    seed: int = 0

    def params(self) -> list[np.ndarray]:
        """All parameter arrays in the canonical (checkpoint) order."""
        out: list[np.ndarray] = []
        for w, b in self.hidden:
            out.append(w)
            out.append(b)
        out.extend([self.mu_w, self.mu_b, self.sigma_w, self.sigma_b])
        return out

    def copy(self) -> "ProbNet":
        return ProbNet(
            spec=self.spec,
            hidden=[(w.copy(), b.copy()) for w, b in self.hidden],
            mu_w=self.mu_w.copy(),
            mu_b=self.mu_b.copy(),
            sigma_w=self.sigma_w.copy(),
            sigma_b=self.sigma_b.copy(),
            seed=self.seed,
        )


def init_net(spec: ArchSpec, seed: int) -> ProbNet:
    """Xavier-normal weights, zero biases; fully determined by the seed."""
    rng = make_generator(derive_seed(seed, INIT_STREAM))
    hidden = []
    for in_w in spec.hidden_input_widths():
        w = xavier_normal_init(in_w, spec.width, rng)
        hidden.append((w, np.zeros(spec.width)))
    mu_w = xavier_normal_init(spec.width, spec.d_out, rng)
    sigma_w = xavier_normal_init(spec.width, spec.d_out, rng)
    return ProbNet(
        spec=spec,
        hidden=hidden,
        mu_w=mu_w,
        mu_b=np.zeros(spec.d_out),
        sigma_w=sigma_w,
        sigma_b=np.zeros(spec.d_out),
        seed=seed,
    )


@dataclass
class ForwardCache:
    """Activation record from one forward call, consumed by backward."""

    net: ProbNet
    x: np.ndarray
    inputs: list[np.ndarray] = field(default_factory=list)
    zs: list[np.ndarray] = field(default_factory=list)
    hs: list[np.ndarray] = field(default_factory=list)
    z_sigma: np.ndarray | None = None
    s: np.ndarray | None = None


def _check_finite(arr: np.ndarray, where: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericOverflowError(f"non-finite values in {where}")


def forward(net: ProbNet, x_batch: np.ndarray) -> tuple[np.ndarray, np.ndarray, ForwardCache]:
    """Batched forward pass; returns (mu, sigma2, cache)."""
    x = np.ascontiguousarray(x_batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.spec.d_in:
        raise InvalidArgumentError(
            f"input batch must be n x {net.spec.d_in}, got {x.shape}"
        )
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("input batch contains non-finite values")

    cache = ForwardCache(net=net, x=x)
    h_prev2: np.ndarray | None = None
    h_prev = x
    for k, (w, b) in enumerate(net.hidden, start=1):
        a = h_prev if k == 1 else np.concatenate([h_prev, h_prev2], axis=1)
        z = a @ w + b
        _check_finite(z, f"hidden layer {k}")
        h = kernels.softplus(z)
        cache.inputs.append(a)
        cache.zs.append(z)
        cache.hs.append(h)
        h_prev2 = x if k == 1 else h_prev
        h_prev = h

    top = cache.hs[-1]
    mu = top @ net.mu_w + net.mu_b
    _check_finite(mu, "mu head")
    z_sigma = top @ net.sigma_w + net.sigma_b
    _check_finite(z_sigma, "sigma head")
    s, sigma2 = kernels.sigma_head_forward(z_sigma, np.sqrt(net.spec.sigma_min))
    cache.z_sigma = z_sigma
    cache.s = s
    return mu, sigma2, cache


def backward(
    net: ProbNet,
    cache: ForwardCache,
    d_mu: np.ndarray,
    d_sigma2: np.ndarray,
) -> tuple[list[np.ndarray], np.ndarray]:
    """Gradients of sum(d_mu*mu + d_sigma2*sigma2) w.r.t. params and inputs.

    Returns (param_grads in canonical order, input_grads n x d_in).
    """
    if cache.net is not net:
        raise InvalidStateError("cache was produced by a different network")
    n = cache.x.shape[0]
    if d_mu.shape != (n, net.spec.d_out) or d_sigma2.shape != (n, net.spec.d_out):
        raise InvalidStateError("cotangent shapes do not match the cached batch")

    top = cache.hs[-1]
    d_z_sigma = kernels.sigma_head_backward(cache.z_sigma, cache.s, d_sigma2)

    g_mu_w = top.T @ d_mu
    g_mu_b = d_mu.sum(axis=0)
    g_sigma_w = top.T @ d_z_sigma
    g_sigma_b = d_z_sigma.sum(axis=0)

    # gradient flowing into each hidden output (index 0 is the input batch)
    g_h: list[np.ndarray] = [np.zeros_like(cache.x)]
    g_h += [np.zeros_like(h) for h in cache.hs]
    g_h[-1] = d_mu @ net.mu_w.T + d_z_sigma @ net.sigma_w.T

    hidden_grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(net.hidden)
    width = net.spec.width
    for k in range(len(net.hidden), 0, -1):
        w, _ = net.hidden[k - 1]
        dz = g_h[k] * kernels.sigmoid(cache.zs[k - 1])
        hidden_grads[k - 1] = (cache.inputs[k - 1].T @ dz, dz.sum(axis=0))
        ga = dz @ w.T
        if k == 1:
            g_h[0] += ga
        else:
            # concat backward: first slice feeds h_{k-1}, second h_{k-2}
            g_h[k - 1] += ga[:, :width]
            g_h[k - 2] += ga[:, width:]

    grads: list[np.ndarray] = []
    for gw, gb in hidden_grads:
        grads.append(gw)
        grads.append(gb)
    grads.extend([g_mu_w, g_mu_b, g_sigma_w, g_sigma_b])
    return grads, g_h[0]


def param_vector_norms(net: ProbNet) -> tuple[float, float]:
    """(sum of squared parameters, its square root) over all weights/biases."""
    l2_squared = 0.0
    for p in net.params():
        l2_squared += float(np.sum(p * p))
    return l2_squared, float(np.sqrt(l2_squared))
