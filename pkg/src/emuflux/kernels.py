"""Hot elementwise kernels with two interchangeable backends.

The matrix products that dominate training go through BLAS either way; what
lives here are the fused elementwise loops (activations, Adam update,
Gaussian NLL terms) that would otherwise cost several numpy temporaries per
training step. Each kernel has a numba @njit build and a pure-numpy build.

Backend selection, once at import time:

    EMUFLUX_BACKEND=auto    use numba when importable (default)
    EMUFLUX_BACKEND=numba   require numba, fail loudly if missing
    EMUFLUX_BACKEND=numpy   force the pure-numpy path

Both backends implement identical formulas; they may differ in the last ulp
because numpy's vectorized exp/log and libm's are not bit-identical.
``benchmarks/bench_kernels.py`` times the two side by side and reports the
observed numerical gap.
"""

import os

import numpy as np

__all__ = [
    "BACKEND",
    "softplus",
    "sigmoid",
    "sigma_head_forward",
    "sigma_head_backward",
    "adam_update",
    "nll_core",
    "numpy_impl",
    "numba_impl",
]


# ---------------------------------------------------------------------------
# pure-numpy backend
# ---------------------------------------------------------------------------

def _softplus_np(z):
    # max(z,0) + log1p(exp(-|z|)) is exact in both tails and never overflows
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def _sigmoid_np(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _sigma_head_forward_np(z, sqrt_sigma_min):
    s = _softplus_np(z) + sqrt_sigma_min
    return s, s * s


def _sigma_head_backward_np(z, s, g_sigma2):
    return g_sigma2 * 2.0 * s * _sigmoid_np(z)


def _adam_update_np(param, grad, m, v, t, lr, beta1, beta2, eps):
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    param -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def _nll_core_np(y, mu, sigma2):
    r = y - mu
    inv = 1.0 / sigma2
    total = 0.5 * float(np.sum(np.log(sigma2) + r * r * inv))
    d_mu = -r * inv
    d_sigma2 = 0.5 * (inv - r * r * inv * inv)
    return total, d_mu, d_sigma2


class numpy_impl:
    softplus = staticmethod(_softplus_np)
    sigmoid = staticmethod(_sigmoid_np)
    sigma_head_forward = staticmethod(_sigma_head_forward_np)
    sigma_head_backward = staticmethod(_sigma_head_backward_np)
    adam_update = staticmethod(_adam_update_np)
    nll_core = staticmethod(_nll_core_np)


# ---------------------------------------------------------------------------
# numba backend
# ---------------------------------------------------------------------------

numba_impl = None

try:
    import numba

    _HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised via EMUFLUX_BACKEND=numpy
    _HAS_NUMBA = False

if _HAS_NUMBA:
    _jit = numba.njit(cache=True, nogil=True)

    @_jit
    def _softplus_nb(z):
        out = np.empty_like(z)
        flat_z = z.ravel()
        flat_o = out.ravel()
        for i in range(flat_z.size):
            x = flat_z[i]
            a = x if x > 0.0 else 0.0
            flat_o[i] = a + np.log1p(np.exp(-abs(x)))
        return out

    @_jit
    def _sigmoid_nb(z):
        out = np.empty_like(z)
        flat_z = z.ravel()
        flat_o = out.ravel()
        for i in range(flat_z.size):
            x = flat_z[i]
            if x >= 0.0:
                flat_o[i] = 1.0 / (1.0 + np.exp(-x))
            else:
                e = np.exp(x)
                flat_o[i] = e / (1.0 + e)
        return out

    @_jit
    def _sigma_head_forward_nb(z, sqrt_sigma_min):
        s = np.empty_like(z)
        s2 = np.empty_like(z)
        fz = z.ravel()
        fs = s.ravel()
        fs2 = s2.ravel()
        for i in range(fz.size):
            x = fz[i]
            a = x if x > 0.0 else 0.0
            si = a + np.log1p(np.exp(-abs(x))) + sqrt_sigma_min
            fs[i] = si
            fs2[i] = si * si
        return s, s2

    @_jit
    def _sigma_head_backward_nb(z, s, g_sigma2):
        out = np.empty_like(z)
        fz = z.ravel()
        fs = s.ravel()
        fg = g_sigma2.ravel()
        fo = out.ravel()
        for i in range(fz.size):
            x = fz[i]
            if x >= 0.0:
                sig = 1.0 / (1.0 + np.exp(-x))
            else:
                e = np.exp(x)
                sig = e / (1.0 + e)
            fo[i] = fg[i] * 2.0 * fs[i] * sig
        return out

    @_jit
    def _adam_update_nb(param, grad, m, v, t, lr, beta1, beta2, eps):
        bc1 = 1.0 - beta1 ** t
        bc2 = 1.0 - beta2 ** t
        fp = param.ravel()
        fg = grad.ravel()
        fm = m.ravel()
        fv = v.ravel()
        for i in range(fp.size):
            g = fg[i]
            fm[i] = beta1 * fm[i] + (1.0 - beta1) * g
            fv[i] = beta2 * fv[i] + (1.0 - beta2) * g * g
            fp[i] -= lr * (fm[i] / bc1) / (np.sqrt(fv[i] / bc2) + eps)

    @_jit
    def _nll_core_nb(y, mu, sigma2):
        d_mu = np.empty_like(mu)
        d_sigma2 = np.empty_like(sigma2)
        fy = y.ravel()
        fmu = mu.ravel()
        fs2 = sigma2.ravel()
        fdm = d_mu.ravel()
        fds = d_sigma2.ravel()
        total = 0.0
        for i in range(fy.size):
            r = fy[i] - fmu[i]
            inv = 1.0 / fs2[i]
            total += 0.5 * (np.log(fs2[i]) + r * r * inv)
            fdm[i] = -r * inv
            fds[i] = 0.5 * (inv - r * r * inv * inv)
        return total, d_mu, d_sigma2

    class numba_impl:  # noqa: F811 - intentional rebind when numba exists
        softplus = staticmethod(_softplus_nb)
        sigmoid = staticmethod(_sigmoid_nb)
        sigma_head_forward = staticmethod(_sigma_head_forward_nb)
        sigma_head_backward = staticmethod(_sigma_head_backward_nb)
        adam_update = staticmethod(_adam_update_nb)
        nll_core = staticmethod(_nll_core_nb)


# ---------------------------------------------------------------------------
# backend selection
# ---------------------------------------------------------------------------

def _select_backend() -> str:
    want = os.environ.get("EMUFLUX_BACKEND", "auto").strip().lower()
    if want not in ("auto", "numba", "numpy"):
        raise RuntimeError(
            f"EMUFLUX_BACKEND must be auto, numba or numpy, got {want!r}"
        )
    if want == "numpy":
        return "numpy"
    if want == "numba" and not _HAS_NUMBA:
        raise RuntimeError("EMUFLUX_BACKEND=numba but numba is not importable")
    return "numba" if _HAS_NUMBA else "numpy"


BACKEND = _select_backend()
_impl = numba_impl if BACKEND == "numba" else numpy_impl

softplus = _impl.softplus
sigmoid = _impl.sigmoid
sigma_head_forward = _impl.sigma_head_forward
sigma_head_backward = _impl.sigma_head_backward
adam_update = _impl.adam_update
nll_core = _impl.nll_core
