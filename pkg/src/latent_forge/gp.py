"""Exact zero-mean Gaussian-process regression with an RBF kernel.

Hyperparameters are kept in log space. The covariance of the training
targets is ``K = alpha * exp(-0.5 |x_i - x_j|^2 / l^2) + (sigma_noise + jitter) I``;
``sigma_noise`` is a variance, added on the diagonal only. The jitter starts at
``1e-6 * alpha`` and is raised tenfold (up to ``1e-2 * alpha``) whenever the
Cholesky factorization fails.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.linalg.lapack import dpotri
from scipy.spatial.distance import cdist

from .errors import InvalidArgument, NumericFailure
from .ndcore import AdamState, adam_step, as_matrix

LOG_2PI = float(np.log(2.0 * np.pi))
JITTER_START = 1e-6
JITTER_MAX = 1e-2


@dataclass(frozen=True)
class KernelHyper:
    log_amplitude: float = 0.0
    log_lengthscale: float = 0.0
    log_noise: float = float(np.log(0.01))

    def __post_init__(self):
        for name in ("log_amplitude", "log_lengthscale", "log_noise"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise InvalidArgument(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)

    @property
    def amplitude(self):
        return float(np.exp(self.log_amplitude))

    @property
    def lengthscale(self):
        return float(np.exp(self.log_lengthscale))

    @property
    def noise(self):
        return float(np.exp(self.log_noise))

    def as_array(self):
        return np.array([self.log_amplitude, self.log_lengthscale, self.log_noise])

    @classmethod
    def from_array(cls, arr):
        a, l, s = (float(v) for v in arr)
        return cls(a, l, s)

    @classmethod
    def from_values(cls, amplitude=1.0, lengthscale=1.0, noise=0.01):
        return cls(float(np.log(amplitude)), float(np.log(lengthscale)), float(np.log(noise)))


@dataclass(frozen=True)
class PriorSpec:
    """Log-normal prior parameters applied to the amplitude and lengthscale."""

    mean: float = 0.0
    stdev: float = 1.0

    def __post_init__(self):
        if not self.stdev > 0:
            raise InvalidArgument("prior stdev must be positive")


@dataclass(frozen=True)
class GpFit:
    train_inputs: np.ndarray
    train_targets: np.ndarray
    hyper: KernelHyper
    cholesky_factor: np.ndarray
    alpha_vector: np.ndarray
    jitter: float


@dataclass(frozen=True)
class PosteriorPrediction:
    mean: np.ndarray
    variance: np.ndarray
    covariance: np.ndarray = None

    @property
    def std(self):
        return np.sqrt(self.variance)


def _sqdist(a, b):
    if a is b:
        d2 = cdist(a, a, "sqeuclidean")
        np.fill_diagonal(d2, 0.0)
        return d2
    return cdist(a, b, "sqeuclidean")


def rbf_kernel(a, b, hyper, include_noise=False):
    """RBF covariance between the rows of ``a`` and ``b``.

    With ``include_noise`` the noise variance is added on the diagonal; this
    is only meaningful when ``a`` and ``b`` are the same set of points.
    """
    a = as_matrix(a, "a")
    b = a if b is None else as_matrix(b, "b")
    if a.shape[1] != b.shape[1]:
        raise InvalidArgument(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    same = a is b or (a.shape == b.shape and np.array_equal(a, b))
    if include_noise and not same:
        raise InvalidArgument("include_noise requires a and b to be the same point set")
    d2 = _sqdist(a, a if same else b)
    k = hyper.amplitude * np.exp(-0.5 * d2 / hyper.lengthscale**2)
    if include_noise:
        k[np.diag_indices_from(k)] += hyper.noise
    return k


def _factorize(k_noisy, amplitude):
    """Cholesky with escalating jitter. Returns ``(L, jitter)``."""
    n = k_noisy.shape[0]
    jitter = JITTER_START * amplitude
    while True:
        try:
            lower = np.linalg.cholesky(k_noisy + jitter * np.eye(n))
            return lower, jitter
        except np.linalg.LinAlgError:
            if jitter >= JITTER_MAX * amplitude * (1 - 1e-12):
                raise NumericFailure(
                    f"kernel matrix (n={n}) not positive definite even with "
                    f"jitter {jitter:.3g}; amplitude={amplitude:.3g}"
                ) from None
            jitter *= 10.0


def _inverse_from_cholesky(lower):
    inv, info = dpotri(lower, lower=1)
    if info != 0:
        raise NumericFailure(f"inverting the kernel matrix failed (LAPACK info={info})")
    return np.tril(inv) + np.tril(inv, -1).T


def _check_xy(x, y):
    x = as_matrix(x, "X")
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape[0] < 1:
        raise InvalidArgument("need at least one training point")
    if y.shape[0] != x.shape[0]:
        raise InvalidArgument(f"{x.shape[0]} inputs but {y.shape[0]} targets")
    return x, y


def gp_fit(x, y, hyper):
    """Factorize ``K + jitter I`` and cache ``K^-1 y``."""
    x, y = _check_xy(x, y)
    k = rbf_kernel(x, x, hyper, include_noise=True)
    lower, jitter = _factorize(k, hyper.amplitude)
    alpha = cho_solve((lower, True), y)
    return GpFit(x, y, hyper, lower, alpha, jitter)


def gp_predict(fit, queries, full_covariance=False):
    """Posterior mean and variance of the latent function at ``queries``.

    The returned variance is that of the noise-free function values; it is
    clamped at zero after round-off.
    """
    q = as_matrix(queries, "queries")
    if q.shape[1] != fit.train_inputs.shape[1]:
        raise InvalidArgument(
            f"queries have {q.shape[1]} columns, model was fit on {fit.train_inputs.shape[1]}"
        )
    k_qx = rbf_kernel(q, fit.train_inputs, fit.hyper)
    mean = k_qx @ fit.alpha_vector
    v = solve_triangular(fit.cholesky_factor, k_qx.T, lower=True, check_finite=False)
    var = fit.hyper.amplitude - np.einsum("ij,ij->j", v, v)
    np.maximum(var, 0.0, out=var)
    cov = None
    if full_covariance:
        cov = rbf_kernel(q, q, fit.hyper) - v.T @ v
    return PosteriorPrediction(mean, var, cov)


def lml_and_grad(z, y, hyper, with_grad=True):
    """Log marginal likelihood plus gradients w.r.t. log-hypers and inputs.

    Returns ``(value, grad_hyper, grad_inputs)``; the gradients are ``None``
    when ``with_grad`` is false. ``grad_inputs`` is what lets the deep kernel
    push the likelihood back through its encoder.
    """
    z, y = _check_xy(z, y)
    n = z.shape[0]
    amp, ls2 = hyper.amplitude, hyper.lengthscale**2
    d2 = _sqdist(z, z)
    k_free = amp * np.exp(-0.5 * d2 / ls2)
    k = k_free.copy()
    k[np.diag_indices(n)] += hyper.noise
    lower, jitter = _factorize(k, amp)
    alpha = cho_solve((lower, True), y)
    value = (
        -0.5 * float(y @ alpha)
        - float(np.sum(np.log(np.diag(lower))))
        - 0.5 * n * LOG_2PI
    )
    if not np.isfinite(value):
        raise NumericFailure("log marginal likelihood is not finite")
    if not with_grad:
        return value, None, None
    k_inv = _inverse_from_cholesky(lower)
    g = 0.5 * (np.outer(alpha, alpha) - k_inv)
    w = g * k_free
    tr_g = float(np.trace(g))
    grad_hyper = np.array([
        float(w.sum()) + jitter * tr_g,
        float(np.sum(w * d2)) / ls2,
        hyper.noise * tr_g,
    ])
    grad_z = -(2.0 / ls2) * (w.sum(axis=1)[:, None] * z - w @ z)
    return value, grad_hyper, grad_z


def log_marginal_likelihood(x, y, hyper):
    return lml_and_grad(x, y, hyper, with_grad=False)[0]


def _lognormal_logpdf_logspace(u, prior):
    # density of x = exp(u) under logNormal(mean, stdev), evaluated in x
    s2 = prior.stdev**2
    return -u - np.log(prior.stdev) - 0.5 * LOG_2PI - 0.5 * (u - prior.mean) ** 2 / s2


def log_prior(hyper, prior=PriorSpec()):
    """Log-normal log-density of the amplitude and lengthscale (noise has no prior)."""
    return float(
        _lognormal_logpdf_logspace(hyper.log_amplitude, prior)
        + _lognormal_logpdf_logspace(hyper.log_lengthscale, prior)
    )


def log_prior_grad(hyper, prior=PriorSpec()):
    s2 = prior.stdev**2
    return np.array([
        -1.0 - (hyper.log_amplitude - prior.mean) / s2,
        -1.0 - (hyper.log_lengthscale - prior.mean) / s2,
        0.0,
    ])


def map_objective(x, y, hyper, prior=PriorSpec(), with_grad=True):
    """``log p(y | X, hyper) + log p(hyper)`` and its gradient w.r.t. log-hypers."""
    value, g_h, g_z = lml_and_grad(x, y, hyper, with_grad=with_grad)
    value += log_prior(hyper, prior)
    if with_grad:
        g_h = g_h + log_prior_grad(hyper, prior)
    return value, g_h, g_z


def gp_fit_hyperparams(x, y, init=KernelHyper(), prior=PriorSpec(), steps=200, lr=0.05,
                       history=None):
    """MAP hyperparameters by Adam ascent in log space.

    If ``history`` is a list, the objective at each step is appended to it.
    """
    if steps < 1:
        raise InvalidArgument("steps must be >= 1")
    x, y = _check_xy(x, y)
    theta = init.as_array()
    state = AdamState.zeros(3, lr)
    for _ in range(steps):
        value, grad, _ = map_objective(x, y, KernelHyper.from_array(theta), prior)
        if history is not None:
            history.append(value)
        theta, state = adam_step(state, theta, -grad)
    return KernelHyper.from_array(theta)
