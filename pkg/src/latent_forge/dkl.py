"""Deep kernel learning: an MLP encoder into 2-D feeding an exact RBF GP.

The encoder weights and the GP hyperparameters are optimized jointly by Adam
on the (log-prior regularized) marginal likelihood of standardized targets.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, NumericFailure
from .gp import (
    GpFit,
    KernelHyper,
    PosteriorPrediction,
    PriorSpec,
    gp_fit,
    gp_predict,
    map_objective,
    rbf_kernel,
)
from .ndcore import (
    AdamState,
    MlpParams,
    adam_step,
    as_matrix,
    forward_with_cache,
    mlp_backward,
    mlp_forward,
    mlp_init,
)

LATENT_DIM = 2


@dataclass(frozen=True)
class DklConfig:
    hidden_sizes: tuple = (64, 64)
    steps: int = 200
    lr: float = 0.01
    seed: int = 0
    init_hyper: KernelHyper = KernelHyper()
    prior: PriorSpec = PriorSpec()

    def layer_sizes(self, input_dim):
        return (int(input_dim), *(int(h) for h in self.hidden_sizes), LATENT_DIM)


@dataclass
class DklModel:
    encoder: MlpParams
    hyper: KernelHyper
    fit: GpFit
    train_inputs: np.ndarray
    y_mean: float
    y_std: float
    seed: int = 0
    objective_trace: list = field(default_factory=list)

    @property
    def steps(self):
        return len(self.objective_trace)


def standardize(y):
    y = np.asarray(y, dtype=np.float64).ravel()
    mean = float(y.mean())
    std = float(y.std())
    if not std > 0:
        std = 1.0
    return (y - mean) / std, mean, std


def joint_objective(theta, x, y_std, layer_sizes, prior=PriorSpec(), with_grad=True):
    """MAP objective of the deep kernel as a function of the flat vector ``theta``.

    ``theta`` is the encoder's flat parameters followed by the three log
    hyperparameters. Returns ``(value, grad)``.
    """
    n_enc = theta.size - 3
    encoder = MlpParams(layer_sizes, theta[:n_enc])
    hyper = KernelHyper.from_array(theta[n_enc:])
    z, cache = forward_with_cache(encoder, x)
    value, g_hyper, g_z = map_objective(z, y_std, hyper, prior, with_grad=with_grad)
    if not with_grad:
        return value, None
    g_enc, _ = mlp_backward(encoder, x, g_z, cache=cache)
    return value, np.concatenate([g_enc, g_hyper])


def dkl_train(x, y, config=DklConfig()):
    """Train a deep-kernel GP from a fresh, seed-determined initialization."""
    x = as_matrix(x, "X")
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape[0] < 2:
        raise InvalidArgument("deep kernel training needs at least 2 points")
    if y.shape[0] != x.shape[0]:
        raise InvalidArgument(f"{x.shape[0]} inputs but {y.shape[0]} targets")
    if not np.all(np.isfinite(y)):
        raise InvalidArgument("targets must be finite")
    y_s, y_mean, y_sd = standardize(y)
    layer_sizes = config.layer_sizes(x.shape[1])
    encoder = mlp_init(layer_sizes, config.seed)
    theta = np.concatenate([encoder.flat, config.init_hyper.as_array()])
    state = AdamState.zeros(theta.size, config.lr)
    trace = []
    # Adam at this learning rate can overshoot late in training, so the
    # returned estimate is the best MAP iterate rather than the last one.
    best_value, best_theta = -np.inf, theta
    for step in range(config.steps):
        try:
            value, grad = joint_objective(theta, x, y_s, layer_sizes, config.prior)
        except NumericFailure as exc:
            raise NumericFailure(f"deep kernel training failed at step {step}: {exc}") from exc
        trace.append(value)
        if value > best_value:
            best_value, best_theta = value, theta
        theta, state = adam_step(state, theta, -grad)
    theta = best_theta
    n_enc = theta.size - 3
    encoder = MlpParams(layer_sizes, theta[:n_enc].copy())
    hyper = KernelHyper.from_array(theta[n_enc:])
    return build_model(encoder, hyper, x, y, y_mean, y_sd, config.seed, trace)


def build_model(encoder, hyper, x, y, y_mean, y_std, seed=0, trace=None):
    """Assemble a model (and its GP factorization) from trained parameters."""
    y_s = (np.asarray(y, dtype=np.float64) - y_mean) / y_std
    z = mlp_forward(encoder, x)
    try:
        fit = gp_fit(z, y_s, hyper)
    except NumericFailure as exc:
        raise NumericFailure(f"final deep kernel factorization failed: {exc}") from exc
    return DklModel(encoder, hyper, fit, x, y_mean, y_std, seed, list(trace or []))


def _check_queries(model, queries):
    q = as_matrix(queries, "queries")
    if q.shape[1] != model.encoder.input_dim:
        raise InvalidArgument(
            f"queries have {q.shape[1]} columns, encoder expects {model.encoder.input_dim}"
        )
    return q


def dkl_embed(model, inputs):
    """Latent coordinates ``(d1, d2)`` of each input row, shape ``(n, 2)``."""
    return mlp_forward(model.encoder, _check_queries(model, inputs))


def deep_kernel(model, a, b, include_noise=False):
    za = dkl_embed(model, a)
    zb = za if b is a else dkl_embed(model, b)
    return rbf_kernel(za, zb, model.hyper, include_noise=include_noise)


def dkl_predict(model, queries):
    """Posterior prediction in target units."""
    z = dkl_embed(model, queries)
    pred = gp_predict(model.fit, z)
    return PosteriorPrediction(
        pred.mean * model.y_std + model.y_mean,
        pred.variance * model.y_std**2,
    )
