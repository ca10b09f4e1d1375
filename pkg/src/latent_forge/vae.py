"""Plain VAE baseline with a 2-D Gaussian latent and a Bernoulli decoder.

The encoder MLP emits ``(mu_1, mu_2, logvar_1, logvar_2)``; the decoder MLP
emits pixel logits, squashed by a sigmoid. Inputs must lie in ``[0, 1]``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, NumericFailure
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
from .seeding import derive_seed

LATENT_DIM = 2
GRID_LIMIT = 1.5


@dataclass(frozen=True)
class VaeConfig:
    hidden_sizes: tuple = (256, 64)
    epochs: int = 50
    lr: float = 1e-3
    batch_size: int = 64
    beta: float = 1.0
    seed: int = 0


@dataclass
class VaeModel:
    encoder: MlpParams
    decoder: MlpParams
    beta: float = 1.0
    seed: int = 0
    loss_trace: list = field(default_factory=list)

    @property
    def input_dim(self):
        return self.encoder.input_dim

    @property
    def flat(self):
        return np.concatenate([self.encoder.flat, self.decoder.flat])

    def with_flat(self, flat):
        n = self.encoder.n_params
        return VaeModel(
            self.encoder.with_flat(flat[:n]), self.decoder.with_flat(flat[n:]),
            self.beta, self.seed, list(self.loss_trace),
        )


def vae_init(input_dim, hidden_sizes=(256, 64), seed=0, beta=1.0):
    hidden = tuple(int(h) for h in hidden_sizes)
    enc = mlp_init((input_dim, *hidden, 2 * LATENT_DIM), derive_seed(seed, "vae", "encoder"))
    dec = mlp_init((LATENT_DIM, *hidden[::-1], input_dim), derive_seed(seed, "vae", "decoder"))
    return VaeModel(enc, dec, beta, seed)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def kl_divergence(mu, logvar):
    """KL(N(mu, exp(logvar)) || N(0, I)), summed over the last axis."""
    mu = np.asarray(mu, dtype=np.float64)
    logvar = np.asarray(logvar, dtype=np.float64)
    return 0.5 * np.sum(mu * mu + np.exp(logvar) - 1.0 - logvar, axis=-1)


def bernoulli_cross_entropy(target, probs):
    """Per-row sum of ``-[x log p + (1 - x) log(1 - p)]``; ``0 log 0`` counts as 0."""
    x = np.asarray(target, dtype=np.float64)
    p = np.asarray(probs, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(x > 0, x * np.log(p), 0.0)
        b = np.where(x < 1, (1 - x) * np.log1p(-p), 0.0)
    return -np.sum(a + b, axis=-1)


def _check_batch(model, batch):
    batch = as_matrix(batch, "batch")
    if batch.shape[1] != model.input_dim:
        raise InvalidArgument(f"batch has {batch.shape[1]} columns, model expects {model.input_dim}")
    return batch


def loss_and_grad(model, batch, eps, beta=None, with_grad=True):
    """Batch-mean ``(total, reconstruction, kl)`` for fixed noise ``eps`` and,
    if requested, the gradient of ``total`` w.r.t. ``model.flat``."""
    beta = model.beta if beta is None else beta
    batch = _check_batch(model, batch)
    n = batch.shape[0]
    enc_out, enc_cache = forward_with_cache(model.encoder, batch)
    mu, logvar = enc_out[:, :LATENT_DIM], enc_out[:, LATENT_DIM:]
    scale = np.exp(0.5 * logvar)
    z = mu + scale * eps
    logits, dec_cache = forward_with_cache(model.decoder, z)
    recon = np.sum(np.logaddexp(0.0, logits) - batch * logits, axis=1)
    kl = kl_divergence(mu, logvar)
    rec_mean = float(recon.mean())
    kl_mean = float(kl.mean())
    total = rec_mean + beta * kl_mean
    if not np.isfinite(total):
        raise NumericFailure("VAE loss is not finite")
    if not with_grad:
        return (total, rec_mean, kl_mean), None
    d_logits = (sigmoid(logits) - batch) / n
    g_dec, d_z = mlp_backward(model.decoder, z, d_logits, cache=dec_cache)
    d_mu = d_z + beta * mu / n
    d_logvar = d_z * eps * 0.5 * scale + beta * 0.5 * (np.exp(logvar) - 1.0) / n
    g_enc, _ = mlp_backward(model.encoder, batch, np.hstack([d_mu, d_logvar]), cache=enc_cache)
    return (total, rec_mean, kl_mean), np.concatenate([g_enc, g_dec])


def vae_loss(model, batch, rng, beta=None):
    """Reparameterized ELBO terms ``(total, reconstruction, kl)``, batch means."""
    batch = _check_batch(model, batch)
    eps = rng.standard_normal((batch.shape[0], LATENT_DIM))
    return loss_and_grad(model, batch, eps, beta, with_grad=False)[0]


def vae_train(inputs, config=VaeConfig(), progress=None):
    """Adam on shuffled mini-batches; per-epoch mean losses go to ``loss_trace``."""
    x = as_matrix(inputs, "inputs")
    if x.shape[0] == 0:
        raise InvalidArgument("dataset is empty")
    if np.any(x < 0) or np.any(x > 1):
        raise InvalidArgument("VAE inputs must lie in [0, 1]")
    model = vae_init(x.shape[1], config.hidden_sizes, config.seed, config.beta)
    rng = np.random.default_rng(derive_seed(config.seed, "vae", "train"))
    theta = model.flat
    state = AdamState.zeros(theta.size, config.lr)
    trace = []
    for epoch in range(config.epochs):
        order = rng.permutation(x.shape[0])
        sums = np.zeros(3)
        for start in range(0, x.shape[0], config.batch_size):
            idx = order[start:start + config.batch_size]
            eps = rng.standard_normal((idx.size, LATENT_DIM))
            current = model.with_flat(theta)
            try:
                terms, grad = loss_and_grad(current, x[idx], eps)
            except NumericFailure as exc:
                raise NumericFailure(f"VAE training failed in epoch {epoch}: {exc}") from exc
            sums += np.array(terms) * idx.size
            theta, state = adam_step(state, theta, grad)
        trace.append(tuple(float(v) for v in sums / x.shape[0]))
        if progress is not None:
            progress(epoch, trace[-1])
    trained = model.with_flat(theta)
    trained.loss_trace = trace
    return trained


def vae_embed(model, inputs):
    """Encoder means, shape ``(n, 2)``."""
    x = _check_batch(model, inputs)
    return mlp_forward(model.encoder, x)[:, :LATENT_DIM]


def vae_decode(model, z):
    return sigmoid(mlp_forward(model.decoder, as_matrix(z, "z")))


def latent_grid(grid_n=25, limit=GRID_LIMIT):
    """Row-major ``(grid_n**2, 2)`` lattice: z2 descending down rows, z1 ascending across."""
    if grid_n < 2:
        raise InvalidArgument("grid_n must be >= 2")
    axis = np.linspace(-limit, limit, grid_n)
    z1, z2 = np.meshgrid(axis, axis[::-1])
    return np.column_stack([z1.ravel(), z2.ravel()])


def vae_decode_grid(model, grid_n=25):
    """Decoded images on the latent lattice, shape ``(grid_n, grid_n, input_dim)``."""
    z = latent_grid(grid_n)
    return vae_decode(model, z).reshape(grid_n, grid_n, -1)
