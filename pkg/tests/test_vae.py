import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latent_forge.cards import CardsConfig, generate_cards_dataset
from latent_forge.errors import InvalidArgument
from latent_forge.ndcore import grad_check
from latent_forge.vae import (
    GRID_LIMIT,
    VaeConfig,
    bernoulli_cross_entropy,
    kl_divergence,
    latent_grid,
    loss_and_grad,
    vae_decode_grid,
    vae_embed,
    vae_init,
    vae_loss,
    vae_train,
)

SMALL = VaeConfig(hidden_sizes=(32, 8), epochs=6, lr=3e-3, batch_size=32)


@pytest.fixture(scope="module")
def cards():
    return generate_cards_dataset(CardsConfig(per_suit=40, size=16, seed=3)).inputs


@pytest.fixture(scope="module")
def trained(cards):
    return vae_train(cards, VaeConfig(hidden_sizes=(64, 16), epochs=15, lr=3e-3, seed=0))


def test_kl_examples():
    assert kl_divergence([0.0, 0.0], [0.0, 0.0]) == 0.0
    assert kl_divergence([1.0], [0.0]) == 0.5


def test_kl_nonnegative(rng):
    mu = rng.normal(scale=2, size=(1000, 2))
    lv = rng.uniform(-4, 4, size=(1000, 2))
    assert np.all(kl_divergence(mu, lv) >= 0)


@pytest.mark.parametrize("seed", range(3))
def test_kl_monte_carlo(seed):
    r = np.random.default_rng(seed)
    mu, lv = r.normal(size=2), r.uniform(-1, 1, size=2)
    sd = np.exp(0.5 * lv)
    z = mu + sd * r.standard_normal((100_000, 2))
    log_q = -0.5 * np.sum(((z - mu) / sd) ** 2 + lv, axis=1)
    log_p = -0.5 * np.sum(z * z, axis=1)
    mc = float(np.mean(log_q - log_p))
    assert abs(mc - kl_divergence(mu, lv)) < 0.02 * kl_divergence(mu, lv)


def test_cross_entropy_of_binary_self_is_zero():
    x = np.array([[0.0, 1.0, 1.0, 0.0]])
    assert bernoulli_cross_entropy(x, x)[0] == 0.0


def test_cross_entropy_of_gray_self_positive():
    x = np.array([[0.3, 0.5, 1.0]])
    assert bernoulli_cross_entropy(x, x)[0] > 0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_cross_entropy_lower_bound(seed):
    r = np.random.default_rng(seed)
    x = r.uniform(size=(1, 6))
    p = r.uniform(0.01, 0.99, size=(1, 6))
    assert bernoulli_cross_entropy(x, p)[0] >= bernoulli_cross_entropy(x, x)[0] - 1e-12


def test_beta_zero_is_reconstruction(rng):
    m = vae_init(5, (4,), seed=1)
    x = rng.uniform(size=(3, 5))
    eps = rng.standard_normal((3, 2))
    (total, rec, _), _ = loss_and_grad(m, x, eps, beta=0.0, with_grad=False)
    assert total == rec


def test_reconstruction_is_cross_entropy_of_decoder(rng):
    from latent_forge.ndcore import mlp_forward
    from latent_forge.vae import sigmoid

    m = vae_init(6, (5,), seed=2)
    x = rng.uniform(size=(4, 6))
    eps = rng.standard_normal((4, 2))
    (_, rec, kl), _ = loss_and_grad(m, x, eps, with_grad=False)
    enc = mlp_forward(m.encoder, x)
    z = enc[:, :2] + np.exp(0.5 * enc[:, 2:]) * eps
    probs = sigmoid(mlp_forward(m.decoder, z))
    assert rec == pytest.approx(float(np.mean(bernoulli_cross_entropy(x, probs))), rel=1e-10)
    assert kl == pytest.approx(float(np.mean(kl_divergence(enc[:, :2], enc[:, 2:]))), rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_gradient_fixed_noise(seed):
    r = np.random.default_rng(seed)
    m = vae_init(6, (5,), seed=seed)
    m = m.with_flat(m.flat + r.normal(scale=0.3, size=m.flat.size))
    x = r.uniform(size=(4, 6))
    eps = r.standard_normal((4, 2))

    def loss(flat, with_grad=False):
        terms, g = loss_and_grad(m.with_flat(flat), x, eps, with_grad=with_grad)
        return (terms[0], g) if with_grad else terms[0]

    assert grad_check(loss, m.flat) < 1e-4


def test_loss_dimension_check(rng):
    m = vae_init(5, (4,))
    with pytest.raises(InvalidArgument):
        vae_loss(m, np.zeros((2, 6)), rng)


def test_train_rejects_bad_input():
    with pytest.raises(InvalidArgument):
        vae_train(np.zeros((0, 4)))
    with pytest.raises(InvalidArgument):
        vae_train(np.full((3, 4), 2.0))


def test_zero_epochs_returns_init(cards):
    m = vae_train(cards, VaeConfig(hidden_sizes=(8,), epochs=0, seed=4))
    assert m.loss_trace == []
    assert m.flat.tobytes() == vae_init(cards.shape[1], (8,), seed=4).flat.tobytes()


def test_training_deterministic(cards):
    a = vae_train(cards[:50], VaeConfig(hidden_sizes=(8,), epochs=2, seed=1))
    b = vae_train(cards[:50], VaeConfig(hidden_sizes=(8,), epochs=2, seed=1))
    assert a.loss_trace == b.loss_trace
    assert a.flat.tobytes() == b.flat.tobytes()


@pytest.mark.parametrize("seed", range(3))
def test_training_lowers_loss(cards, seed):
    m = vae_train(cards, VaeConfig(**{**SMALL.__dict__, "seed": seed}))
    assert m.loss_trace[-1][0] < m.loss_trace[0][0]


def test_embed(trained, cards):
    z = vae_embed(trained, cards)
    assert z.shape == (len(cards), 2) and np.all(np.isfinite(z))
    pair = vae_embed(trained, cards[[5, 5]])
    assert np.array_equal(pair[0], pair[1])


def test_latent_grid_layout():
    g = latent_grid(5)
    assert g.min() == -GRID_LIMIT and g.max() == GRID_LIMIT
    assert g[0].tolist() == [-1.5, 1.5] and g[4].tolist() == [1.5, 1.5]
    assert g[-1].tolist() == [1.5, -1.5]
    with pytest.raises(InvalidArgument):
        latent_grid(1)


def test_decoded_grid_continuity(trained):
    d = vae_decode_grid(trained, grid_n=10)
    assert d.shape == (10, 10, 256)
    assert np.all((d > 0) & (d < 1))
    adjacent = np.mean([np.mean(np.abs(d[i, j] - d[i, j + 1])) for i in range(10) for j in range(9)])
    corners = np.mean(np.abs(d[0, 0] - d[-1, -1])) + np.mean(np.abs(d[0, -1] - d[-1, 0]))
    assert adjacent < corners / 2
