"""Finite-difference audit of every hand-written gradient in the package.

Each ``check_*`` function builds a small random problem from ``seed`` and
returns the worst relative error between the analytic gradient and central
differences.
"""

import numpy as np

from .dkl import joint_objective, standardize
from .gp import KernelHyper, PriorSpec, map_objective
from .ndcore import grad_check, mlp_backward, mlp_forward, mlp_init
from .seeding import rng_for
from .vae import LATENT_DIM, loss_and_grad, vae_init


def check_mlp(seed):
    rng = rng_for(seed, "gradcheck", "mlp")
    sizes = (4, 6, 5, 3)
    params = mlp_init(sizes, seed)
    x = rng.normal(size=(7, sizes[0]))
    w = rng.normal(size=(7, sizes[-1]))

    def loss(flat, with_grad=False):
        p = params.with_flat(flat)
        out = mlp_forward(p, x)
        value = float(np.sum(w * out) + 0.5 * np.sum(out**2))
        if not with_grad:
            return value
        g, _ = mlp_backward(p, x, w + out)
        return value, g

    param_err = grad_check(loss, params.flat)

    def input_loss(xf, with_grad=False):
        xx = xf.reshape(x.shape)
        out = mlp_forward(params, xx)
        value = float(np.sum(w * out))
        if not with_grad:
            return value
        _, gx = mlp_backward(params, xx, w)
        return value, gx.ravel()

    return max(param_err, grad_check(input_loss, x.ravel()))


def check_gp_map(seed):
    rng = rng_for(seed, "gradcheck", "gp")
    n, d = 9, 2
    x = rng.normal(size=(n, d))
    y = np.sin(x.sum(axis=1)) + 0.1 * rng.normal(size=n)
    theta0 = np.array([rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-3, -1)])
    prior = PriorSpec()

    def loss(theta, with_grad=False):
        value, g, _ = map_objective(x, y, KernelHyper.from_array(theta), prior, with_grad)
        return (value, g) if with_grad else value

    hyper = KernelHyper.from_array(theta0)

    def input_loss(xf, with_grad=False):
        value, _, gz = map_objective(xf.reshape(n, d), y, hyper, prior, with_grad)
        return (value, gz.ravel()) if with_grad else value

    return max(grad_check(loss, theta0), grad_check(input_loss, x.ravel()))


def check_dkl_joint(seed):
    rng = rng_for(seed, "gradcheck", "dkl")
    n, d = 10, 5
    sizes = (d, 8, 6, 2)
    x = rng.normal(size=(n, d))
    y_std, _, _ = standardize(np.cos(x[:, 0]) + x[:, 1])
    enc = mlp_init(sizes, seed)
    theta = np.concatenate([enc.flat, [0.1, 0.2, np.log(0.05)]])

    def loss(t, with_grad=False):
        value, g = joint_objective(t, x, y_std, sizes, with_grad=with_grad)
        return (value, g) if with_grad else value

    return grad_check(loss, theta)


def check_vae(seed):
    rng = rng_for(seed, "gradcheck", "vae")
    d = 6
    model = vae_init(d, (5, 4), seed=seed)
    batch = rng.uniform(size=(5, d))
    eps = rng.normal(size=(5, LATENT_DIM))

    def loss(flat, with_grad=False):
        (total, _, _), g = loss_and_grad(model.with_flat(flat), batch, eps, with_grad=with_grad)
        return (total, g) if with_grad else total

    return grad_check(loss, model.flat)


SUITES = {
    "mlp": check_mlp,
    "gp_map": check_gp_map,
    "dkl_joint": check_dkl_joint,
    "vae": check_vae,
}


def run_suite(n_seeds=10, master_seed=0):
    """``{suite: [error per seed]}`` over ``n_seeds`` consecutive seeds."""
    return {name: [fn(master_seed + s) for s in range(n_seeds)] for name, fn in SUITES.items()}
