"""Dense numeric core: a tanh MLP with analytic backprop, Adam, and gradient checks.

Matrices are plain 2-D ``float64`` numpy arrays (row-major). MLP parameters
live in a single flat vector so that optimizers and finite-difference checks
can treat them uniformly; per-layer weights and biases are views into it.
Layer ``k`` computes ``h @ W_k + b_k`` with ``W_k`` of shape ``(n_in, n_out)``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, NumericFailure


def as_matrix(x, name="x"):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidArgument(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def param_count(layer_sizes):
    return sum((n_in + 1) * n_out for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]))


@dataclass
class MlpParams:
    """Weights of a fully connected net: tanh on hidden layers, identity output."""

    layer_sizes: tuple
    flat: np.ndarray
    weights: list = field(init=False, repr=False)
    biases: list = field(init=False, repr=False)

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        _check_sizes(self.layer_sizes)
        self.flat = np.ascontiguousarray(self.flat, dtype=np.float64)
        if self.flat.shape != (param_count(self.layer_sizes),):
            raise InvalidArgument(
                f"flat parameter vector has length {self.flat.size}, "
                f"expected {param_count(self.layer_sizes)}"
            )
        self.weights, self.biases = [], []
        offset = 0
        for n_in, n_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            self.weights.append(self.flat[offset:offset + n_in * n_out].reshape(n_in, n_out))
            offset += n_in * n_out
            self.biases.append(self.flat[offset:offset + n_out])
            offset += n_out

    @property
    def n_params(self):
        return self.flat.size

    @property
    def input_dim(self):
        return self.layer_sizes[0]

    @property
    def output_dim(self):
        return self.layer_sizes[-1]

    def with_flat(self, flat):
        return MlpParams(self.layer_sizes, np.array(flat, dtype=np.float64, copy=True))

    def copy(self):
        return self.with_flat(self.flat)


def _check_sizes(layer_sizes):
    if len(layer_sizes) < 2:
        raise InvalidArgument("an MLP needs at least an input and an output layer")
    if any(int(s) < 1 for s in layer_sizes):
        raise InvalidArgument(f"layer sizes must be >= 1, got {list(layer_sizes)}")


def mlp_init(layer_sizes, seed):
    """Glorot-uniform weights, zero biases; deterministic in ``seed``."""
    layer_sizes = tuple(int(s) for s in layer_sizes)
    _check_sizes(layer_sizes)
    rng = np.random.default_rng(seed)
    parts = []
    for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        limit = np.sqrt(6.0 / (n_in + n_out))
        parts.append(rng.uniform(-limit, limit, size=n_in * n_out))
        parts.append(np.zeros(n_out))
    return MlpParams(layer_sizes, np.concatenate(parts))


def _forward(params, x):
    """Return the output and the list of layer inputs (post-activation)."""
    x = as_matrix(x, "x_batch")
    if x.shape[1] != params.input_dim:
        raise InvalidArgument(
            f"input has {x.shape[1]} columns, network expects {params.input_dim}"
        )
    acts = [x]
    h = x
    last = len(params.weights) - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if k < last:
            h = np.tanh(h)
            acts.append(h)
    return h, acts


def mlp_forward(params, x_batch):
    out, _ = _forward(params, x_batch)
    return out


def mlp_backward(params, x_batch, output_grad, cache=None):
    """Backpropagate ``output_grad`` (dL/d output) through the net.

    Returns ``(param_grad, input_grad)`` where ``param_grad`` has the flat
    layout of ``params.flat``. ``cache`` may carry the activations from a
    previous :func:`forward_with_cache` call to skip the recomputation.
    """
    if cache is None:
        out, acts = _forward(params, x_batch)
    else:
        out, acts = cache
    g = as_matrix(output_grad, "output_grad")
    if g.shape != out.shape:
        raise InvalidArgument(f"output_grad shape {g.shape} != output shape {out.shape}")
    grad = np.empty_like(params.flat)
    grad_w = []
    offset = 0
    for w in params.weights:
        n_in, n_out = w.shape
        grad_w.append((offset, offset + n_in * n_out, offset + n_in * n_out + n_out))
        offset += (n_in + 1) * n_out
    for k in range(len(params.weights) - 1, -1, -1):
        w_start, b_start, b_end = grad_w[k]
        h_in = acts[k]
        grad[w_start:b_start] = (h_in.T @ g).ravel()
        grad[b_start:b_end] = g.sum(axis=0)
        g = g @ params.weights[k].T
        if k > 0:
            g = g * (1.0 - h_in * h_in)
    return grad, g


def forward_with_cache(params, x_batch):
    """Forward pass returning ``(output, cache)`` for a later backward call."""
    out, acts = _forward(params, x_batch)
    return out, (out, acts)


@dataclass
class AdamState:
    learning_rate: float
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros(cls, n, learning_rate=1e-3):
        return cls(learning_rate, np.zeros(n), np.zeros(n))

    def copy(self):
        return AdamState(
            self.learning_rate,
            self.first_moment.copy(),
            self.second_moment.copy(),
            self.step_count,
            self.beta1,
            self.beta2,
            self.epsilon,
        )


def adam_step(state, params, grads):
    """One bias-corrected Adam descent step. Pure: returns ``(params, state)``."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != state.first_moment.shape:
        raise InvalidArgument(
            f"length mismatch: params {params.shape}, grads {grads.shape}, "
            f"moments {state.first_moment.shape}"
        )
    t = state.step_count + 1
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = params - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    new_state = AdamState(
        state.learning_rate, m, v, t, state.beta1, state.beta2, state.epsilon
    )
    return new_params, new_state


def finite_difference_grad(loss_fn, params, h=1e-5):
    params = np.array(params, dtype=np.float64, copy=True)
    out = np.empty_like(params)
    for i in range(params.size):
        orig = params[i]
        params[i] = orig + h
        f_plus = loss_fn(params)
        params[i] = orig - h
        f_minus = loss_fn(params)
        params[i] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NumericFailure(f"loss is not finite around parameter {i}")
        out[i] = (f_plus - f_minus) / (2.0 * h)
    return out


def relative_error(analytic, numeric):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    if analytic.size == 0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric) / denom))


def grad_check(loss_fn, params, grad_fn=None, h=1e-5):
    """Worst relative error between an analytic gradient and central differences.

    ``loss_fn`` maps a flat parameter vector to a scalar. If ``grad_fn`` is not
    given, ``loss_fn`` must return ``(loss, grad)`` when called with
    ``with_grad=True``.
    """
    params = np.asarray(params, dtype=np.float64)
    if grad_fn is None:
        value, analytic = loss_fn(params, with_grad=True)

        def scalar(p):
            return loss_fn(p, with_grad=False)
    else:
        value, analytic = loss_fn(params), grad_fn(params)
        scalar = loss_fn
    if not np.isfinite(value):
        raise NumericFailure("loss is not finite at the checked parameters")
    numeric = finite_difference_grad(scalar, params, h=h)
    return relative_error(analytic, numeric)
