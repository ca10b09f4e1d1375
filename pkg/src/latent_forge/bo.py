"""Pool-based Bayesian optimization with a deep-kernel surrogate.

Every step retrains the surrogate from scratch on the measured set, scores
the unmeasured pool with ``mu + lambda * variance**exponent`` (exponent 0.5
gives the usual ``mu + lambda * sigma``), measures the argmax and moves it
from the pool to the training set.
"""

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .dkl import DklConfig, dkl_predict, dkl_train
from .errors import InvalidArgument, InvalidState
from .ndcore import as_matrix
from .seeding import derive_seed

TRACE_COLUMNS = (
    "step", "chosen_index", "acq_value", "pred_mean", "pred_std", "true_target",
    "cumulative_best",
)


@dataclass(frozen=True)
class AcquisitionSpec:
    lam: float = 10.0
    exponent: float = 0.5

    def __post_init__(self):
        if self.lam < 0:
            raise InvalidArgument("lambda must be >= 0")


@dataclass(frozen=True)
class TraceRecord:
    step: int
    chosen_index: int
    acq_value: float
    pred_mean: float
    pred_std: float
    true_target: float
    cumulative_best: float


@dataclass
class BoState:
    measured_indices: list
    pool_indices: list
    targets: list
    seed: int = 0
    n_init: int = 100
    n_steps: int = 500
    trace: list = field(default_factory=list)

    def best(self):
        return max(self.targets) if self.targets else -np.inf

    def copy(self):
        return replace(
            self,
            measured_indices=list(self.measured_indices),
            pool_indices=list(self.pool_indices),
            targets=list(self.targets),
            trace=list(self.trace),
        )

    def check_partition(self, pool_size):
        measured = set(self.measured_indices)
        if len(measured) != len(self.measured_indices):
            raise InvalidState("an index was measured twice")
        if measured & set(self.pool_indices):
            raise InvalidState("measured and pool indices overlap")
        if len(measured) + len(self.pool_indices) != pool_size:
            raise InvalidState("measured and pool indices do not cover the pool")


def acquisition_ucb(pred, spec=AcquisitionSpec()):
    mean = np.asarray(pred.mean, dtype=np.float64)
    var = np.asarray(pred.variance, dtype=np.float64)
    if np.any(var < 0):
        raise InvalidState("negative predictive variance reached the acquisition")
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(var))):
        raise InvalidArgument("prediction contains non-finite values")
    return mean + spec.lam * var**spec.exponent


def dkl_surrogate(config):
    """Surrogate factory: train a fresh DKL with the given per-step seed."""

    def fit_predict(x_train, y_train, x_pool, seed):
        model = dkl_train(x_train, y_train, replace(config, seed=seed))
        return dkl_predict(model, x_pool)

    return fit_predict


def bo_step(state, pool_inputs, oracle, dkl_config=DklConfig(), spec=AcquisitionSpec(),
            surrogate=None):
    """Run one acquisition and return the updated state (the input is untouched).

    ``oracle(index) -> float`` evaluates the target for a pool row.
    ``surrogate(x_train, y_train, x_pool, seed)`` may replace the default
    deep-kernel fit; it must return an object with ``mean`` and ``variance``.
    """
    if not state.pool_indices:
        raise InvalidState("the unmeasured pool is empty")
    x = as_matrix(pool_inputs, "pool_inputs")
    step = len(state.trace)
    fit_predict = surrogate or dkl_surrogate(dkl_config)
    pool = np.asarray(state.pool_indices)
    pred = fit_predict(
        x[state.measured_indices],
        np.asarray(state.targets, dtype=np.float64),
        x[pool],
        derive_seed(state.seed, "bo", "surrogate", step),
    )
    scores = acquisition_ucb(pred, spec)
    # argmax over pool positions; ties go to the lowest master index
    best = np.flatnonzero(scores == scores.max())
    pos = int(best[np.argmin(pool[best])])
    chosen = int(pool[pos])
    y_next = float(oracle(chosen))
    new = state.copy()
    new.measured_indices.append(chosen)
    new.pool_indices.remove(chosen)
    new.targets.append(y_next)
    new.trace.append(TraceRecord(
        step, chosen, float(scores[pos]), float(pred.mean[pos]),
        float(np.sqrt(pred.variance[pos])), y_next, max(state.best(), y_next),
    ))
    return new


def initial_state(pool_size, oracle, n_init, n_steps, seed):
    if n_init < 1 or n_init >= pool_size:
        raise InvalidArgument(f"n_init={n_init} must be in [1, pool size {pool_size})")
    if n_steps < 0:
        raise InvalidArgument("n_steps must be >= 0")
    rng = np.random.default_rng(derive_seed(seed, "bo", "init"))
    measured = [int(i) for i in rng.choice(pool_size, size=n_init, replace=False)]
    chosen = set(measured)
    pool = [i for i in range(pool_size) if i not in chosen]
    targets = [float(oracle(i)) for i in measured]
    return BoState(measured, pool, targets, seed, n_init, n_steps)


def bo_run(pool_inputs, oracle, n_init=100, n_steps=500, spec=AcquisitionSpec(), seed=0,
           dkl_config=DklConfig(), surrogate=None, final_model=True, progress=None):
    """Seed with ``n_init`` random measurements, then run ``n_steps`` acquisitions.

    Returns ``(state, model)``; ``model`` is a DKL trained on the final
    measured set (``None`` if ``final_model`` is false).
    """
    x = as_matrix(pool_inputs, "pool_inputs")
    state = initial_state(x.shape[0], oracle, n_init, n_steps, seed)
    for k in range(n_steps):
        if not state.pool_indices:
            break
        state = bo_step(state, x, oracle, dkl_config, spec, surrogate)
        if progress is not None:
            progress(k, state)
    model = None
    if final_model:
        model = dkl_train(
            x[state.measured_indices],
            np.asarray(state.targets),
            replace(dkl_config, seed=derive_seed(seed, "bo", "final")),
        )
    return state, model


def random_baseline(pool_size, oracle, n_init=100, n_steps=500, seed=0):
    """Same protocol (and the same initial set) with uniform random acquisitions."""
    state = initial_state(pool_size, oracle, n_init, n_steps, seed)
    rng = np.random.default_rng(derive_seed(seed, "bo", "random-arm"))
    for step in range(min(n_steps, len(state.pool_indices))):
        pos = int(rng.integers(len(state.pool_indices)))
        chosen = state.pool_indices.pop(pos)
        y_next = float(oracle(chosen))
        best = max(state.best(), y_next)
        state.measured_indices.append(chosen)
        state.targets.append(y_next)
        state.trace.append(TraceRecord(step, chosen, np.nan, np.nan, np.nan, y_next, best))
    return state


def write_trace_csv(path, trace):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for r in trace:
            writer.writerow([
                r.step, r.chosen_index, repr(r.acq_value), repr(r.pred_mean),
                repr(r.pred_std), repr(r.true_target), repr(r.cumulative_best),
            ])


def read_trace_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        TraceRecord(
            int(r["step"]), int(r["chosen_index"]), float(r["acq_value"]),
            float(r["pred_mean"]), float(r["pred_std"]), float(r["true_target"]),
            float(r["cumulative_best"]),
        )
        for r in rows
    ]
