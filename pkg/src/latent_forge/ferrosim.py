"""Kinetic lattice ferroelectric: continuous 2-D polarization on a periodic grid.

Free energy (periodic boundaries, each nearest-neighbour bond counted once)::

    F = sum_sites [a2 |P|^2 + a4 |P|^4] + k_grad/2 sum_bonds |P_i - P_j|^2
        - sum_sites E_x P_x

Dynamics are explicit-Euler gradient flow, ``P <- P - mobility * dt * dF/dP``.
Arrays use ``[..., i, j]`` indexing with ``i`` along x and ``j`` along y, and
any leading axes are treated as a batch of independent lattices.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, NumericFailure
from .seeding import derive_seed

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class SimConfig:
    size: int = 20
    a2: float = -1.0
    a4: float = 1.0
    k_grad: float = 0.5
    mobility: float = 1.0
    dt: float = 0.02
    init_amplitude: float = 0.01
    substeps: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidArgument("dt must be positive")
        if not self.a4 > 0:
            raise InvalidArgument("a4 must be positive")
        if self.size < 4:
            raise InvalidArgument("lattice size must be >= 4")
        if self.substeps < 1:
            raise InvalidArgument("substeps must be >= 1")

    @property
    def saturation(self):
        """Magnitude of the uniform zero-field minimum, sqrt(-a2 / (2 a4))."""
        return float(np.sqrt(-self.a2 / (2.0 * self.a4))) if self.a2 < 0 else 1.0


@dataclass
class LatticeState:
    px: np.ndarray
    py: np.ndarray

    @property
    def size(self):
        return self.px.shape[-1]

    def copy(self):
        return LatticeState(self.px.copy(), self.py.copy())

    @classmethod
    def uniform(cls, size, px, py=0.0):
        return cls(np.full((size, size), float(px)), np.full((size, size), float(py)))

    @classmethod
    def random(cls, size, amplitude, seed):
        rng = np.random.default_rng(seed)
        px = rng.uniform(-amplitude, amplitude, size=(size, size))
        py = rng.uniform(-amplitude, amplitude, size=(size, size))
        return cls(px, py)


@dataclass(frozen=True)
class FieldParams:
    amplitude: float
    growth: float
    frequency: float
    offset: float


@dataclass
class FieldCurve:
    params: FieldParams
    samples: np.ndarray


@dataclass
class SimResult:
    final_state: LatticeState
    mean_px: np.ndarray
    mean_py: np.ndarray
    curl_series: np.ndarray
    targets: dict = field(default_factory=dict)


def _neighbor_sum(a):
    return (np.roll(a, 1, -2) + np.roll(a, -1, -2) + np.roll(a, 1, -1) + np.roll(a, -1, -1))


def _check_state(state):
    if state.px.shape != state.py.shape or state.px.shape[-1] != state.px.shape[-2]:
        raise InvalidArgument("px and py must be matching square lattices")
    if not (np.all(np.isfinite(state.px)) and np.all(np.isfinite(state.py))):
        raise NumericFailure("lattice contains non-finite polarization")


def free_energy(state, e_x, cfg=SimConfig()):
    _check_state(state)
    px, py = state.px, state.py
    p2 = px * px + py * py
    local = cfg.a2 * p2 + cfg.a4 * p2 * p2
    grad = 0.0
    for axis in (-2, -1):
        dx = px - np.roll(px, -1, axis)
        dy = py - np.roll(py, -1, axis)
        grad = grad + dx * dx + dy * dy
    total = local + 0.5 * cfg.k_grad * grad - e_x * px
    value = total.sum(axis=(-2, -1))
    if not np.all(np.isfinite(value)):
        raise NumericFailure("free energy is not finite")
    return float(value) if np.ndim(value) == 0 else value


def force(state, e_x, cfg=SimConfig()):
    """Analytic ``(dF/dPx, dF/dPy)``; ``e_x`` may be a scalar or broadcast per batch."""
    px, py = state.px, state.py
    p2 = px * px + py * py
    local = 2.0 * cfg.a2 + 4.0 * cfg.a4 * p2
    fx = local * px + cfg.k_grad * (4.0 * px - _neighbor_sum(px)) - e_x
    fy = local * py + cfg.k_grad * (4.0 * py - _neighbor_sum(py))
    return fx, fy


def step(state, e_x, cfg=SimConfig()):
    """One explicit-Euler relaxation step."""
    fx, fy = force(state, e_x, cfg)
    rate = cfg.mobility * cfg.dt
    new = LatticeState(state.px - rate * fx, state.py - rate * fy)
    limit = 10.0 * cfg.saturation
    mag2 = new.px * new.px + new.py * new.py
    if not np.all(mag2 <= limit * limit):
        raise NumericFailure(
            f"polarization exceeded {limit:.3g}; integration diverged at dt={cfg.dt}"
        )
    return new


def _signed_curl(px, py):
    dpy_dx = 0.5 * (np.roll(py, -1, -2) - np.roll(py, 1, -2))
    dpx_dy = 0.5 * (np.roll(px, -1, -1) - np.roll(px, 1, -1))
    return dpy_dx - dpx_dy


def target_curl(state):
    """Sum over sites of the absolute central-difference curl (periodic)."""
    c = np.abs(_signed_curl(state.px, state.py)).sum(axis=(-2, -1))
    return float(c) if np.ndim(c) == 0 else c


def normalize_state(state, tol=1e-9):
    mag = np.sqrt(state.px**2 + state.py**2)
    safe = np.where(mag < tol, 1.0, mag)
    keep = mag >= tol
    return LatticeState(np.where(keep, state.px / safe, 0.0), np.where(keep, state.py / safe, 0.0))


def target_normalized_curl(state):
    return target_curl(normalize_state(state))


def target_total_polarization(state):
    sx = state.px.sum(axis=(-2, -1))
    sy = state.py.sum(axis=(-2, -1))
    v = np.sqrt(sx * sx + sy * sy)
    return float(v) if np.ndim(v) == 0 else v


TARGETS = {
    "curl": target_curl,
    "normalized_curl": target_normalized_curl,
    "total_polarization": target_total_polarization,
}


def run_batch(fields, cfg=SimConfig(), init=None, seed=0, record=True):
    """Simulate a batch of lattices, one per row of ``fields`` (shape ``(B, T)``).

    All lattices start from ``init`` (broadcast) or from a seeded random state.
    Returns the final batched state, the mean-polarization and curl series
    (shape ``(B, T*substeps + 1)``, or ``None`` if ``record`` is false), and
    the three end-of-run targets.
    """
    fields = np.atleast_2d(np.asarray(fields, dtype=np.float64))
    if not np.all(np.isfinite(fields)):
        raise InvalidArgument("field samples must be finite")
    n_batch, n_samples = fields.shape
    if init is None:
        init = LatticeState.random(cfg.size, cfg.init_amplitude, seed)
    shape = (n_batch, cfg.size, cfg.size)
    state = LatticeState(np.broadcast_to(init.px, shape).copy(), np.broadcast_to(init.py, shape).copy())
    n_total = n_samples * cfg.substeps
    series = None
    if record:
        series = {k: np.empty((n_batch, n_total + 1)) for k in ("px", "py", "curl")}

        def log(t):
            series["px"][:, t] = state.px.mean(axis=(-2, -1))
            series["py"][:, t] = state.py.mean(axis=(-2, -1))
            series["curl"][:, t] = target_curl(state)

        log(0)
    t = 0
    for s in range(n_samples):
        e = fields[:, s, None, None]
        for _ in range(cfg.substeps):
            try:
                state = step(state, e, cfg)
            except NumericFailure as exc:
                raise NumericFailure(f"simulation failed at step {t}: {exc}") from exc
            t += 1
            if record:
                log(t)
    targets = {name: np.atleast_1d(fn(state)) for name, fn in TARGETS.items()}
    return state, series, targets


def run_simulation(curve, cfg=SimConfig(), seed=0):
    samples = curve.samples if isinstance(curve, FieldCurve) else np.asarray(curve)
    state, series, targets = run_batch(samples[None, :], cfg, seed=seed)
    return SimResult(
        LatticeState(state.px[0], state.py[0]),
        series["px"][0],
        series["py"][0],
        series["curl"][0],
        {k: float(v[0]) for k, v in targets.items()},
    )


def sweep_targets(fields, cfg=SimConfig(), seed=0, batch_size=256):
    """End-of-run targets for every curve; all curves share one initial lattice.

    The shared start makes each target a deterministic function of its field
    curve. Returns a dict of arrays keyed like :data:`TARGETS`.
    """
    fields = np.atleast_2d(np.asarray(fields, dtype=np.float64))
    init = LatticeState.random(cfg.size, cfg.init_amplitude, derive_seed(seed, "ferrosim", "init"))
    out = {k: np.empty(fields.shape[0]) for k in TARGETS}
    for start in range(0, fields.shape[0], batch_size):
        chunk = fields[start:start + batch_size]
        _, _, targets = run_batch(chunk, cfg, init=init, record=False)
        for k in TARGETS:
            out[k][start:start + chunk.shape[0]] = targets[k]
    return out


def hysteresis_loop(amplitude, periods=1, cfg=SimConfig(), steps_per_period=500, seed=0):
    """Drive ``E_x = amplitude * sin(2 pi t / T)`` and record ``(E_x, mean P_x)``.

    One warm-up period is simulated first and discarded. Returns an array of
    shape ``(periods * steps_per_period, 2)``.
    """
    if amplitude < 0:
        raise InvalidArgument("amplitude must be >= 0")
    n = (periods + 1) * steps_per_period
    phase = TWO_PI * np.arange(1, n + 1) / steps_per_period
    e = amplitude * np.sin(phase)
    if amplitude == 0:
        e = np.zeros(n)
    one = SimConfig(**{**cfg.__dict__, "substeps": 1})
    _, series, _ = run_batch(e[None, :], one, seed=seed)
    px = series["px"][0, 1:]
    keep = slice(steps_per_period, n)
    return np.column_stack([e[keep], px[keep]])


def loop_area(loop):
    """Absolute shoelace area enclosed by a closed ``(E, P)`` loop."""
    e, p = loop[:, 0], loop[:, 1]
    return float(0.5 * abs(np.dot(e, np.roll(p, -1)) - np.dot(p, np.roll(e, -1))))


def remnant_polarization(loop):
    """Mean ``|P_x|`` interpolated at the zero crossings of the field."""
    e, p = loop[:, 0], loop[:, 1]
    vals = []
    for k in range(len(e) - 1):
        if e[k] == 0.0:
            vals.append(abs(p[k]))
        elif e[k] * e[k + 1] < 0:
            w = e[k] / (e[k] - e[k + 1])
            vals.append(abs(p[k] + w * (p[k + 1] - p[k])))
    return float(np.mean(vals)) if vals else 0.0


@dataclass(frozen=True)
class FieldFamilyConfig:
    n_curves: int = 7500
    t_samples: int = 100
    amplitude_range: tuple = (0.5, 3.0)
    growth_range: tuple = (-2.0, 2.0)
    frequency_range: tuple = (TWO_PI, 4 * TWO_PI)
    offset_range: tuple = (-0.5, 0.5)
    seed: int = 0


def field_value(params, t):
    t = np.asarray(t, dtype=np.float64)
    return (
        params.amplitude * np.exp(params.growth * t) * np.sin(params.frequency * t)
        + params.offset
    )


def generate_field_family(config=FieldFamilyConfig()):
    """Sample ``A exp(alpha t) sin(omega t) + B`` curves on ``t in [0, 1]``.

    Returns ``(curves, matrix)`` where ``matrix`` has one curve per row.
    """
    if config.n_curves < 1 or config.t_samples < 1:
        raise InvalidArgument("n_curves and t_samples must be >= 1")
    ranges = [config.amplitude_range, config.growth_range, config.frequency_range, config.offset_range]
    for lo_hi in ranges:
        lo, hi = (float(v) for v in lo_hi)
        if not (np.isfinite(lo) and np.isfinite(hi)) or hi < lo:
            raise InvalidArgument(f"invalid parameter range {lo_hi}")
    rng = np.random.default_rng(derive_seed(config.seed, "fields"))
    draws = np.column_stack([rng.uniform(lo, hi, size=config.n_curves) for lo, hi in ranges])
    t = np.linspace(0.0, 1.0, config.t_samples)
    matrix = (
        draws[:, :1] * np.exp(draws[:, 1:2] * t) * np.sin(draws[:, 2:3] * t) + draws[:, 3:4]
    )
    curves = [FieldCurve(FieldParams(*map(float, d)), matrix[i]) for i, d in enumerate(draws)]
    return curves, matrix
