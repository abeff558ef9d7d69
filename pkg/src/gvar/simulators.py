"""Seeded generators for the benchmark systems, with ground-truth summary graphs.

All adjacency and sign matrices are indexed ``[source, target]``: entry ``(j, i)``
is 1 when variable ``j`` Granger-causes variable ``i``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from gvar.data import GroundTruth, TimeSeries, load_csv  # noqa: F401  (re-exported)
from gvar.errors import ConfigError

SYSTEMS = ("lorenz96", "lotka_volterra", "linear")

_DEFAULTS = {
    # system: (p, T, stride, noise, burn_in)
    "lorenz96": (20, 500, 10, 0.1, 200),
    "lotka_volterra": (10, 2000, 20, 0.1, 200),
    "linear": (4, 500, 1, 0.4, 100),
}


@dataclass
class SimConfig:
    """Simulation settings; ``None`` fields take the per-system defaults.

    For ``lotka_volterra`` the field ``p`` is the number of species per trophic
    level, so the series has ``2 p`` variables (prey first, then predators).
    ``burn_in`` counts sampled steps that are simulated and discarded.
    """

    system: str = "lorenz96"
    p: int | None = None
    T: int | None = None
    F: float = 10.0
    alpha: float = 1.1
    beta: float = 0.2
    delta: float = 0.2
    rho: float = 1.1
    eta: float = 2.75e-5
    n_parents: int = 2
    dt: float = 0.01
    stride: int | None = None
    noise: float | None = None
    burn_in: int | None = None
    x0: list | None = None
    coefficients: list | None = None
    seed: int = 0

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ConfigError(f"unknown system {self.system!r}; expected one of {SYSTEMS}")
        p, T, stride, noise, burn_in = _DEFAULTS[self.system]
        self.p = p if self.p is None else int(self.p)
        self.T = T if self.T is None else int(self.T)
        self.stride = stride if self.stride is None else int(self.stride)
        self.noise = noise if self.noise is None else float(self.noise)
        self.burn_in = burn_in if self.burn_in is None else int(self.burn_in)
        if self.T < 2:
            raise ConfigError(f"T must be >= 2, got {self.T}")
        if not self.dt > 0:
            raise ConfigError(f"integration step must be > 0, got {self.dt}")
        if self.noise < 0:
            raise ConfigError(f"noise scale must be >= 0, got {self.noise}")
        if self.stride < 1 or self.burn_in < 0:
            raise ConfigError("stride must be >= 1 and burn_in >= 0")

    @classmethod
    def from_dict(cls, payload):
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown simulation keys: {sorted(unknown)}")
        return cls(**payload)

    def to_dict(self):
        return asdict(self)


def _rk4_step(f, x, h):
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def lorenz96_rhs(x, F):
    """dx^i/dt = (x^{i+1} - x^{i-2}) x^{i-1} - x^i + F with cyclic indices."""
    return (np.roll(x, -1) - np.roll(x, 2)) * np.roll(x, 1) - x + F


def lorenz96_truth(p):
    adjacency = np.zeros((p, p), dtype=int)
    for i in range(p):
        for offset in (-2, -1, 0, 1):
            adjacency[(i + offset) % p, i] = 1
    return GroundTruth(adjacency, np.zeros((p, p), dtype=int))


def simulate_lorenz96(config):
    """RK4 integration of Lorenz 96 plus Gaussian observation noise."""
    if config.p < 4:
        raise ConfigError(f"Lorenz 96 needs p >= 4, got {config.p}")
    rng = np.random.default_rng(config.seed)
    p = config.p
    x = rng.standard_normal(p) if config.x0 is None else np.array(config.x0, dtype=float)
    if x.shape != (p,):
        raise ConfigError(f"x0 must have {p} entries")
    n_samples = config.burn_in + config.T
    out = np.empty((n_samples, p))
    out[0] = x
    f = lambda s: lorenz96_rhs(s, config.F)  # noqa: E731
    for n in range(1, n_samples):
        for _ in range(config.stride):
            x = _rk4_step(f, x, config.dt)
        out[n] = x
    out = out[config.burn_in:]
    out = out + config.noise * rng.standard_normal(out.shape)
    names = [f"x{i + 1}" for i in range(p)]
    return TimeSeries(out, names, config.seed), lorenz96_truth(p)


def lotka_volterra_parents(p, n_parents):
    """Circulant parent sets: prey i is hunted by predators i .. i+m-1 (mod p)."""
    prey_parents = [[(i + m) % p for m in range(n_parents)] for i in range(p)]
    predator_parents = [[(j - m) % p for m in range(n_parents)] for j in range(p)]
    return prey_parents, predator_parents


def lotka_volterra_truth(p, n_parents, beta=1.0, delta=1.0):
    n = 2 * p
    adjacency = np.eye(n, dtype=int)
    sign = np.zeros((n, n), dtype=int)
    prey_parents, predator_parents = lotka_volterra_parents(p, n_parents)
    for i, preds in enumerate(prey_parents):
        if beta != 0:
            for j in preds:
                adjacency[p + j, i] = 1
                sign[p + j, i] = -1
    for j, prey in enumerate(predator_parents):
        if delta != 0:
            for i in prey:
                adjacency[i, p + j] = 1
                sign[i, p + j] = 1
    return GroundTruth(adjacency, sign)


def simulate_lotka_volterra(config):
    """Multi-species predator-prey dynamics with noisy, clipped RK4 transitions.

    After every integration step, Gaussian noise of scale ``config.noise`` is
    added to the state and populations are clipped at zero.
    """
    p, m = config.p, config.n_parents
    if p < 1 or not 1 <= m <= p:
        raise ConfigError(f"need 1 <= n_parents <= p, got n_parents={m}, p={p}")
    rng = np.random.default_rng(config.seed)
    if config.x0 is None:
        state = rng.uniform(10.0, 20.0, size=2 * p)
    else:
        state = np.array(config.x0, dtype=float)
        if state.shape != (2 * p,):
            raise ConfigError(f"x0 must have {2 * p} entries")
        if np.any(state <= 0):
            raise ConfigError("initial populations must be positive")
    prey_parents, predator_parents = lotka_volterra_parents(p, m)
    prey_idx = np.array(prey_parents)
    pred_idx = np.array(predator_parents)
    a, b, d, r, e = config.alpha, config.beta, config.delta, config.rho, config.eta

    def rhs(s):
        x, y = s[:p], s[p:]
        dx = a * x - b * x * y[prey_idx].sum(axis=1) - e * x * x
        dy = d * y * x[pred_idx].sum(axis=1) - r * y
        return np.concatenate([dx, dy])

    n_samples = config.burn_in + config.T
    out = np.empty((n_samples, 2 * p))
    out[0] = state
    for n in range(1, n_samples):
        for _ in range(config.stride):
            state = _rk4_step(rhs, state, config.dt)
            if config.noise > 0:
                state = state + config.noise * rng.standard_normal(2 * p)
            np.maximum(state, 0.0, out=state)
        out[n] = state
    names = [f"prey{i + 1}" for i in range(p)] + [f"predator{j + 1}" for j in range(p)]
    truth = lotka_volterra_truth(p, m, b, d)
    return TimeSeries(out[config.burn_in:], names, config.seed), truth


# (source, target) for a1..a8 over variables (x, w, y, z)
LINEAR_EDGES = ((0, 0), (1, 1), (0, 1), (2, 2), (1, 2), (3, 3), (1, 3), (2, 3))


def draw_linear_coefficients(rng):
    """a_i ~ U([-0.8, -0.2] u [0.2, 0.8]), independently."""
    magnitude = rng.uniform(0.2, 0.8, size=len(LINEAR_EDGES))
    sign = np.where(rng.random(len(LINEAR_EDGES)) < 0.5, -1.0, 1.0)
    return magnitude * sign


def linear_matrix(coefficients):
    """VAR(1) matrix M with ``x_t = M x_{t-1}``; M is indexed ``[target, source]``."""
    M = np.zeros((4, 4))
    for a, (src, tgt) in zip(coefficients, LINEAR_EDGES):
        M[tgt, src] = a
    return M


def simulate_linear(config):
    """The 4-variable chain/collider VAR(1): x -> w -> {y, z}, y -> z, all self-lagged.

    Returns ``(series, truth)``; ``truth.coefficients`` holds the drawn ``a_1..a_8``.
    """
    rng = np.random.default_rng(config.seed)
    if config.coefficients is None:
        coefs = draw_linear_coefficients(rng)
    else:
        coefs = np.array(config.coefficients, dtype=float)
        if coefs.shape != (len(LINEAR_EDGES),):
            raise ConfigError(f"need {len(LINEAR_EDGES)} coefficients")
    M = linear_matrix(coefs)
    x = np.zeros(4) if config.x0 is None else np.array(config.x0, dtype=float)
    n_samples = config.burn_in + config.T
    out = np.empty((n_samples, 4))
    out[0] = x
    for n in range(1, n_samples):
        x = M @ x + config.noise * rng.standard_normal(4)
        out[n] = x
    adjacency = np.zeros((4, 4), dtype=int)
    sign = np.zeros((4, 4), dtype=int)
    for a, (src, tgt) in zip(coefs, LINEAR_EDGES):
        adjacency[src, tgt] = 1
        sign[src, tgt] = int(np.sign(a))
    truth = GroundTruth(adjacency, sign, coefs)
    return TimeSeries(out[config.burn_in:], ["x", "w", "y", "z"], config.seed), truth


def simulate(config):
    """Dispatch on ``config.system``."""
    return {
        "lorenz96": simulate_lorenz96,
        "lotka_volterra": simulate_lotka_volterra,
        "linear": simulate_linear,
    }[config.system](config)
