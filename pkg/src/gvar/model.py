"""The generalised vector autoregression (GVAR) model.

``K`` MLPs each map one lagged observation ``x_{t-k}`` (length ``p``) to a flat
vector of ``p*p`` generalised coefficients, reshaped row-major into a matrix whose
entry ``(i, j)`` is the influence of variable ``j`` at lag ``k`` on variable ``i``.
The one-step forecast is ``sum_k Psi_k(x_{t-k}) @ x_{t-k}``.

Networks operate on standardised data: ``z = (x - mean) / std``. Coefficients are
therefore on the standardised scale, and raw-scale forecasts are mapped back with
``mean + std * z_hat``. The default standardisation is the identity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from gvar.autodiff import (
    FORMAT_VERSION,
    Tensor,
    batched_matvec,
    checkpoint_dict,
    forward_mlp,
    init_mlp,
    params_from_checkpoint,
)
from gvar.data import as_array
from gvar.errors import DimensionError, InsufficientDataError, UsageError


@dataclass
class GvarModel:
    p: int
    K: int
    hidden: tuple = (50, 50)
    nets: list = field(default_factory=list)
    mean: np.ndarray | None = None
    std: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        if self.K < 1 or self.p < 1:
            raise DimensionError(f"need p >= 1 and K >= 1, got p={self.p}, K={self.K}")
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.mean is None:
            self.mean = np.zeros(self.p)
        if self.std is None:
            self.std = np.ones(self.p)
        self.mean = np.asarray(self.mean, dtype=float)
        self.std = np.asarray(self.std, dtype=float)
        if len(self.nets) != self.K:
            raise DimensionError(f"expected {self.K} networks, got {len(self.nets)}")

    @property
    def layer_spec(self):
        return [self.p, *self.hidden, self.p * self.p]

    @classmethod
    def initialise(cls, p, K, hidden=(50, 50), seed=0, mean=None, std=None):
        """Fresh model; network ``k`` is seeded from ``(seed, k)``."""
        spec = [p, *hidden, p * p]
        seeds = np.random.SeedSequence(seed).generate_state(K)
        nets = [init_mlp(spec, int(s)) for s in seeds]
        return cls(p, K, tuple(hidden), nets, mean, std, seed)

    def standardise(self, x):
        return (np.asarray(x, dtype=float) - self.mean) / self.std

    def parameter_stores(self):
        return list(self.nets)

    # -- checkpoints --------------------------------------------------------
    def to_dict(self):
        return {
            "format_version": FORMAT_VERSION,
            "p": self.p,
            "K": self.K,
            "hidden": list(self.hidden),
            "seed": int(self.seed),
            "reshape": "row-major; row = target i, column = source j",
            "standardization": {"mean": self.mean.tolist(), "std": self.std.tolist()},
            "nets": [checkpoint_dict(net, self.layer_spec) for net in self.nets],
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format_version") != FORMAT_VERSION:
            raise UsageError(f"unsupported checkpoint format_version {doc.get('format_version')!r}")
        nets = [params_from_checkpoint(net)[0] for net in doc["nets"]]
        std = doc["standardization"]
        return cls(doc["p"], doc["K"], tuple(doc["hidden"]), nets,
                   np.array(std["mean"]), np.array(std["std"]), doc.get("seed", 0))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def lag_coefficients(model, k, z):
    """Differentiable ``Psi_k`` for a batch ``z`` of standardised inputs, shape ``(n, p, p)``."""
    out = forward_mlp(model.nets[k - 1], model.layer_spec, z)
    return out.reshape(z.shape[0], model.p, model.p)


def forecast_from_coefficients(coefs, lagged):
    """``sum_k coefs[k] @ lagged[k]`` for Tensors ``coefs[k]: (n,p,p)``, ``lagged[k]: (n,p)``."""
    total = None
    for psi, z in zip(coefs, lagged):
        term = batched_matvec(psi, z)
        total = term if total is None else total + term
    return total


def predict(model, window):
    """One-step forecast from the ``K`` most recent observations.

    Args:
        window: array of shape ``(K, p)`` in chronological order, so ``window[-1]``
            is ``x_{t-1}`` and ``window[0]`` is ``x_{t-K}``.

    Returns:
        ``(forecast, coefficients)`` with ``forecast`` of shape ``(p,)`` on the raw
        scale and ``coefficients[k-1]`` the ``p x p`` matrix ``Psi_k(x_{t-k})``.
    """
    window = np.asarray(window, dtype=float)
    if window.ndim != 2 or window.shape[1] != model.p:
        raise DimensionError(f"window must have width p={model.p}, got shape {window.shape}")
    if window.shape[0] != model.K:
        raise DimensionError(f"window must have K={model.K} rows, got {window.shape[0]}")
    z = model.standardise(window)
    coefs = np.empty((model.K, model.p, model.p))
    z_hat = np.zeros(model.p)
    for k in range(1, model.K + 1):
        zk = z[model.K - k]
        psi = lag_coefficients(model, k, Tensor(zk[None, :])).data[0]
        coefs[k - 1] = psi
        z_hat += psi @ zk
    return model.mean + model.std * z_hat, coefs


@dataclass
class CoefficientTensor:
    """Generalised coefficients ``values[t_idx, k-1, i, j]`` for ``t = K+1 .. T``.

    ``times`` holds the 1-based time index of each row.
    """

    values: np.ndarray
    times: np.ndarray

    @property
    def K(self):
        return self.values.shape[1]

    @property
    def p(self):
        return self.values.shape[2]

    def forecasts(self, series, model=None):
        """Standardised-scale forecasts reconstructed from the stored coefficients."""
        z = as_array(series) if model is None else model.standardise(as_array(series))
        T = z.shape[0]
        K = self.K
        out = np.zeros((T - K, self.p))
        for k in range(1, K + 1):
            out += np.einsum("nij,nj->ni", self.values[:, k - 1], z[K - k:T - k])
        return out


def coefficients_over_series(model, series):
    """Evaluate every ``Psi_k(x_{t-k})`` for ``t = K+1 .. T``."""
    x = as_array(series)
    if x.shape[1] != model.p:
        raise DimensionError(f"series has {x.shape[1]} variables, model expects {model.p}")
    T, K = x.shape[0], model.K
    if T <= K:
        raise InsufficientDataError(f"series length T={T} must exceed model order K={K}")
    z = model.standardise(x)
    values = np.empty((T - K, K, model.p, model.p))
    for k in range(1, K + 1):
        values[:, k - 1] = lag_coefficients(model, k, Tensor(z[K - k:T - k])).data
    return CoefficientTensor(values, np.arange(K + 1, T + 1))


def forecast_series(model, series):
    """Raw-scale one-step forecasts for ``t = K+1 .. T``, shape ``(T-K, p)``."""
    coefs = coefficients_over_series(model, series)
    z_hat = coefs.forecasts(series, model)
    return model.mean + model.std * z_hat
