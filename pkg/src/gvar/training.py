"""Penalised GVAR training.

The objective on a mini-batch of time indices is

    mean_t ||x_t - x_hat_t||^2
    + lam   * mean_t R(Psi_t)
    + gamma * mean_{pairs} ||Psi_{t+1} - Psi_t||^2

with the elastic net ``R(Psi) = alpha ||Psi||_1 + (1 - alpha) ||Psi||_2^2`` (entrywise
norms over the concatenation of all lag matrices). With ``reduction="mean"`` (the
default) the squared error is divided by ``p`` and the elastic net by ``K p^2``, so
both are per-entry averages and ``lam`` does not grow with ``p`` and ``K``; the
smoothing term stays a full squared Frobenius norm per consecutive pair.
``reduction="sum"`` uses the plain norms throughout. A sample at time ``t`` carries its
own consecutive pair ``(t, t+1)`` whenever ``t < T``, so shuffled mini-batches stay
unbiased for the smoothing term; the last index contributes no pair.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from gvar.autodiff import Tensor, batched_matvec, step_optimizer
from gvar.data import as_array
from gvar.errors import ConfigError, DivergedTrainingError, InsufficientDataError, UsageError
from gvar.model import GvarModel, lag_coefficients

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    """Hyperparameters of one GVAR fit.

    ``lam`` is the sparsity weight, ``gamma`` the smoothing weight and ``alpha``
    the elastic-net mix. The config-file key ``lambda`` is accepted for ``lam``.
    """

    K: int = 1
    lam: float = 0.0
    gamma: float = 0.0
    alpha: float = 0.5
    epochs: int = 1000
    batch_size: int = 64
    learning_rate: float = 1e-4
    hidden: tuple = (50, 50)
    seed: int = 0
    standardize: bool = True
    reduction: str = "mean"

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.K < 1:
            raise ConfigError(f"K must be >= 1, got {self.K}")
        if self.lam < 0 or self.gamma < 0:
            raise ConfigError(f"lam and gamma must be >= 0, got {self.lam}, {self.gamma}")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if self.reduction not in ("mean", "sum"):
            raise ConfigError(f"reduction must be 'mean' or 'sum', got {self.reduction!r}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")

    @classmethod
    def from_dict(cls, payload):
        payload = dict(payload)
        if "lambda" in payload:
            payload["lam"] = payload.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown training keys: {sorted(unknown)}")
        return cls(**payload)

    def to_dict(self):
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    def replace(self, **changes):
        d = self.to_dict()
        d.update(changes)
        return TrainConfig(**d)


@dataclass
class TrainReport:
    history: list = field(default_factory=list)
    final: dict = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def final_loss(self):
        return self.final.get("total")

    def to_json(self, **kwargs):
        return json.dumps(asdict(self), **kwargs)


@dataclass
class LossTerms:
    total: Tensor
    mse: float
    sparsity: float
    smoothing: float


@dataclass
class Batch:
    """Standardised series ``z`` and the 0-based target times of the samples."""

    z: np.ndarray
    times: np.ndarray


def make_batch(z, times, K):
    z = np.asarray(z, dtype=float)
    times = np.asarray(times, dtype=int)
    if times.size == 0:
        raise UsageError("empty batch")
    if times.min() < K or times.max() >= z.shape[0]:
        raise UsageError(f"sample times must lie in [{K}, {z.shape[0] - 1}]")
    return Batch(z, times)


def elastic_net(psi, alpha):
    """``alpha * sum|psi| + (1 - alpha) * sum psi^2`` for a Tensor or array."""
    if not isinstance(psi, Tensor):
        psi = np.asarray(psi, dtype=float)
        return alpha * np.abs(psi).sum() + (1 - alpha) * np.square(psi).sum()
    return alpha * psi.abs().sum() + (1 - alpha) * psi.square().sum()


def loss(model, batch, lam=0.0, gamma=0.0, alpha=0.5, reduction="mean"):
    """Penalised loss on one batch; returns the differentiable total and its parts.

    ``sparsity`` and ``smoothing`` are the batch averages before weighting, so
    ``total == mse + lam * sparsity + gamma * smoothing``.
    """
    z, ts = batch.z, batch.times
    if ts.size == 0:
        raise UsageError("empty batch")
    T, K = z.shape[0], model.K
    has_next = ts + 1 < T
    # samples with a successor first, so their rows are a leading slice
    ts = np.concatenate([ts[has_next], ts[~has_next]])
    n = ts.size
    m = int(has_next.sum())
    nxt = ts[:m]

    psi_now, lagged = [], []
    sparsity = None
    smooth = None
    for k in range(1, K + 1):
        inputs = z[ts - k] if m == 0 else np.concatenate([z[ts - k], z[nxt + 1 - k]])
        out = lag_coefficients(model, k, Tensor(inputs))
        psi_t = out[:n]
        psi_now.append(psi_t)
        lagged.append(z[ts - k])
        r = elastic_net(psi_t, alpha)
        sparsity = r if sparsity is None else sparsity + r
        if m:
            diff = out[n:] - out[:m]
            s = diff.square().sum()
            smooth = s if smooth is None else smooth + s

    forecast = None
    for psi_t, zk in zip(psi_now, lagged):
        term = batched_matvec(psi_t, zk)
        forecast = term if forecast is None else forecast + term
    if reduction == "mean":
        n_err, n_coef = model.p, K * model.p * model.p
    else:
        n_err = n_coef = 1
    resid = forecast - z[ts]
    mse = resid.square().sum() * (1.0 / (n * n_err))
    sparsity = sparsity * (1.0 / (n * n_coef))
    total = mse + lam * sparsity
    smooth_val = 0.0
    if m:
        smooth = smooth * (1.0 / m)
        total = total + gamma * smooth
        smooth_val = smooth.item()
    return LossTerms(total, mse.item(), sparsity.item(), smooth_val)


def standardisation(x):
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return mean, std


def fit(series, config, model=None):
    """Train a GVAR on one replicate; deterministic given ``config.seed``.

    Args:
        series: ``TimeSeries`` or ``T x p`` array.
        config: :class:`TrainConfig`.
        model: optional pre-initialised model to continue from.

    Returns:
        ``(model, report)``.

    Raises:
        InsufficientDataError: if ``T <= K + 1``.
        DivergedTrainingError: if a batch loss is NaN or infinite.
    """
    x = as_array(series)
    T, p = x.shape
    K = config.K
    if T <= K + 1:
        raise InsufficientDataError(f"series length T={T} must exceed K+1={K + 1}")
    if not np.all(np.isfinite(x)):
        raise InsufficientDataError("series contains non-finite values")
    if config.standardize:
        mean, std = standardisation(x)
    else:
        mean, std = np.zeros(p), np.ones(p)
    if model is None:
        model = GvarModel.initialise(p, K, config.hidden, config.seed, mean, std)
    z = model.standardise(x)
    rng = np.random.default_rng([config.seed, 1])
    times = np.arange(K, T)
    report = TrainReport()
    started = time.perf_counter()
    stores = model.parameter_stores()
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(times)
        sums = np.zeros(4)
        n_batches = 0
        for start in range(0, order.size, config.batch_size):
            batch = Batch(z, order[start:start + config.batch_size])
            for store in stores:
                store.zero_grad()
            terms = loss(model, batch, config.lam, config.gamma, config.alpha, config.reduction)
            total = terms.total.item()
            if not np.isfinite(total):
                raise DivergedTrainingError(epoch)
            terms.total.backward()
            for store in stores:
                step_optimizer(store, config.learning_rate)
            sums += (total, terms.mse, terms.sparsity, terms.smoothing)
            n_batches += 1
        sums /= n_batches
        report.history.append(dict(zip(("total", "mse", "sparsity", "smoothing"), sums.tolist())))
    full = loss(model, Batch(z, times), config.lam, config.gamma, config.alpha,
                config.reduction)
    if not np.isfinite(full.total.item()):
        raise DivergedTrainingError(config.epochs)
    report.final = {"total": full.total.item(), "mse": full.mse,
                    "sparsity": full.sparsity, "smoothing": full.smoothing}
    report.wall_time = time.perf_counter() - started
    log.debug("fit done: %s in %.1fs", report.final, report.wall_time)
    return model, report
