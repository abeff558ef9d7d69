"""From trained GVAR models to a summary graph with effect signs.

Strength matrices are indexed ``[source, target]`` (row ``i``, column ``j`` is the
effect of ``x^i`` on ``x^j``), i.e. transposed relative to the coefficient
matrices, whose rows are targets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from gvar.data import TimeSeries
from gvar.errors import DimensionError, NoStableStructureError
from gvar.metrics import balanced_accuracy, confusion_from_labels
from gvar.model import coefficients_over_series
from gvar.training import fit

DEFAULT_Q = 20


def default_xi_grid(q=DEFAULT_Q):
    """``q`` equally spaced quantile levels in [0, 1]."""
    return np.linspace(0.0, 1.0, int(q))


@dataclass
class StrengthMatrix:
    S: np.ndarray
    signed_median: np.ndarray
    argmax_lag: np.ndarray


@dataclass
class SummaryGraph:
    A: np.ndarray
    sign: np.ndarray = None

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=int)
        if self.sign is None:
            self.sign = np.zeros_like(self.A)
        self.sign = np.asarray(self.sign, dtype=int)


@dataclass
class StabilityCurve:
    xi: np.ndarray
    agreement: np.ndarray
    chosen: float | None = None


def aggregate(coefs):
    """Strength of each (source, target) pair: max over lags of the median |coefficient|.

    ``signed_median`` is the median signed coefficient at the maximising lag.
    """
    values = coefs.values if hasattr(coefs, "values") else np.asarray(coefs)
    if values.ndim != 4 or values.shape[0] == 0:
        raise DimensionError(f"expected a non-empty (time, lag, p, p) tensor, got {values.shape}")
    med_abs = np.median(np.abs(values), axis=0)            # (K, target, source)
    k_star = np.argmax(med_abs, axis=0)                     # (target, source)
    S = np.take_along_axis(med_abs, k_star[None], axis=0)[0]
    med = np.median(values, axis=0)
    signed = np.take_along_axis(med, k_star[None], axis=0)[0]
    return StrengthMatrix(S.T.copy(), signed.T.copy(), (k_star + 1).T.copy())


def quantile(X, xi):
    """Linear-interpolation quantile (type 7) of all entries of ``X``."""
    return float(np.quantile(np.asarray(X, dtype=float), xi, method="linear"))


def tau(X, kappa):
    """Elementwise thresholding: 1 where ``|X| >= kappa``."""
    return (np.abs(np.asarray(X, dtype=float)) >= kappa).astype(int)


def _off(A):
    A = np.asarray(A).astype(bool)
    return A[~np.eye(A.shape[0], dtype=bool)]


def is_trivial(A):
    """No off-diagonal edge (empty or self-links only) or every off-diagonal edge."""
    off = _off(A)
    return not off.any() or off.all()


def agreement(A, B):
    """Symmetrised BA between two binary matrices over the off-diagonal cells.

    Self-links are strong in both time directions, so counting them would favour
    nearly diagonal graphs.
    """
    if is_trivial(A) or is_trivial(B):
        return 0.0
    a, b = _off(A), _off(B)
    return 0.5 * (balanced_accuracy(confusion_from_labels(a, b))
                  + balanced_accuracy(confusion_from_labels(b, a)))


def threshold_stability(S, S_rev, xi=None):
    """Pick the quantile threshold whose forward/reversed graphs agree most.

    Args:
        S: forward strength matrix (array or :class:`StrengthMatrix`).
        S_rev: strength matrix from the time-reversed series; its transpose is
            compared against ``S``.
        xi: increasing quantile levels in [0, 1]; defaults to 20 evenly spaced.

    Returns:
        ``(graph, curve)``. Among equally agreeing levels the first (smallest) one
        is chosen, i.e. the densest of the equally stable graphs.

    Raises:
        NoStableStructureError: every level gives agreement 0.
    """
    S = getattr(S, "S", S)
    S_rev = getattr(S_rev, "S", S_rev)
    S = np.asarray(S, dtype=float)
    S_rev = np.asarray(S_rev, dtype=float)
    if S.shape != S_rev.shape or S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DimensionError(f"need two equal square matrices, got {S.shape} and {S_rev.shape}")
    xi = default_xi_grid() if xi is None else np.asarray(xi, dtype=float)
    if xi.size == 0 or np.any(xi < 0) or np.any(xi > 1):
        raise ValueError("xi grid must be non-empty with values in [0, 1]")
    if np.any(np.diff(xi) <= 0):
        raise ValueError("xi grid must be strictly increasing")
    S_rev_t = S_rev.T
    sigma = np.empty(xi.size)
    for n, level in enumerate(xi):
        A = tau(S, quantile(S, level))
        B = tau(S_rev_t, quantile(S_rev, level))
        sigma[n] = agreement(A, B)
    curve = StabilityCurve(xi, sigma)
    best = sigma.max()
    if best <= 0:
        raise NoStableStructureError("all thresholds give trivial graphs", curve)
    i_star = int(np.nonzero(sigma >= best - 1e-12)[0][0])
    curve.chosen = float(xi[i_star])
    return SummaryGraph(tau(S, quantile(S, xi[i_star]))), curve


def extract_signs(graph, strengths):
    """Fill ``graph.sign`` with the sign of the signed median on present edges."""
    sign = np.sign(strengths.signed_median).astype(int) * (graph.A != 0)
    return SummaryGraph(graph.A.copy(), sign)


@dataclass
class InferenceResult:
    graph: SummaryGraph
    strengths: StrengthMatrix
    strengths_rev: StrengthMatrix
    curve: StabilityCurve
    coefficients: object = None
    models: tuple = ()
    reports: tuple = ()
    fallback: bool = False
    extras: dict = field(default_factory=dict)


def infer(series, config, xi=None, fallback_quantile=None):
    """Full pipeline: fit on the series and its time reversal, aggregate, threshold, sign.

    If ``fallback_quantile`` is given and no threshold is stable, the forward
    strengths are cut at that quantile instead of raising.
    """
    if not isinstance(series, TimeSeries):
        series = TimeSeries(series)
    model, report = fit(series, config)
    reversed_series = series.reversed()
    model_rev, report_rev = fit(reversed_series, config)
    coefs = coefficients_over_series(model, series)
    strengths = aggregate(coefs)
    strengths_rev = aggregate(coefficients_over_series(model_rev, reversed_series))
    fallback = False
    try:
        graph, curve = threshold_stability(strengths, strengths_rev, xi)
    except NoStableStructureError as exc:
        if fallback_quantile is None:
            raise
        curve = exc.curve
        graph = SummaryGraph(tau(strengths.S, quantile(strengths.S, fallback_quantile)))
        fallback = True
    graph = extract_signs(graph, strengths)
    return InferenceResult(graph, strengths, strengths_rev, curve, coefs,
                           (model, model_rev), (report, report_rev), fallback)
