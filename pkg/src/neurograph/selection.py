"""Interaction-neighborhood selection by leave-one-neuron-out sensitivity.

For a postsynaptic neuron i, the fitted weights of the full model and of
the model with candidate j pinned to zero each induce a vector of
predicted spiking probabilities over t = 1..T.  The sensitivity

    d = (1/T) * sum_t |p_without_j[t] - p_full[t]|**2

measures how much removing j perturbs the predictions; j is declared a
presynaptic neighbor of i when d exceeds a threshold epsilon.

``lrt_statistic`` exposes the likelihood-ratio statistic of the same
nested pair, 2T * (l_full - l_without_j), which is asymptotically
chi-square(1) when j truly has no influence.  ``epsilon_from_alpha``
turns a significance level into a threshold via the chi-square quantile;
this calibration is a heuristic upper bound (the sensitivity is dominated
by the rescaled likelihood-ratio statistic), not an exact test.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from .errors import InputError, OptimizerError
from .estimate import FitOptions, FitResult, build_features, fit_neuron, log_likelihood
from .model import SpikeSample, sigmoid

__all__ = [
    "PredictedProbVector",
    "NeighborhoodEstimate",
    "predicted_probabilities",
    "sensitivity",
    "sensitivity_matrix",
    "estimate_neighborhood",
    "estimate_graph",
    "lrt_statistic",
    "epsilon_from_alpha",
    "theoretical_margin",
]


@dataclass(frozen=True)
class PredictedProbVector:
    """Predicted spiking probabilities of one neuron over t = 1..T.

    Entries at reset bins equal 0.5 exactly, whatever the presynaptic
    subset; all entries are strictly inside (0, 1).
    """

    neuron: int
    subset: frozenset
    probs: np.ndarray


@dataclass(frozen=True)
class NeighborhoodEstimate:
    """Selected presynaptic set of one neuron at threshold epsilon."""

    neuron: int
    epsilon: float
    selected: frozenset
    sensitivities: dict


def predicted_probabilities(
    sample: SpikeSample,
    i: int,
    subset,
    fit: FitResult,
    features=None,
) -> PredictedProbVector:
    """phi(<w(F), z_t>) over t = 1..T for a fit restricted to subset F."""
    subset = frozenset(int(j) for j in subset)
    if fit.neuron != i:
        raise InputError(f"fit is for neuron {fit.neuron}, expected {i}")
    if fit.presynaptic_set(sample.n_neurons) != subset:
        raise InputError("fit was not produced on the requested presynaptic set")
    outside = np.ones(sample.n_neurons, dtype=bool)
    outside[list(subset)] = False
    if np.any(fit.weights[outside] != 0.0):
        raise InputError("fit has nonzero weights outside the requested set")
    feats = features if features is not None else build_features(sample, i)
    probs = sigmoid(feats.z @ fit.weights)
    return PredictedProbVector(i, subset, probs)


def sensitivity(p_subset: PredictedProbVector, p_full: PredictedProbVector) -> float:
    """Mean squared gap between two predicted-probability vectors."""
    if p_subset.neuron != p_full.neuron:
        raise InputError("predicted vectors belong to different neurons")
    if p_subset.probs.shape != p_full.probs.shape:
        raise InputError("predicted vectors have different lengths")
    diff = p_subset.probs - p_full.probs
    return float(diff @ diff) / p_full.probs.size


def _leave_one_out(sample, i, opts, feats, full):
    """Refit and predicted probabilities for every j != i, warm-started."""
    n = sample.n_neurons
    everyone = frozenset(j for j in range(n) if j != i)
    p_full = predicted_probabilities(sample, i, everyone, full, feats)
    d = {}
    fits = {}
    for j in sorted(everyone):
        try:
            refit = fit_neuron(
                sample,
                i,
                opts,
                support=everyone - {j},
                warm_start=full.weights,
                features=feats,
            )
        except OptimizerError as exc:
            exc.excluded = j
            raise
        p_j = predicted_probabilities(sample, i, everyone - {j}, refit, feats)
        d[j] = sensitivity(p_j, p_full)
        fits[j] = refit
    return p_full, d, fits


def estimate_neighborhood(
    sample: SpikeSample,
    i: int,
    epsilon: float,
    opts: FitOptions = FitOptions(),
) -> NeighborhoodEstimate:
    """Select {j : d(leave-j-out, full) > epsilon} for neuron i."""
    if epsilon <= 0:
        raise InputError("epsilon must be positive")
    feats = build_features(sample, i)
    full = fit_neuron(sample, i, opts, features=feats)
    _, d, _ = _leave_one_out(sample, i, opts, feats, full)
    selected = frozenset(j for j, v in d.items() if v > epsilon)
    return NeighborhoodEstimate(i, float(epsilon), selected, d)


def sensitivity_matrix(sample: SpikeSample, opts: FitOptions = FitOptions()):
    """All leave-one-out sensitivities at once.

    Returns (D, fits) where D[j, i] is the sensitivity of neuron i to
    removing j (diagonal zero) and fits are the full per-neuron fits.
    Thresholding D against any epsilon grid reproduces
    ``estimate_neighborhood`` without refitting.
    """
    n = sample.n_neurons
    d_mat = np.zeros((n, n))
    fits = []
    for i in range(n):
        feats = build_features(sample, i)
        full = fit_neuron(sample, i, opts, features=feats)
        fits.append(full)
        _, d, _ = _leave_one_out(sample, i, opts, feats, full)
        for j, v in d.items():
            d_mat[j, i] = v
    return d_mat, fits


def estimate_graph(
    sample: SpikeSample, epsilon: float, opts: FitOptions = FitOptions()
) -> np.ndarray:
    """0/1 adjacency with entry (j, i) = 1 iff j is selected for neuron i."""
    if epsilon <= 0:
        raise InputError("epsilon must be positive")
    d_mat, _ = sensitivity_matrix(sample, opts)
    graph = (d_mat > epsilon).astype(np.uint8)
    np.fill_diagonal(graph, 0)
    return graph


def lrt_statistic(
    sample: SpikeSample,
    i: int,
    j: int,
    opts: FitOptions = FitOptions(),
    features=None,
    full: FitResult | None = None,
) -> float:
    """2T * (full-model likelihood - leave-j-out likelihood), clamped at 0."""
    if i == j:
        raise InputError("candidate must differ from the postsynaptic neuron")
    n = sample.n_neurons
    feats = features if features is not None else build_features(sample, i)
    if full is None:
        full = fit_neuron(sample, i, opts, features=feats)
    everyone = frozenset(r for r in range(n) if r != i)
    refit = fit_neuron(
        sample, i, opts, support=everyone - {j},
        warm_start=full.weights, features=feats,
    )
    stat = 2.0 * sample.horizon * (
        log_likelihood(feats, full.weights) - log_likelihood(feats, refit.weights)
    )
    return max(stat, 0.0)


def epsilon_from_alpha(alpha: float, horizon: int) -> float:
    """Heuristic threshold from a significance level.

    Uses the chi-square(1) quantile at 1 - alpha scaled by 1/(2T): the
    sensitivity statistic is upper-bounded by the likelihood-ratio
    statistic rescaled by 1/T, and the latter is 2T times a likelihood
    gap.  Smaller alpha gives a larger epsilon.
    """
    if not 0.0 < alpha < 1.0:
        raise InputError("alpha must lie in (0, 1)")
    if horizon < 1:
        raise InputError("horizon must be >= 1")
    return float(chi2.ppf(1.0 - alpha, df=1)) / (2.0 * horizon)


def theoretical_margin(column) -> float | None:
    """Detectability margin of one weight column.

    m = inf of the logistic derivative over [sum of negative entries,
    sum of positive entries], times the smallest nonzero |weight|.
    The derivative phi' = phi(1-phi) decreases in |u|, so the infimum is
    attained at the endpoint of larger magnitude.  Returns None when the
    column has no nonzero entries (no neighborhood to detect).
    """
    col = np.asarray(column, dtype=np.float64)
    nonzero = col[col != 0.0]
    if nonzero.size == 0:
        return None
    lo = float(col[col < 0].sum())
    hi = float(col[col > 0].sum())
    u = max(abs(lo), abs(hi))
    p = sigmoid(u)
    return float(p * (1.0 - p) * np.abs(nonzero).min())
