"""Simulation, estimation and interaction-graph selection for discrete-time
stochastic neurons with variable-length memory."""

from ._kernels import BACKEND
from .errors import CapabilityError, InputError, IntegrationError, OptimizerError
from .estimate import (
    ContextCounts,
    FitOptions,
    FitResult,
    build_features,
    context_counts,
    context_log_likelihood,
    fit_network,
    fit_neuron,
    log_likelihood,
    log_likelihood_derivatives,
    network_log_likelihood,
)
from .model import (
    RateKind,
    RateParams,
    SpikeSample,
    WeightMatrix,
    last_spike_time,
    membrane_potential,
    sigmoid,
    softplus,
    spike_probability,
)
from .selection import (
    NeighborhoodEstimate,
    PredictedProbVector,
    epsilon_from_alpha,
    estimate_graph,
    estimate_neighborhood,
    lrt_statistic,
    predicted_probabilities,
    sensitivity,
    sensitivity_matrix,
    theoretical_margin,
)
from .simulate import (
    InitMode,
    SimConfig,
    admissible_initial_past,
    exact_transition_distribution,
    rng_for,
    simulate,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "__version__",
    "CapabilityError",
    "InputError",
    "IntegrationError",
    "OptimizerError",
    "ContextCounts",
    "FitOptions",
    "FitResult",
    "build_features",
    "context_counts",
    "context_log_likelihood",
    "fit_network",
    "fit_neuron",
    "log_likelihood",
    "log_likelihood_derivatives",
    "network_log_likelihood",
    "RateKind",
    "RateParams",
    "SpikeSample",
    "WeightMatrix",
    "last_spike_time",
    "membrane_potential",
    "sigmoid",
    "softplus",
    "spike_probability",
    "NeighborhoodEstimate",
    "PredictedProbVector",
    "epsilon_from_alpha",
    "estimate_graph",
    "estimate_neighborhood",
    "lrt_statistic",
    "predicted_probabilities",
    "sensitivity",
    "sensitivity_matrix",
    "theoretical_margin",
    "InitMode",
    "SimConfig",
    "admissible_initial_past",
    "exact_transition_distribution",
    "rng_for",
    "simulate",
]
