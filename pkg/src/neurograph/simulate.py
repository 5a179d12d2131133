"""Sampling from the stationary network dynamics.

Each bin t = 1..T is generated in time order: all neurons draw
independently given the realized past (no within-step feedback), with
per-neuron Bernoulli parameter phi(potential).  The generator is Philox
(counter based), so replica streams are independent by key and a run of
horizon T is bit for bit the prefix of a longer run with the same key.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import CapabilityError, InputError
from .model import SpikeSample, WeightMatrix, sigmoid

__all__ = [
    "InitMode",
    "SimConfig",
    "rng_for",
    "admissible_initial_past",
    "simulate",
    "exact_transition_distribution",
    "EXACT_MAX_NEURONS",
]

EXACT_MAX_NEURONS = 12

# Philox keys below 2**64 are reserved for replica streams
# (base_seed XOR replica); auxiliary draws use the space above it.
AUX_KEY_OFFSET = 1 << 64


class InitMode(enum.Enum):
    """How the initial past is built."""

    ALL_SPIKE_AT_ZERO = "all-spike-at-zero"
    BERNOULLI_CONDITIONED = "bernoulli-conditioned"


@dataclass(frozen=True)
class SimConfig:
    horizon: int
    memory_cap: int
    seed: int = 0
    init_mode: InitMode = InitMode.ALL_SPIKE_AT_ZERO
    init_p: float = 0.5

    def __post_init__(self):
        if self.horizon < 1:
            raise InputError("horizon must be >= 1")
        if self.memory_cap < 1:
            raise InputError("memory cap must be >= 1")
        if not 0 <= self.seed < 1 << 64:
            raise InputError("seed must fit in an unsigned 64-bit integer")
        if self.init_mode is InitMode.BERNOULLI_CONDITIONED and not (
            0.0 < self.init_p < 1.0
        ):
            raise InputError("init_p must lie in (0, 1)")


def rng_for(seed: int, replica: int = 0) -> np.random.Generator:
    """Independent replica stream: Philox keyed by seed XOR replica."""
    return np.random.Generator(np.random.Philox(key=seed ^ replica))


def admissible_initial_past(
    n: int,
    k: int,
    mode: InitMode = InitMode.ALL_SPIKE_AT_ZERO,
    rng: np.random.Generator | None = None,
    p: float = 0.5,
) -> np.ndarray:
    """(n, k) fragment for times -K+1..0 with >= 1 spike per neuron row.

    ALL_SPIKE_AT_ZERO puts a single spike per neuron at time 0.
    BERNOULLI_CONDITIONED draws iid Bernoulli(p) and redraws any all-zero
    row, consuming the generator row by row in neuron order.
    """
    if n < 1 or k < 1:
        raise InputError("need n >= 1 and k >= 1")
    if mode is InitMode.ALL_SPIKE_AT_ZERO:
        past = np.zeros((n, k), dtype=np.uint8)
        past[:, k - 1] = 1
        return past
    if rng is None:
        raise InputError("Bernoulli initialization needs a generator")
    past = (rng.random((n, k)) < p).astype(np.uint8)
    for i in range(n):
        while not past[i].any():
            past[i] = rng.random(k) < p
    return past


def _initial_state(data: np.ndarray, k: int):
    """Elapsed times and window spike counts at t = 1, from the past columns.

    For each neuron i: elapsed = 1 - L_i with L_i its last past spike time
    floored at 1 - K, and counts[i, j] the spikes of j over (L_i, 0].
    """
    n = data.shape[0]
    elapsed = np.empty(n, dtype=np.int64)
    counts = np.zeros((n, n), dtype=np.float64)
    past = data[:, :k]
    for i in range(n):
        nz = np.flatnonzero(past[i])
        last_col = int(nz[-1]) if nz.size else 0  # cap: L = 1 - K is column 0
        elapsed[i] = k - last_col
        if last_col + 1 < k:
            counts[i, :] = past[:, last_col + 1 : k].sum(axis=1)
    return elapsed, counts


def simulate(w: WeightMatrix, cfg: SimConfig) -> SpikeSample:
    """Generate a sample of ``cfg.horizon`` bins under weights ``w``.

    Identical (w, cfg) always reproduce the same sample.
    """
    n, k, t = w.n_neurons, cfg.memory_cap, cfg.horizon
    rng = rng_for(cfg.seed)
    data = np.zeros((n, k + t), dtype=np.uint8)
    data[:, :k] = admissible_initial_past(n, k, cfg.init_mode, rng, cfg.init_p)
    uniforms = rng.random((t, n))
    elapsed, counts = _initial_state(data, k)
    _kernels.simulate_chain(data, w.weights, uniforms, k, elapsed, counts)
    return SpikeSample(data, k)


def exact_transition_distribution(
    sample: SpikeSample, w: WeightMatrix, t: int
) -> np.ndarray:
    """Joint law of the N-neuron configuration at bin t given the past.

    Entry c of the returned 2**N vector is the probability of the
    configuration whose bit i (LSB = neuron 0) equals x_t(i).  By
    conditional independence this is a product of per-neuron Bernoulli
    terms.  Guarded to N <= 12 to keep the enumeration small.
    """
    n = sample.n_neurons
    if n > EXACT_MAX_NEURONS:
        raise CapabilityError(
            f"exact enumeration limited to N <= {EXACT_MAX_NEURONS}, got {n}"
        )
    if w.n_neurons != n:
        raise InputError("weight matrix size does not match sample")
    from .model import membrane_potential

    p = np.array(
        [sigmoid(membrane_potential(sample, w, i, t)) for i in range(n)]
    )
    out = np.ones(1)
    for i in range(n):
        # appending the spike branch doubles the index space, so bit i of
        # the final index is neuron i's outcome
        out = np.concatenate([out * (1.0 - p[i]), out * p[i]])
    return out
