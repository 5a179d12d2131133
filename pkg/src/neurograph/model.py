"""Primitives of the discrete-time stochastic neuron model.

A network of N neurons is observed on time bins t = -K+1, ..., 0, 1, ..., T.
The first K bins are the *initial past*; the likelihood and all predictions
run over t = 1..T.  Each neuron i carries a variable-length memory: its
state at time t depends on the network only back to its own last spike,
never further back than K bins.

Core quantities:

* last spike time  L = max(t - K, sup{s < t : x_s(i) = 1}),
* membrane potential
      v = 0                                         if x_{t-1}(i) = 1,
      v = sum_j w[j,i] * (#spikes of j in (L, t-1]) / 2**(t-L-1)  otherwise,
* spiking probability  phi(v)  with phi the logistic function.

The 1/2**(t-L-1) factor is the leak: the same presynaptic spike count
contributes half as much for every extra bin elapsed since the last reset.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

__all__ = [
    "SpikeSample",
    "WeightMatrix",
    "RateKind",
    "RateParams",
    "sigmoid",
    "softplus",
    "last_spike_time",
    "membrane_potential",
    "spike_probability",
]


def sigmoid(v):
    """Numerically stable logistic function, elementwise on arrays.

    Branches on the sign of v so that exp() is only ever evaluated on
    non-positive arguments (no overflow for |v| up to ~1e308).
    """
    v = np.asarray(v, dtype=np.float64)
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    if out.ndim == 0:
        return float(out)
    return out


def softplus(v):
    """Stable log(1 + exp(v)), elementwise."""
    v = np.asarray(v, dtype=np.float64)
    out = np.maximum(v, 0.0) + np.log1p(np.exp(-np.abs(v)))
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class SpikeSample:
    """Binary spike history of N neurons over K past bins plus T observed bins.

    ``data`` has shape (N, K + T); column c holds time bin c - K + 1, so
    columns 0..K-1 are times -K+1..0 and columns K..K+T-1 are times 1..T.

    A sample is *admissible* when every neuron spikes at least once in the
    initial past, which guarantees all last-spike times are well defined
    without the memory cap doing any work at t = 1.  Ingestion may produce
    samples that only satisfy this via padding; those carry
    ``virtual_past=True``.
    """

    data: np.ndarray
    memory_cap: int
    virtual_past: bool = False

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.uint8)
        object.__setattr__(self, "data", data)
        if data.ndim != 2:
            raise InputError("spike data must be a 2-d array (neurons x bins)")
        n, total = data.shape
        if n < 1:
            raise InputError("need at least one neuron")
        if self.memory_cap < 1:
            raise InputError("memory cap K must be >= 1")
        if total < self.memory_cap + 1:
            raise InputError(
                f"need at least K+1={self.memory_cap + 1} bins, got {total}"
            )
        if data.max(initial=0) > 1:
            raise InputError("spike data must be 0/1")

    @property
    def n_neurons(self) -> int:
        return self.data.shape[0]

    @property
    def horizon(self) -> int:
        return self.data.shape[1] - self.memory_cap

    def col(self, t: int) -> int:
        """Column index of time bin t (t may range -K+1..T)."""
        return t + self.memory_cap - 1

    def is_admissible(self) -> bool:
        """True if every neuron spikes at least once in the initial past."""
        past = self.data[:, : self.memory_cap]
        return bool(past.any(axis=1).all())

    def prefix(self, horizon: int) -> "SpikeSample":
        """Sample restricted to the first ``horizon`` observed bins."""
        if not 1 <= horizon <= self.horizon:
            raise InputError(f"horizon must be in 1..{self.horizon}")
        return SpikeSample(
            self.data[:, : self.memory_cap + horizon],
            self.memory_cap,
            self.virtual_past,
        )


@dataclass(frozen=True)
class WeightMatrix:
    """Synaptic weight matrix; entry [j, i] is the weight of j onto i.

    Rows index presynaptic neurons, columns postsynaptic ones.  The
    diagonal is zero (no self-connections).
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise InputError("weight matrix must be square")
        if not np.isfinite(w).all():
            raise InputError("weight matrix entries must be finite")
        if np.any(np.diag(w) != 0.0):
            raise InputError("weight matrix diagonal must be zero")

    @property
    def n_neurons(self) -> int:
        return self.weights.shape[0]

    def bound(self) -> float:
        """max_i sum_j |w[j, i]|, a bound on any reachable |potential|."""
        return float(np.abs(self.weights).sum(axis=0).max())

    def rate_floor(self) -> float:
        """delta with delta <= phi(v) <= 1 - delta on the reachable range."""
        return float(sigmoid(-self.bound()))

    def column(self, i: int) -> np.ndarray:
        """Incoming weight vector of postsynaptic neuron i."""
        return self.weights[:, i].copy()

    @classmethod
    def zeros(cls, n: int) -> "WeightMatrix":
        return cls(np.zeros((n, n)))


class RateKind(enum.Enum):
    """Spiking-rate function family.  Only the logistic is implemented."""

    LOGISTIC = "logistic"


@dataclass(frozen=True)
class RateParams:
    """Rate-function selector plus the constructive rate floor.

    ``bound_delta`` is phi(-r) for the weight bound r, so the spiking
    probability provably stays inside [delta, 1 - delta].
    """

    kind: RateKind = RateKind.LOGISTIC
    bound_delta: float = field(default=0.5)

    def __post_init__(self):
        if self.kind is not RateKind.LOGISTIC:
            raise InputError(f"unsupported rate kind: {self.kind}")
        if not 0.0 < self.bound_delta <= 0.5:
            raise InputError("bound_delta must lie in (0, 0.5]")

    @classmethod
    def for_weights(cls, w: WeightMatrix) -> "RateParams":
        return cls(RateKind.LOGISTIC, w.rate_floor())


def _check_indices(sample: SpikeSample, i: int, t: int) -> None:
    if not 0 <= i < sample.n_neurons:
        raise InputError(f"neuron index {i} out of range 0..{sample.n_neurons - 1}")
    if not 1 <= t <= sample.horizon:
        raise InputError(f"time {t} out of range 1..{sample.horizon}")


def last_spike_time(sample: SpikeSample, i: int, t: int) -> int:
    """Last spike time of neuron i before bin t, floored at t - K.

    Returns L with t - K <= L <= t - 1.  L = t - K either when the last
    spike is exactly K bins back or when neuron i is silent over the
    whole window [t-K, t-1].
    """
    _check_indices(sample, i, t)
    k = sample.memory_cap
    lo = sample.col(t - k)
    hi = sample.col(t - 1)
    row = sample.data[i, lo : hi + 1]
    nz = np.flatnonzero(row)
    if nz.size == 0:
        return t - k
    return t - k + int(nz[-1])


def membrane_potential(sample: SpikeSample, w: WeightMatrix, i: int, t: int) -> float:
    """Accumulated, leak-discounted presynaptic input to neuron i at bin t.

    Zero when the neuron spiked at t-1 (reset).  Otherwise each
    presynaptic spike count over (L, t-1] is scaled by w[j, i] and the
    common leak factor 2**-(t-L-1).
    """
    _check_indices(sample, i, t)
    if w.n_neurons != sample.n_neurons:
        raise InputError("weight matrix size does not match sample")
    if sample.data[i, sample.col(t - 1)] == 1:
        return 0.0
    ell = last_spike_time(sample, i, t)
    lo = sample.col(ell + 1)
    hi = sample.col(t - 1)
    counts = sample.data[:, lo : hi + 1].sum(axis=1, dtype=np.float64)
    leak = 2.0 ** -(t - ell - 1)
    return float(w.weights[:, i] @ counts * leak)


def spike_probability(sample: SpikeSample, w: WeightMatrix, i: int, t: int) -> float:
    """P(neuron i spikes at bin t | history), logistic in the potential.

    Always strictly inside (0, 1); exactly 0.5 right after a reset.
    """
    return float(sigmoid(membrane_potential(sample, w, i, t)))
