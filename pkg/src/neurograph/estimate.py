"""Maximum-likelihood estimation of the synaptic weight matrix.

The rescaled log-likelihood of a sample separates into one concave term
per postsynaptic neuron i:

    l_i(w) = (1/T) * sum_t [ x_t(i) * <w, z_t> - log(1 + exp(<w, z_t>)) ]

with feature vector

    z_t[j] = (1 - x_{t-1}(i)) * (#spikes of j in (L, t-1]) / 2**(t-L-1),

so each column of the weight matrix is fit by its own logistic
regression with the self-weight pinned at zero.  Reset bins (gate = 0)
contribute a constant -log 2 each; they are excluded from the
optimization loop but included in reported likelihood values.

The optimizer is a damped (projected) Newton method with Armijo
backtracking on the box |w_j| <= B.  The box guards against
quasi-complete separation in short samples; a fit that lands on the box
boundary sets ``hit_bound``.

``context_counts`` aggregates the same sample by (elapsed time since the
neuron's own last spike, spike pattern of the other neurons over that
window).  Summing count * log(transition probability) over contexts
reproduces the likelihood exactly, which the tests use as an
independent cross-check.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, OptimizerError
from .model import SpikeSample, WeightMatrix, sigmoid, softplus

__all__ = [
    "FeatureSet",
    "FitOptions",
    "FitResult",
    "ContextCounts",
    "build_features",
    "log_likelihood",
    "log_likelihood_derivatives",
    "fit_neuron",
    "fit_network",
    "network_log_likelihood",
    "context_counts",
    "context_log_likelihood",
]

LOG2 = float(np.log(2.0))


@dataclass(frozen=True)
class FeatureSet:
    """Per-bin regression rows for one postsynaptic neuron.

    ``z`` has shape (T, N) with the gate already folded in (reset rows are
    zero), ``labels`` is x_t(i), ``gate`` is 1 - x_{t-1}(i).  ``elapsed``
    keeps t - L for each bin; it is needed to reconstruct contexts but not
    by the optimizer.
    """

    neuron: int
    z: np.ndarray
    labels: np.ndarray
    gate: np.ndarray
    elapsed: np.ndarray

    @property
    def horizon(self) -> int:
        return self.z.shape[0]

    @property
    def n_neurons(self) -> int:
        return self.z.shape[1]


def build_features(sample: SpikeSample, i: int) -> FeatureSet:
    """Feature rows for neuron i over t = 1..T, fully vectorized.

    Column i of ``z`` is identically zero: by definition no spike of i
    falls strictly between its own last spike and t-1.
    """
    if not 0 <= i < sample.n_neurons:
        raise InputError(f"neuron index {i} out of range")
    x = sample.data
    k, t_len = sample.memory_cap, sample.horizon
    idx = np.arange(x.shape[1])
    last = np.maximum.accumulate(np.where(x[i] == 1, idx, -1))
    r = np.arange(k, k + t_len)
    l_col = np.maximum(last[r - 1], r - k)
    elapsed = r - l_col
    gate = (1 - x[i, r - 1]).astype(np.float64)
    cum = np.zeros((x.shape[0], x.shape[1] + 1), dtype=np.int64)
    np.cumsum(x, axis=1, out=cum[:, 1:])
    counts = (cum[:, r] - cum[:, l_col + 1]).T.astype(np.float64)
    z = counts * np.ldexp(gate, -(elapsed - 1))[:, None]
    labels = x[i, r].astype(np.float64)
    return FeatureSet(i, z, labels, gate, elapsed)


def _check_weights(features: FeatureSet, w) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (features.n_neurons,):
        raise InputError(f"weight vector must have length {features.n_neurons}")
    if not np.isfinite(w).all():
        raise InputError("weight vector must be finite")
    if w[features.neuron] != 0.0:
        raise InputError("self-weight must be zero")
    return w


def log_likelihood(features: FeatureSet, w) -> float:
    """Rescaled per-neuron log-likelihood, including the reset -log 2 terms."""
    w = _check_weights(features, w)
    eta = features.z @ w
    gated = features.gate == 1.0
    ll = float(
        features.labels[gated] @ eta[gated] - softplus(eta[gated]).sum()
    )
    ll -= LOG2 * float((~gated).sum())
    return ll / features.horizon


def log_likelihood_derivatives(features: FeatureSet, w):
    """Gradient and Hessian of the rescaled log-likelihood at w.

    The Hessian is negative semidefinite everywhere (concave objective).
    Row/column ``neuron`` is zero because the self-feature column is.
    """
    w = _check_weights(features, w)
    eta = features.z @ w
    p = sigmoid(eta)
    grad = features.z.T @ (features.labels - p) / features.horizon
    wz = features.z * (p * (1.0 - p))[:, None]
    hess = -(features.z.T @ wz) / features.horizon
    return grad, hess


@dataclass(frozen=True)
class FitOptions:
    tol: float = 1e-8
    max_iter: int = 200
    box: float = 30.0

    def __post_init__(self):
        if self.tol <= 0 or self.max_iter < 1 or self.box <= 0:
            raise InputError("need tol > 0, max_iter >= 1, box > 0")


@dataclass(frozen=True)
class FitResult:
    """One fitted weight column with optimizer diagnostics.

    ``support`` lists the presynaptic indices that were free during the
    fit; all other coordinates (including the neuron itself) are exactly
    zero.  ``support=None`` means the unrestricted fit over all j != i.
    """

    neuron: int
    weights: np.ndarray
    converged: bool
    iterations: int
    final_grad_norm: float
    hit_bound: bool
    log_lik: float
    support: frozenset | None = None

    def presynaptic_set(self, n: int) -> frozenset:
        if self.support is None:
            return frozenset(j for j in range(n) if j != self.neuron)
        return self.support


def fit_neuron(
    sample: SpikeSample,
    i: int,
    opts: FitOptions = FitOptions(),
    support=None,
    warm_start=None,
    features: FeatureSet | None = None,
) -> FitResult:
    """Maximize the per-neuron likelihood over the box {|w_j| <= B, w_i = 0}.

    ``support`` restricts the free coordinates to a subset of presynaptic
    indices (everything else pinned at zero), which is how leave-one-out
    refits are expressed.  ``warm_start`` seeds the iteration; the default
    start is the zero vector.  Passing a prebuilt ``features`` object
    avoids recomputing it across refits of the same neuron.
    """
    feats = features if features is not None else build_features(sample, i)
    n, t_len = feats.n_neurons, feats.horizon
    if t_len < n:
        warnings.warn(
            f"horizon T={t_len} below the number of neurons N={n}; "
            "estimates will be unstable",
            stacklevel=2,
        )
    if support is None:
        free = np.array([j != i for j in range(n)])
        support_out = None
    else:
        support_set = frozenset(int(j) for j in support)
        if i in support_set:
            raise InputError("support must not contain the fitted neuron")
        if not all(0 <= j < n for j in support_set):
            raise InputError("support index out of range")
        free = np.zeros(n, dtype=bool)
        free[list(support_set)] = True
        support_out = support_set

    w = np.zeros(n)
    if warm_start is not None:
        w[free] = np.clip(np.asarray(warm_start, dtype=np.float64)[free],
                          -opts.box, opts.box)

    gated = feats.gate == 1.0
    zg = feats.z[gated][:, free]
    yg = feats.labels[gated]
    n_reset = int((~gated).sum())
    nf = int(free.sum())

    def value(wf):
        eta = zg @ wf
        return float(yg @ eta - softplus(eta).sum()) - LOG2 * n_reset

    wf = w[free]
    fval = value(wf)
    if not np.isfinite(fval):
        raise OptimizerError("non-finite likelihood at the starting point", neuron=i)

    converged = False
    iterations = 0
    grad_norm = np.inf
    stalled = 0
    for iterations in range(opts.max_iter + 1):
        eta = zg @ wf
        p = sigmoid(eta)
        grad = zg.T @ (yg - p)
        grad_norm = _pgn(wf, grad, opts.box) / t_len
        if grad_norm <= opts.tol:
            converged = True
            break
        if iterations == opts.max_iter or stalled >= 3:
            break
        curv = p * (1.0 - p)
        hess = (zg * curv[:, None]).T @ zg
        # Active-set reduction: coordinates pinned at the box with an
        # outward gradient are frozen this iteration, so the Newton step
        # is not polluted by directions the projection will cancel.
        active = ~(((wf >= opts.box) & (grad > 0)) | ((wf <= -opts.box) & (grad < 0)))
        accepted = _ascend(
            wf, fval, grad, hess, int(active.sum()), opts.box, value, active
        )
        if accepted is None:
            # Every direction down to steepest ascent failed the line
            # search: the objective is flat to float resolution here.
            break
        gain = accepted[1] - fval
        wf, fval = accepted
        if not np.isfinite(fval):
            raise OptimizerError("likelihood became non-finite", neuron=i)
        # Heavily saturated fits (runaway directions pinned at the box)
        # can otherwise churn for the whole budget on gains at float
        # resolution; a converging Newton never produces several such
        # steps in a row without then meeting the gradient criterion.
        if gain <= 1e-11 * (1.0 + abs(fval)):
            stalled += 1
        else:
            stalled = 0

    w = np.zeros(n)
    w[free] = wf
    return FitResult(
        neuron=i,
        weights=w,
        converged=converged,
        iterations=iterations,
        final_grad_norm=grad_norm,
        hit_bound=bool(np.any(np.abs(wf) >= opts.box)),
        log_lik=fval / t_len,
        support=support_out,
    )


def _pgn(wf, grad, box):
    g = grad.copy()
    g[(wf >= box) & (g > 0)] = 0.0
    g[(wf <= -box) & (g < 0)] = 0.0
    return float(np.abs(g).max()) if g.size else 0.0


def _backtrack(wf, fval, grad, step, box, value):
    """Armijo line search on the box-projected step; None when it fails."""
    alpha = 1.0
    for _ in range(40):
        cand = np.clip(wf + alpha * step, -box, box)
        move = cand - wf
        gain = float(grad @ move)
        if gain <= 0.0:
            return None
        cval = value(cand)
        if np.isfinite(cval) and cval >= fval + 1e-4 * gain:
            return cand, cval
        alpha *= 0.5
    return None


def _ascend(wf, fval, grad, hess, nf, box, value, active=None):
    """One damped Newton step with progressively ridged retries.

    Near-singular curvature (heavily saturated bins) can make the raw
    Newton direction enormous along flat directions, which then fails the
    line search; escalating the ridge pulls the direction toward steepest
    ascent until a step is accepted.  ``active`` masks the coordinates the
    step may move.  Returns (w, value) or None when even the gradient
    direction cannot improve the objective.
    """
    if nf == 0:
        return None
    if active is None:
        active = np.ones(grad.shape[0], dtype=bool)
    g = grad[active]
    h = hess[np.ix_(active, active)]
    scale = max(float(np.trace(h)) / nf, 1e-300)

    def embed(d_active):
        d = np.zeros(grad.shape[0])
        d[active] = d_active
        return d

    for ridge in (0.0, 1e-8, 1e-4, 1e-1, 1e2):
        try:
            d = np.linalg.solve(h + ridge * scale * np.eye(nf), g)
        except np.linalg.LinAlgError:
            continue
        if not np.isfinite(d).all() or float(g @ d) <= 0.0:
            continue
        hit = _backtrack(wf, fval, grad, embed(d), box, value)
        if hit is not None:
            return hit
    return _backtrack(wf, fval, grad, embed(g / scale), box, value)


def fit_network(sample: SpikeSample, opts: FitOptions = FitOptions()):
    """Fit every column independently; returns (WeightMatrix, [FitResult])."""
    n = sample.n_neurons
    results = [fit_neuron(sample, i, opts) for i in range(n)]
    w = np.zeros((n, n))
    for res in results:
        w[:, res.neuron] = res.weights
    return WeightMatrix(w), results


def network_log_likelihood(sample: SpikeSample, w: WeightMatrix) -> float:
    """Full-network rescaled log-likelihood, the sum of per-neuron terms."""
    total = 0.0
    for i in range(sample.n_neurons):
        feats = build_features(sample, i)
        total += log_likelihood(feats, w.weights[:, i])
    return total


# ---------------------------------------------------------------------------
# Context-count representation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContextCounts:
    """Occurrence counts keyed by canonical context encoding.

    A context for neuron i is the pair (elapsed time since i's last spike,
    the other neurons' spike pattern over that window).  The key packs the
    elapsed time as a little-endian u16 followed by the (elapsed-1) x (N-1)
    pattern bit-packed row-major (MSB first), rows in time order and
    columns in ascending neuron order with i removed.  Values are
    (count of follow-up 0, count of follow-up 1).
    """

    neuron: int
    n_neurons: int
    counts: dict = field(default_factory=dict)

    def total(self) -> int:
        return sum(a + b for a, b in self.counts.values())

    @staticmethod
    def encode(elapsed: int, pattern: np.ndarray) -> bytes:
        key = int(elapsed).to_bytes(2, "little")
        if pattern.size:
            key += np.packbits(pattern.astype(np.uint8).ravel()).tobytes()
        return key

    def decode(self, key: bytes):
        elapsed = int.from_bytes(key[:2], "little")
        rows, cols = elapsed - 1, self.n_neurons - 1
        bits = np.unpackbits(
            np.frombuffer(key[2:], dtype=np.uint8), count=rows * cols
        )
        return elapsed, bits.reshape(rows, cols)


def context_counts(sample: SpikeSample, i: int) -> ContextCounts:
    """Tally contexts over t = 1..T; totals always reconcile with T."""
    feats = build_features(sample, i)
    x = sample.data
    k = sample.memory_cap
    others = [j for j in range(sample.n_neurons) if j != i]
    counts: dict = {}
    for t0 in range(feats.horizon):
        ell = int(feats.elapsed[t0])
        r = k + t0
        pattern = x[np.ix_(others, range(r - ell + 1, r))].T
        key = ContextCounts.encode(ell, pattern)
        pair = counts.setdefault(key, [0, 0])
        pair[int(feats.labels[t0])] += 1
    return ContextCounts(
        i, sample.n_neurons, {key: tuple(v) for key, v in counts.items()}
    )


def context_log_likelihood(ctx: ContextCounts, w) -> float:
    """Likelihood recomputed from context counts alone.

    Equals ``log_likelihood`` on the originating sample for the same w,
    which is the algebraic identity the tests pin down.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (ctx.n_neurons,):
        raise InputError(f"weight vector must have length {ctx.n_neurons}")
    others = [j for j in range(ctx.n_neurons) if j != ctx.neuron]
    total = 0
    ll = 0.0
    for key, (n0, n1) in ctx.counts.items():
        elapsed, pattern = ctx.decode(key)
        if elapsed == 1:
            p1 = 0.5
        else:
            counts_j = pattern.sum(axis=0).astype(np.float64)
            v = float(w[others] @ counts_j) * 2.0 ** -(elapsed - 1)
            p1 = float(sigmoid(v))
        if n1:
            ll += n1 * np.log(p1)
        if n0:
            ll += n0 * np.log1p(-p1)
        total += n0 + n1
    return ll / total
