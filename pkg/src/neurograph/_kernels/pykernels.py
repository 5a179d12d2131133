"""Pure-numpy fallback for the simulator inner loop.

Kept semantically identical to the compiled kernel; both consume the same
pre-drawn uniforms, so they produce the same sample bit for bit (up to
floating-point summation order, which only matters on exact ties of the
uniform against the spiking probability).
"""

from __future__ import annotations

import numpy as np


def simulate_chain(data, weights, uniforms, memory_cap, elapsed, counts):
    """Fill columns K..K+T-1 of ``data`` in place; see the compiled twin."""
    n, total = data.shape
    k = memory_cap
    t_steps = uniforms.shape[0]
    if total != k + t_steps:
        raise ValueError("data width must equal memory_cap + horizon")

    for step in range(t_steps):
        r = k + step
        v = np.einsum("ji,ij->i", weights, counts)
        v *= np.ldexp(1.0, -(elapsed.astype(np.int64) - 1))
        v[elapsed == 1] = 0.0
        p = np.empty(n)
        pos = v >= 0
        p[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
        ev = np.exp(v[~pos])
        p[~pos] = ev / (1.0 + ev)
        x = (uniforms[step] < p).view(np.uint8)
        data[:, r] = x

        fired = x == 1
        counts[fired, :] = 0.0
        elapsed[fired] = 1
        quiet = ~fired
        at_cap = quiet & (elapsed == k)
        grow = quiet & ~at_cap
        counts[quiet, :] += x
        counts[at_cap, :] -= data[:, r - k + 1]
        elapsed[grow] += 1
