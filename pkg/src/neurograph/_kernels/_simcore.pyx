# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled inner loop of the spike-chain simulator.

The recursion is inherently sequential in time (each bin's draws feed the
next bin's potentials), so it cannot be vectorized; this kernel keeps the
per-step state update in C.  Semantics are identical to
``neurograph._kernels.pykernels.simulate_chain``.
"""

from libc.math cimport exp, ldexp

import numpy as np

cimport numpy as cnp


def simulate_chain(
    cnp.uint8_t[:, ::1] data,
    double[:, ::1] weights,
    double[:, ::1] uniforms,
    int memory_cap,
    long long[::1] elapsed,
    double[:, ::1] counts,
):
    """Fill columns K..K+T-1 of ``data`` in place.

    ``elapsed[i]`` is t - L_i at the first generated bin and ``counts[i, j]``
    the number of spikes of j in (L_i, t-1]; both are updated in place and
    hold the state one past the final bin on return.
    """
    cdef Py_ssize_t n = data.shape[0]
    cdef Py_ssize_t total = data.shape[1]
    cdef Py_ssize_t k = memory_cap
    cdef Py_ssize_t t_steps = uniforms.shape[0]
    cdef Py_ssize_t r, i, j, step
    cdef double acc, v, p, ev
    cdef cnp.uint8_t x

    if total != k + t_steps:
        raise ValueError("data width must equal memory_cap + horizon")

    for step in range(t_steps):
        r = k + step
        # Draw every neuron from the realized past, then update state.
        for i in range(n):
            if elapsed[i] == 1:
                v = 0.0
            else:
                acc = 0.0
                for j in range(n):
                    acc += weights[j, i] * counts[i, j]
                v = ldexp(acc, -(<int>elapsed[i] - 1))
            if v >= 0.0:
                p = 1.0 / (1.0 + exp(-v))
            else:
                ev = exp(v)
                p = ev / (1.0 + ev)
            data[i, r] = 1 if uniforms[step, i] < p else 0
        for i in range(n):
            if data[i, r] == 1:
                elapsed[i] = 1
                for j in range(n):
                    counts[i, j] = 0.0
            else:
                if elapsed[i] == k:
                    # Memory cap reached: the window slides one bin forward.
                    for j in range(n):
                        counts[i, j] += data[j, r] - data[j, r - k + 1]
                else:
                    elapsed[i] += 1
                    for j in range(n):
                        counts[i, j] += data[j, r]
