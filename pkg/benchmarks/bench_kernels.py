"""Benchmark the compiled simulator kernel against the numpy fallback.

Run:  python benchmarks/bench_kernels.py [--repeats 5]

Both backends consume identical pre-drawn uniforms, so their outputs are
checked for equality while timing only the recursion itself.
"""

import argparse
import time

import numpy as np

from neurograph._kernels import pykernels
from neurograph.experiments import scenario_matrix
from neurograph.model import WeightMatrix
from neurograph.simulate import _initial_state, admissible_initial_past, rng_for

try:
    from neurograph._kernels import _simcore
except ImportError:
    _simcore = None


def setup(w, k, t, seed):
    n = w.n_neurons
    rng = rng_for(seed)
    data = np.zeros((n, k + t), dtype=np.uint8)
    data[:, :k] = admissible_initial_past(n, k)
    uniforms = rng.random((t, n))
    return data, uniforms


def run(kernel, w, k, t, seed, repeats):
    best = np.inf
    out = None
    for _ in range(repeats):
        data, uniforms = setup(w, k, t, seed)
        elapsed, counts = _initial_state(data, k)
        t0 = time.perf_counter()
        kernel(data, w.weights, uniforms, k, elapsed, counts)
        best = min(best, time.perf_counter() - t0)
        out = data
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    w_random = rng.normal(scale=0.5, size=(40, 40))
    np.fill_diagonal(w_random, 0.0)
    cases = [
        ("scenario-1 microcircuit (N=5)", scenario_matrix(1), 50, 100_000),
        ("scenario-4 sparse net  (N=20)", scenario_matrix(4), 50, 20_000),
        ("dense random          (N=40)", WeightMatrix(w_random), 50, 10_000),
    ]

    print(f"{'case':<32} {'T':>8} {'python':>10} {'cython':>10} {'speedup':>8}")
    for name, w, k, t in cases:
        py_time, py_out = run(pykernels.simulate_chain, w, k, t, 7, args.repeats)
        if _simcore is None:
            print(f"{name:<32} {t:>8} {py_time * 1e3:>8.1f}ms {'n/a':>10} {'n/a':>8}")
            continue
        cy_time, cy_out = run(_simcore.simulate_chain, w, k, t, 7, args.repeats)
        match = "ok" if np.array_equal(py_out, cy_out) else "MISMATCH"
        print(
            f"{name:<32} {t:>8} {py_time * 1e3:>8.1f}ms {cy_time * 1e3:>8.1f}ms"
            f" {py_time / cy_time:>7.1f}x  [{match}]"
        )


if __name__ == "__main__":
    main()
