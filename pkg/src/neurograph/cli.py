"""Command-line entry point.

Subcommands: simulate | estimate | select | experiment | ingest | lif.
Every run writes a manifest recording parameters, seed, package versions
and wall time; reruns with the same manifest parameters produce
byte-identical outputs.  Exit codes: 0 success, 1 input error,
2 numerical/optimizer failure.

Flag values take precedence over a JSON/TOML config file passed with
--config, which in turn overrides built-in defaults.  NEUROGRAPH_THREADS
caps the experiment worker pool.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import BACKEND
from .errors import InputError, IntegrationError, OptimizerError
from .estimate import FitOptions, fit_network
from .experiments import (
    DEFAULT_EPSILON_GRID,
    DEFAULT_MEMORY_CAP,
    DEFAULT_T_GRID,
    make_scenario,
    scenario_matrix,
    timed_monte_carlo,
)
from .ingest import bin_spikes, parse_timestamps
from .lif import LifParams, build_microcircuit, firing_rates, simulate_lif
from .sampleio import (
    read_matrix_csv,
    read_sample,
    write_matrix_csv,
    write_sample,
)
from .selection import epsilon_from_alpha, sensitivity_matrix
from .simulate import SimConfig, simulate

log = logging.getLogger("neurograph")


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the contract here is exit 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise InputError(message)


def _manifest_path(out: Path) -> Path:
    if out.suffix:  # single-file output
        return out.with_name(out.name + ".manifest.json")
    return out / "manifest.json"


def _write_manifest(out: Path, command: str, params: dict, started: float) -> None:
    manifest = {
        "command": command,
        "parameters": params,
        "versions": {
            "neurograph": __version__,
            "numpy": np.__version__,
            "backend": BACKEND,
        },
        "wall_time_s": round(time.perf_counter() - started, 6),
    }
    path = _manifest_path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2) + "\n")


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise InputError(f"no such config file: {p}")
    if p.suffix == ".toml":
        import tomllib

        return tomllib.loads(p.read_text())
    return json.loads(p.read_text())


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) is None:
            raise InputError(f"missing required option --{name.replace('_', '-')}")


def _weights_from_args(args) -> "np.ndarray":
    if args.weights is not None and args.scenario is not None:
        raise InputError("pass either --weights or --scenario, not both")
    if args.weights is not None:
        return read_matrix_csv(args.weights)
    if args.scenario is not None:
        return scenario_matrix(args.scenario, args.seed)
    raise InputError("need --weights FILE or --scenario ID")


def _check_memory_cap(sample, flag_k):
    if flag_k is not None and flag_k != sample.memory_cap:
        raise InputError(
            f"--K {flag_k} disagrees with the sample's memory cap "
            f"{sample.memory_cap}"
        )


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------

def _cmd_simulate(args):
    _require(args, "T", "out")
    started = time.perf_counter()
    w = _weights_from_args(args)
    cfg = SimConfig(horizon=args.T, memory_cap=args.K, seed=args.seed)
    sample = simulate(w, cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_sample(sample, out, args.format)
    _write_manifest(
        out,
        "simulate",
        {
            "scenario": args.scenario,
            "weights": args.weights,
            "T": args.T,
            "K": args.K,
            "seed": args.seed,
            "format": args.format or ("csv" if out.suffix == ".csv" else "bin"),
            "out": str(out),
        },
        started,
    )
    log.info("wrote %s (N=%d, K=%d, T=%d)", out, sample.n_neurons, args.K, args.T)
    return 0


def _cmd_estimate(args):
    _require(args, "input", "out")
    started = time.perf_counter()
    sample = read_sample(args.input)
    _check_memory_cap(sample, args.K)
    opts = FitOptions(tol=args.tol, box=args.box, max_iter=args.max_iter)
    w_hat, fits = fit_network(sample, opts)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(w_hat, out)
    diag = {
        "fits": [
            {
                "neuron": f.neuron,
                "converged": f.converged,
                "iterations": f.iterations,
                "final_grad_norm": f.final_grad_norm,
                "hit_bound": f.hit_bound,
                "log_lik": f.log_lik,
                "weights": [float(v) for v in f.weights],
            }
            for f in fits
        ]
    }
    out.with_suffix(".json").write_text(json.dumps(diag, indent=2) + "\n")
    _write_manifest(
        out,
        "estimate",
        {
            "input": str(args.input),
            "K": sample.memory_cap,
            "tol": args.tol,
            "box": args.box,
            "max_iter": args.max_iter,
            "out": str(out),
        },
        started,
    )
    log.info("wrote %s and %s", out, out.with_suffix(".json"))
    return 0


def _cmd_select(args):
    _require(args, "input", "out")
    started = time.perf_counter()
    sample = read_sample(args.input)
    _check_memory_cap(sample, args.K)
    if args.epsilon is None and args.alpha is None:
        raise InputError("need --epsilon or --alpha")
    epsilon = args.epsilon
    if epsilon is None:
        epsilon = epsilon_from_alpha(args.alpha, sample.horizon)
        log.info("alpha=%g gives epsilon=%g at T=%d", args.alpha, epsilon,
                 sample.horizon)
    opts = FitOptions(tol=args.tol, box=args.box)
    d_mat, _ = sensitivity_matrix(sample, opts)
    graph = (d_mat > epsilon).astype(np.uint8)
    np.fill_diagonal(graph, 0)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(graph, out, fmt="%d")
    if args.sensitivities:
        write_matrix_csv(d_mat, Path(args.sensitivities))
    _write_manifest(
        out,
        "select",
        {
            "input": str(args.input),
            "K": sample.memory_cap,
            "epsilon": epsilon,
            "alpha": args.alpha,
            "tol": args.tol,
            "box": args.box,
            "out": str(out),
            "sensitivities": args.sensitivities,
        },
        started,
    )
    log.info("wrote %s (epsilon=%g)", out, epsilon)
    return 0


def _cmd_experiment(args):
    _require(args, "scenario", "out")
    spec = make_scenario(
        args.scenario,
        base_seed=args.seed,
        replicas=args.replicas,
        memory_cap=args.K,
        t_grid=tuple(args.T) if args.T else DEFAULT_T_GRID,
        epsilon_grid=tuple(args.epsilon) if args.epsilon else DEFAULT_EPSILON_GRID,
    )
    outdir = Path(args.out)
    timed_monte_carlo(spec, outdir, workers=args.workers)
    log.info("wrote experiment tables to %s", outdir)
    return 0


def _cmd_ingest(args):
    _require(args, "input", "out")
    started = time.perf_counter()
    ts = parse_timestamps(args.input)
    rates = ", ".join(f"{r:.2f}" for r in ts.rates_hz())
    log.info("parsed %d neurons; firing rates %s Hz", ts.n_neurons, rates)
    sample = bin_spikes(ts, args.bin_ms, args.K)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_sample(sample, out, args.format)
    _write_manifest(
        out,
        "ingest",
        {
            "input": str(args.input),
            "bin_ms": args.bin_ms,
            "K": args.K,
            "out": str(out),
            "virtual_past": sample.virtual_past,
            "horizon": sample.horizon,
        },
        started,
    )
    log.info("wrote %s (T=%d, virtual_past=%s)", out, sample.horizon,
             sample.virtual_past)
    return 0


def _cmd_lif(args):
    _require(args, "weights", "out")
    started = time.perf_counter()
    w_hat = read_matrix_csv(args.weights)
    params = LifParams(
        dt=args.dt_ms,
        duration=args.duration_ms,
        drive_rate_hz=args.drive_hz,
        drive_weight=args.drive_weight,
        conductance_scale=args.conductance_scale,
    )
    circuit = build_microcircuit(w_hat, params)
    trace = simulate_lif(circuit, params, seed=args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    steps = trace.voltages.shape[0]
    times = (np.arange(1, steps + 1) * params.dt)[:, None]
    header = "time_ms," + ",".join(f"v{i}_mV" for i in range(trace.n_neurons))
    np.savetxt(
        out,
        np.hstack([times, trace.voltages]),
        fmt="%.6f",
        delimiter=",",
        header=header,
        comments="",
    )
    spikes_out = Path(args.spikes_out) if args.spikes_out else out.with_name(
        out.stem + "_spikes.csv"
    )
    with open(spikes_out, "w") as fh:
        fh.write("neuron,time_ms\n")
        for i, st in enumerate(trace.spike_times):
            for t_ms in st:
                fh.write(f"{i},{t_ms:.6f}\n")
    rates = firing_rates(trace)
    _write_manifest(
        out,
        "lif",
        {
            "weights": str(args.weights),
            "duration_ms": args.duration_ms,
            "dt_ms": args.dt_ms,
            "drive_hz": args.drive_hz,
            "drive_weight": args.drive_weight,
            "conductance_scale": args.conductance_scale,
            "seed": args.seed,
            "out": str(out),
            "spikes_out": str(spikes_out),
            "rates_hz": [round(float(r), 4) for r in rates],
        },
        started,
    )
    log.info("wrote %s, %s; rates %s Hz", out, spikes_out,
             ", ".join(f"{r:.2f}" for r in rates))
    return 0


# ---------------------------------------------------------------------------
# Parser assembly
# ---------------------------------------------------------------------------

def build_parser(config: dict | None = None) -> _Parser:
    """Assemble the argument parser.

    ``config`` entries (flag names, dashes or underscores) become parser
    defaults, so explicit flags still win over the config file which in
    turn wins over built-in defaults.
    """
    defaults = {
        k.replace("-", "_"): v for k, v in (config or {}).items()
    }

    created = []

    def _new(sub, *a, **kw):
        q = sub.add_parser(*a, **kw)
        created.append(q)
        return q

    parser = _Parser(
        prog="neurograph",
        description=(
            "Simulate, estimate and select interaction graphs of "
            "stochastic neurons with variable-length memory."
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--log-level", default="INFO",
                        help="logging level (DEBUG, INFO, WARNING, ...)")
    parser.add_argument("--config", default=None,
                        help="JSON or TOML file with default flag values")
    sub = parser.add_subparsers(dest="command", required=True)

    p = _new(sub, "simulate", help="generate a spike sample")
    p.add_argument("--scenario", type=int, choices=(1, 2, 3, 4),
                   help="built-in weight matrix")
    p.add_argument("--weights", help="CSV weight matrix instead of a scenario")
    p.add_argument("--T", type=int, default=None, help="observed bins")
    p.add_argument("--K", type=int, default=DEFAULT_MEMORY_CAP,
                   help="memory cap in bins")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("csv", "bin"), default=None,
                   help="container (default: by file suffix)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_simulate)

    p = _new(sub, "estimate", help="fit the weight matrix from a sample")
    p.add_argument("--input", default=None, help="sample file (csv or bin)")
    p.add_argument("--K", type=int, default=None,
                   help="validate the sample's memory cap")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--box", type=float, default=30.0)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--out", default=None, help="output CSV matrix")
    p.set_defaults(func=_cmd_estimate)

    p = _new(sub, "select", help="estimate the interaction graph")
    p.add_argument("--input", default=None)
    p.add_argument("--K", type=int, default=None)
    p.add_argument("--epsilon", type=float, default=None,
                   help="sensitivity threshold")
    p.add_argument("--alpha", type=float, default=None,
                   help="derive epsilon from a significance level")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--box", type=float, default=30.0)
    p.add_argument("--out", default=None, help="0/1 adjacency CSV")
    p.add_argument("--sensitivities", default=None,
                   help="also write the raw sensitivity matrix")
    p.set_defaults(func=_cmd_select)

    p = _new(sub, "experiment", help="run a Monte Carlo scenario")
    p.add_argument("--scenario", type=int, default=None, choices=(1, 2, 3, 4))
    p.add_argument("--replicas", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--K", type=int, default=DEFAULT_MEMORY_CAP)
    p.add_argument("--T", type=int, nargs="*", default=None,
                   help="horizon grid (default 500 1000 5000 10000)")
    p.add_argument("--epsilon", type=float, nargs="*", default=None,
                   help="threshold grid (default 1e-5 1e-4 1e-3 1e-2)")
    p.add_argument("--workers", type=int, default=None,
                   help="process pool size (default: NEUROGRAPH_THREADS or CPUs)")
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(func=_cmd_experiment)

    p = _new(sub, "ingest", help="bin spike timestamps into a sample")
    p.add_argument("--input", default=None,
                   help="CSV of neuron_id,time_s or a directory of per-neuron files")
    p.add_argument("--bin-ms", type=float, default=1.0)
    p.add_argument("--K", type=int, default=DEFAULT_MEMORY_CAP)
    p.add_argument("--format", choices=("csv", "bin"), default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_ingest)

    p = _new(sub, "lif", help="replay a weight matrix through a LIF circuit")
    p.add_argument("--weights", default=None, help="CSV weight matrix")
    p.add_argument("--duration-ms", type=float, default=2000.0)
    p.add_argument("--dt-ms", type=float, default=0.1)
    p.add_argument("--drive-hz", type=float, default=800.0)
    p.add_argument("--drive-weight", type=float, default=0.6)
    p.add_argument("--conductance-scale", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="voltage trace CSV")
    p.add_argument("--spikes-out", default=None,
                   help="spike list CSV (default: <out stem>_spikes.csv)")
    p.set_defaults(func=_cmd_lif)

    # applied last so it overrides the per-argument defaults above
    if defaults:
        parser.set_defaults(**defaults)
        for q in created:
            q.set_defaults(**defaults)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        boot = argparse.ArgumentParser(add_help=False)
        boot.add_argument("--config", default=None)
        pre, _ = boot.parse_known_args(argv)
        config = _load_config(pre.config)
        parser = build_parser(config)
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=getattr(logging, str(args.log_level).upper(), logging.INFO),
            format="%(levelname)s %(name)s: %(message)s",
        )
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OptimizerError, IntegrationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
