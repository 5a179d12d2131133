"""Conversion of spike-timestamp recordings into binned spike samples.

Input is either a single CSV of (neuron_id, time_s) rows or one plain-text
file of timestamps per neuron.  Binning uses half-open, left-closed
intervals of ``bin_ms`` milliseconds; multiple spikes in a bin collapse to
a single 1 (the collapse count is logged so the user can judge the bin
width).

The binned matrix is split into an initial past of exactly K bins and an
observed horizon: t = 1 is placed at the first bin whose trailing K bins
contain at least one spike of every neuron.  When the recording cannot
supply such a past, the past is left-padded with zeros, neurons still
missing a spike get a virtual one at the pad boundary, and the sample is
flagged ``virtual_past``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError
from .model import SpikeSample

__all__ = [
    "TimestampSet",
    "parse_timestamps",
    "bin_spikes",
    "firing_rates",
    "bin_centers",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TimestampSet:
    """Per-neuron sorted spike times (seconds) within a recording span."""

    times: tuple
    t_start: float
    t_end: float

    def __post_init__(self):
        if self.t_end < self.t_start:
            raise InputError("recording span is empty")
        for i, arr in enumerate(self.times):
            if arr.size == 0:
                raise InputError(f"neuron {i} has no spikes")
            if arr[0] < self.t_start or arr[-1] > self.t_end:
                raise InputError(f"neuron {i} has spikes outside the span")

    @property
    def n_neurons(self) -> int:
        return len(self.times)

    def duration(self) -> float:
        return self.t_end - self.t_start

    def rates_hz(self) -> np.ndarray:
        """Spike count divided by span duration, per neuron."""
        dur = self.duration()
        if dur <= 0:
            raise InputError("cannot compute rates over an empty span")
        return np.array([len(t) / dur for t in self.times])


def _finalize(per_neuron: dict, span) -> TimestampSet:
    if not per_neuron:
        raise InputError("no spikes found in input")
    n = max(per_neuron) + 1
    times = []
    for i in range(n):
        raw = per_neuron.get(i)
        if raw is None or not raw:
            raise InputError(f"neuron {i} has no spikes")
        arr = np.asarray(raw, dtype=np.float64)
        if np.any(np.diff(arr) < 0):
            log.info("neuron %d timestamps were unsorted; sorting", i)
            arr = np.sort(arr)
        uniq = np.unique(arr)
        if uniq.size < arr.size:
            log.warning(
                "neuron %d: dropped %d duplicate timestamps", i, arr.size - uniq.size
            )
        times.append(uniq)
    if span is None:
        span = (0.0, max(float(t[-1]) for t in times))
    return TimestampSet(tuple(times), float(span[0]), float(span[1]))


def parse_timestamps(path, span=None) -> TimestampSet:
    """Read timestamps from a CSV file or a directory of per-neuron files.

    CSV rows are ``neuron_id,time_s``; a header row is skipped if present.
    A directory is read as one text file per neuron, sorted by filename,
    one timestamp per line.  The span defaults to [0, max spike time].
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"no such file: {path}")
    per_neuron: dict = {}
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.is_file())
        if not files:
            raise InputError(f"{path} contains no files")
        for i, f in enumerate(files):
            per_neuron[i] = _parse_column(f)
    else:
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                parts = line.replace(",", " ").split()
                if len(parts) != 2:
                    raise InputError(f"{path}:{lineno}: expected 'neuron_id,time_s'")
                try:
                    neuron = int(parts[0])
                    t = float(parts[1])
                except ValueError:
                    if lineno == 1:
                        continue  # header row
                    raise InputError(
                        f"{path}:{lineno}: cannot parse {line!r}"
                    ) from None
                if neuron < 0:
                    raise InputError(f"{path}:{lineno}: negative neuron id")
                per_neuron.setdefault(neuron, []).append(t)
    return _finalize(per_neuron, span)


def _parse_column(path: Path):
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(float(line))
            except ValueError:
                raise InputError(f"{path}:{lineno}: cannot parse {line!r}") from None
    return out


def bin_spikes(ts: TimestampSet, bin_ms: float, memory_cap: int) -> SpikeSample:
    """Bin a timestamp set and split it into initial past plus horizon."""
    if bin_ms <= 0:
        raise InputError("bin width must be positive")
    if memory_cap < 1:
        raise InputError("memory cap K must be >= 1")
    width = bin_ms / 1000.0
    n_bins = int(np.floor((ts.t_end - ts.t_start) / width)) + 1
    if n_bins < memory_cap + 2:
        raise InputError(
            f"recording spans only {n_bins} bins; need at least K+2={memory_cap + 2}"
        )
    n = ts.n_neurons
    binned = np.zeros((n, n_bins), dtype=np.uint8)
    collapsed = 0
    for i, times in enumerate(ts.times):
        cols = np.floor((times - ts.t_start) / width).astype(np.int64)
        cols = np.clip(cols, 0, n_bins - 1)
        uniq = np.unique(cols)
        collapsed += cols.size - uniq.size
        binned[i, uniq] = 1
    if collapsed:
        log.warning(
            "%d spikes collapsed into occupied bins; consider a smaller bin width",
            collapsed,
        )

    start, virtual = _choose_start(binned, memory_cap)
    k = memory_cap
    data = np.zeros((n, k + (n_bins - start)), dtype=np.uint8)
    past_lo = max(0, start - k)
    data[:, k - (start - past_lo) : k] = binned[:, past_lo:start]
    data[:, k:] = binned[:, start:]
    flagged = start < k or bool(virtual)
    for i in virtual:
        data[i, k - start - 1 if start < k else 0] = 1
    return SpikeSample(data, k, virtual_past=flagged)


def _choose_start(binned: np.ndarray, k: int):
    """First bin whose trailing-K window covers every neuron, plus the
    neurons needing a virtual spike when no such bin exists."""
    n, n_bins = binned.shape
    cum = np.zeros((n, n_bins + 1), dtype=np.int64)
    np.cumsum(binned, axis=1, out=cum[:, 1:])
    for start in range(1, n_bins - 1):
        lo = max(0, start - k)
        if np.all(cum[:, start] - cum[:, lo] > 0):
            return start, []
    # No admissible split: anchor the past at K bins (or as many as exist)
    # and patch the silent neurons.
    start = min(k, n_bins - 2)
    lo = max(0, start - k)
    virtual = [i for i in range(n) if cum[i, start] - cum[i, lo] == 0]
    log.warning(
        "no trailing-%d window covers all neurons; adding virtual spikes for %s",
        k,
        virtual,
    )
    return start, virtual


def bin_centers(sample: SpikeSample, bin_ms: float, t_start: float = 0.0):
    """Bin-center spike times (seconds) of a binned sample, per neuron.

    Re-binning these times at the same width reproduces the sample, which
    is the round-trip property the tests exercise.
    """
    width = bin_ms / 1000.0
    out = []
    for row in sample.data:
        cols = np.flatnonzero(row)
        out.append(t_start + (cols + 0.5) * width)
    return out


def firing_rates(ts: TimestampSet) -> np.ndarray:
    """Alias for TimestampSet.rates_hz, for symmetry with the circuit module."""
    return ts.rates_hz()
