"""Shared instrumentation: phase timers, counters and log-scaled histograms.

The recording hot path must stay cheap enough that it never perturbs the
lock-wait numbers it sits next to, so samples land in per-thread append-only
buffers and all folding (reservoir, running stats) happens at flush/export
time on the caller's thread.
"""

from __future__ import annotations

import csv
import math
import random
import threading
from typing import Callable

PHASES = ("ingest_filter", "window_eval", "fact_write", "notify_dispatch", "containment")

_RESERVOIR_CAP = 8192


def _quantile_nearest_rank(ordered: list, p: float):
    rank = math.ceil(p * len(ordered))
    return ordered[max(rank, 1) - 1]


class PhaseTimer:
    """Latency samples for the five pipeline phases, in nanoseconds."""

    def __init__(self, reservoir_cap: int = _RESERVOIR_CAP):
        self._cap = reservoir_cap
        self._lock = threading.Lock()
        self._local = threading.local()
        self._buffers: list[tuple[str, list]] = []  # (phase, per-thread buffer)
        self._count = {p: 0 for p in PHASES}
        self._sum = {p: 0 for p in PHASES}
        self._max = {p: 0 for p in PHASES}
        self._reservoir = {p: [] for p in PHASES}
        self._rng = random.Random(0x5EED)

    def recorder(self, phase: str) -> Callable[[int], None]:
        """Hot-path recorder for one phase: a bare list.append on a thread-local buffer."""
        if phase not in PHASES:
            raise ValueError(f"unknown phase {phase!r}")
        buffers = getattr(self._local, "buffers", None)
        if buffers is None:
            buffers = {}
            self._local.buffers = buffers
        if phase not in buffers:
            buf: list = []
            buffers[phase] = buf
            with self._lock:
                self._buffers.append((phase, buf))
        return buffers[phase].append

    def record(self, phase: str, duration_ns: int) -> None:
        self.recorder(phase)(duration_ns)

    def flush(self) -> None:
        """Fold all per-thread buffers into the running stats and reservoirs."""
        with self._lock:
            for phase, buf in self._buffers:
                if not buf:
                    continue
                samples, buf[:] = buf[:], []
                self._fold(phase, samples)

    def _fold(self, phase: str, samples: list) -> None:
        self._count[phase] += len(samples)
        self._sum[phase] += sum(samples)
        peak = max(samples)
        if peak > self._max[phase]:
            self._max[phase] = peak
        res = self._reservoir[phase]
        for s in samples:
            if len(res) < self._cap:
                res.append(s)
            else:
                # Vitter's algorithm R over the whole folded stream
                j = self._rng.randrange(self._count[phase])
                if j < self._cap:
                    res[j] = s

    def summary(self, phase: str) -> dict:
        """count / mean / p50 / p95 / p99 / max for one phase, in microseconds."""
        if phase not in PHASES:
            raise ValueError(f"unknown phase {phase!r}")
        self.flush()
        with self._lock:
            n = self._count[phase]
            if n == 0:
                return {"count": 0, "mean": 0.0, "p50": 0.0, "p95": 0.0, "p99": 0.0, "max": 0.0}
            ordered = sorted(self._reservoir[phase])
            return {
                "count": n,
                "mean": self._sum[phase] / n / 1000.0,
                "p50": _quantile_nearest_rank(ordered, 0.50) / 1000.0,
                "p95": _quantile_nearest_rank(ordered, 0.95) / 1000.0,
                "p99": _quantile_nearest_rank(ordered, 0.99) / 1000.0,
                "max": self._max[phase] / 1000.0,
            }

    def export_csv(self, path) -> None:
        """Write one row per phase; values are microseconds."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["phase", "count", "mean", "p50", "p95", "p99", "max"])
            for phase in PHASES:
                s = self.summary(phase)
                writer.writerow(
                    [phase, s["count"], f"{s['mean']:.3f}", f"{s['p50']:.3f}",
                     f"{s['p95']:.3f}", f"{s['p99']:.3f}", f"{s['max']:.3f}"]
                )


class Histogram:
    """Log-bucketed histogram spanning 100 ns to 100 s in one structure."""

    MIN_NS = 100
    MAX_NS = 100_000_000_000
    BUCKETS_PER_DECADE = 5

    def __init__(self):
        decades = int(math.log10(self.MAX_NS / self.MIN_NS))
        self._n_buckets = decades * self.BUCKETS_PER_DECADE + 2  # under/overflow
        self._counts = [0] * self._n_buckets
        self._total = 0
        self._lock = threading.Lock()
        self._log_min = math.log10(self.MIN_NS)
        self._scale = self.BUCKETS_PER_DECADE

    def _bucket_of(self, value_ns: float) -> int:
        if value_ns < self.MIN_NS:
            return 0
        if value_ns >= self.MAX_NS:
            return self._n_buckets - 1
        return 1 + int((math.log10(value_ns) - self._log_min) * self._scale)

    def record(self, value_ns: float) -> None:
        idx = self._bucket_of(value_ns)
        with self._lock:
            self._counts[idx] += 1
            self._total += 1

    @property
    def total(self) -> int:
        return self._total

    def bucket_bounds(self, idx: int) -> tuple[float, float]:
        if idx == 0:
            return (0.0, float(self.MIN_NS))
        if idx == self._n_buckets - 1:
            return (float(self.MAX_NS), math.inf)
        lo = 10 ** (self._log_min + (idx - 1) / self._scale)
        hi = 10 ** (self._log_min + idx / self._scale)
        return (lo, hi)

    def quantile(self, q: float) -> float:
        """Approximate quantile: upper bound of the bucket holding rank ceil(q*n)."""
        if not 0 < q <= 1:
            raise ValueError("q must be in (0, 1]")
        with self._lock:
            if self._total == 0:
                raise ValueError("empty histogram")
            rank = math.ceil(q * self._total)
            seen = 0
            for idx, c in enumerate(self._counts):
                seen += c
                if seen >= rank:
                    lo, hi = self.bucket_bounds(idx)
                    return hi if hi != math.inf else lo
        raise AssertionError("unreachable")


class Counters:
    """Thread-safe named counters for one-off pipeline metrics."""

    def __init__(self):
        self._lock = threading.Lock()
        self._values: dict[str, int] = {}

    def inc(self, name: str, delta: int = 1) -> None:
        with self._lock:
            self._values[name] = self._values.get(name, 0) + delta

    def get(self, name: str) -> int:
        with self._lock:
            return self._values.get(name, 0)

    def snapshot(self) -> dict[str, int]:
        with self._lock:
            return dict(sorted(self._values.items()))
