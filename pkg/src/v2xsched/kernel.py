"""Deterministic discrete-event core: integer-microsecond clock, event queue, RNG streams."""

from __future__ import annotations

import hashlib
import heapq
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

# All simulation times are integer microseconds.  The 13 us MAC slot, the
# 100 ms windows and the 500 us jitter are exact multiples, so no float drift.
US = 1
MS = 1_000
SEC = 1_000_000

# Fixed substream ids so adding a stream never perturbs the draws of others.
_STREAM_IDS = {
    "mobility": 1,
    "mac": 2,
    "traffic": 3,
    "training": 4,
}


class KernelError(Exception):
    """Scheduling logic errors (events in the past, ...)."""


@dataclass(frozen=True)
class SimEvent:
    """Public record of a dispatched event, used for trace digests."""

    time: int
    sequence: int
    kind: str
    target: int | str | None


class EventHandle:
    """Cancellation handle for a scheduled event."""

    __slots__ = ("entry",)

    def __init__(self, entry: list):
        self.entry = entry

    @property
    def cancelled(self) -> bool:
        return self.entry[5]


class Kernel:
    """Single-threaded event queue with a strict (time, sequence) dispatch order."""

    def __init__(self, record_digest: bool = False):
        self.now: int = 0
        self._heap: list[list] = []
        self._seq = 0
        self.scheduled = 0
        self.cancelled = 0
        self.dispatched = 0
        self._digest = hashlib.sha256() if record_digest else None

    def schedule(self, time_us: int, fn, kind: str = "", target=None) -> EventHandle:
        """Schedule fn() at time_us.  Rejects times before the current clock."""
        time_us = int(time_us)
        if time_us < self.now:
            raise KernelError(
                f"event {kind!r} scheduled at {time_us} us, clock already at {self.now} us"
            )
        # entry: [time, seq, kind, target, fn, cancelled]
        entry = [time_us, self._seq, kind, target, fn, False]
        self._seq += 1
        heapq.heappush(self._heap, entry)
        self.scheduled += 1
        return EventHandle(entry)

    def cancel(self, handle: EventHandle) -> None:
        if not handle.entry[5]:
            handle.entry[5] = True
            handle.entry[4] = None
            self.cancelled += 1

    def queue_length(self) -> int:
        return sum(1 for e in self._heap if not e[5])

    def run_until(self, t_end_us: int):
        """Dispatch every pending event with time <= t_end_us; clock ends at t_end_us."""
        heap = self._heap
        while heap and heap[0][0] <= t_end_us:
            time_us, seq, kind, target, fn, dead = heapq.heappop(heap)
            if dead:
                continue
            self.now = time_us
            self.dispatched += 1
            if self._digest is not None:
                self._digest.update(
                    f"{time_us},{seq},{kind},{target};".encode()
                )
            fn()
        self.now = t_end_us
        return self.stats()

    def stats(self) -> dict:
        return {
            "scheduled": self.scheduled,
            "cancelled": self.cancelled,
            "dispatched": self.dispatched,
            "pending": self.queue_length(),
        }

    def digest(self) -> str:
        if self._digest is None:
            raise KernelError("kernel was created without record_digest")
        return self._digest.hexdigest()


def stream_seed(base_seed: int, name: str) -> np.random.SeedSequence:
    sid = _STREAM_IDS.get(name)
    if sid is None:
        sid = zlib.crc32(name.encode()) | (1 << 32)
    return np.random.SeedSequence([int(base_seed), sid])


class RngStreams:
    """Named, independently seeded substreams (mobility | mac | traffic | training)."""

    def __init__(self, base_seed: int):
        self.base_seed = int(base_seed)
        self._streams: dict[str, np.random.Generator] = {}

    def get(self, name: str) -> np.random.Generator:
        gen = self._streams.get(name)
        if gen is None:
            gen = np.random.Generator(np.random.PCG64(stream_seed(self.base_seed, name)))
            self._streams[name] = gen
        return gen

    def __getitem__(self, name: str) -> np.random.Generator:
        return self.get(name)


class ReplicationError(Exception):
    def __init__(self, run_index: int, cause: Exception):
        super().__init__(f"run {run_index} failed: {cause!r}")
        self.run_index = run_index
        self.cause = cause


def _call(fn_config_seed):
    fn, config, seed = fn_config_seed
    return fn(config, seed)


def replicate(run_fn, config, n_runs: int, base_seed: int, workers: int = 1) -> list:
    """Run run_fn(config, base_seed + i) for i in 0..n_runs-1, results ordered by i.

    Runs are independent; with workers > 1 they execute in separate processes.
    The first failing run aborts the replication and reports its index.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    jobs = [(run_fn, config, base_seed + i) for i in range(n_runs)]
    results = []
    if workers <= 1 or n_runs == 1:
        for i, job in enumerate(jobs):
            try:
                results.append(_call(job))
            except Exception as exc:  # noqa: BLE001 - report run index
                raise ReplicationError(i, exc) from exc
        return results
    with ProcessPoolExecutor(max_workers=min(workers, n_runs)) as pool:
        futures = [pool.submit(_call, job) for job in jobs]
        for i, fut in enumerate(futures):
            try:
                results.append(fut.result())
            except Exception as exc:  # noqa: BLE001
                raise ReplicationError(i, exc) from exc
    return results
