"""
Gap stream: consecutive prime pairs, Andrica values and running averages.

The bulk path works on GapChunk arrays (one per sieve segment, stitched at the
segment boundaries). The per-record path (gap_records / running_stats /
records) yields NamedTuples and is meant for small ranges and tests.
"""
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, List, NamedTuple, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from src.config import Config
from src.errors import (
    ArgumentOrderError,
    ContiguityError,
    DomainError,
    EmptyTrackerError,
    StatsInvariantError,
)
from src.primes.sieve import SegmentPlan, nth_prime, prime_segments

logger = logging.getLogger(__name__)

EXACT_FLOAT_LIMIT = 1 << 53
SQRT2 = math.sqrt(2.0)


def sqrt_u64(values) -> np.ndarray:
    """
    Square roots of non-negative integers below 2^63 as float64.

    Below 2^53 the int -> float conversion is exact and np.sqrt is correctly
    rounded. Above it the float estimate gets one Newton step in long double.
    """
    values = np.asarray(values, dtype=np.int64)
    if values.size == 0 or int(values.max()) < EXACT_FLOAT_LIMIT:
        return np.sqrt(values.astype(np.float64))
    estimate = np.sqrt(values.astype(np.float64)).astype(np.longdouble)
    exact = values.astype(np.longdouble)
    corrected = estimate + (exact - estimate * estimate) / (2 * estimate)
    return corrected.astype(np.float64)


def andrica_mask(p: np.ndarray, g: np.ndarray) -> np.ndarray:
    """
    Exact h_n < 1 test in integers.

    h < 1  <=>  g - 1 < 2 sqrt(p)  <=>  (g - 1)^2 < 4p  <=>  floor((g - 1)^2 / 4) < p
    The last form cannot overflow int64 for gaps far beyond anything below 2^63.
    """
    d = g - 1
    return (d * d) // 4 < p


class GapRecord(NamedTuple):
    n: int
    p_n: int
    p_next: int
    g: int
    h: float


class RunningStats(NamedTuple):
    n: int
    p_next: int
    sum_g: int
    sum_h: float
    g_bar: float
    h_bar: float


@dataclass
class GapChunk:
    """Consecutive gap records n .. n + len - 1 as parallel arrays"""
    n: np.ndarray
    p: np.ndarray
    q: np.ndarray
    g: np.ndarray
    h: np.ndarray

    def __len__(self) -> int:
        return len(self.n)

    @property
    def first_n(self) -> int:
        return int(self.n[0])

    @property
    def last_n(self) -> int:
        return int(self.n[-1])

    @classmethod
    def from_primes(cls, primes: np.ndarray, first_index: int) -> "GapChunk":
        """Build the chunk for consecutive primes whose first element is p_{first_index}"""
        p = primes[:-1]
        q = primes[1:]
        g = q - p
        h = h_values(p, q)
        n = np.arange(first_index, first_index + len(p), dtype=np.int64)
        return cls(n=n, p=p, q=q, g=g, h=h)

    def records(self) -> Iterator[GapRecord]:
        for n, p, q, g, h in zip(self.n.tolist(), self.p.tolist(), self.q.tolist(),
                                 self.g.tolist(), self.h.tolist()):
            yield GapRecord(n, p, q, g, h)


def h_values(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Elementwise h_value for arrays of consecutive primes; arguments are not checked"""
    return (q - p) / (sqrt_u64(q) + sqrt_u64(p))


def h_value(p: int, q: int) -> float:
    """sqrt(q) - sqrt(p), evaluated as (q - p) / (sqrt(q) + sqrt(p))"""
    if p < 2 or q <= p:
        raise ArgumentOrderError(f"h_value needs q > p >= 2, got p={p}, q={q}")
    roots = sqrt_u64([p, q])
    return float((q - p) / (roots[1] + roots[0]))


def gap_chunks(limit: int, segment_size: int = Config.SEGMENT_SIZE, threads: int = 1,
               carry: Optional[Tuple[int, int]] = None) -> Iterator[GapChunk]:
    """
    Gap chunks for every consecutive pair with p_{n+1} <= limit.

    Args:
        limit: largest prime to include
        carry: (index, prime) of the last prime already processed; the stream
            then resumes with the pair starting at that prime

    Yields:
        Non-empty GapChunk objects in increasing n
    """
    if carry is None:
        lo, prev, prev_index = 0, None, 0
    else:
        prev_index, prev = carry
        lo = prev + 1
    if lo > limit:
        return

    plan = SegmentPlan(lo=lo, hi=limit, segment_size=segment_size)
    for segment in prime_segments(plan, threads):
        if len(segment) == 0:
            continue
        if prev is None:
            primes, first_index = segment, 1
        else:
            primes = np.concatenate((np.array([prev], dtype=np.int64), segment))
            first_index = prev_index
        if len(primes) >= 2:
            yield GapChunk.from_primes(primes, first_index)
        prev = int(primes[-1])
        prev_index = first_index + len(primes) - 1


def gap_records(limit: int, segment_size: int = Config.SEGMENT_SIZE, threads: int = 1) -> Iterator[GapRecord]:
    """One GapRecord per consecutive prime pair with p_{n+1} <= limit"""
    if limit < Config.MIN_LIMIT:
        raise DomainError(f"gap_records needs limit >= {Config.MIN_LIMIT}, got {limit}")
    for chunk in gap_chunks(limit, segment_size, threads):
        yield from chunk.records()


class KahanSum:
    """
    Compensated running sum (Kahan-Babuska / Neumaier variant).

    `value` is the naive running sum and `compensation` collects the rounding
    error lost at each step, so `total` stays within about one ulp.
    """

    def __init__(self, value: float = 0.0, compensation: float = 0.0):
        self.value = value
        self.compensation = compensation

    def add(self, x: float) -> None:
        t = self.value + x
        if abs(self.value) >= abs(x):
            self.compensation += (self.value - t) + x
        else:
            self.compensation += (x - t) + self.value
        self.value = t

    def add_many(self, xs: np.ndarray) -> None:
        # fsum is correctly rounded, so a whole chunk costs one compensated step
        self.add(math.fsum(xs.tolist()))

    @property
    def total(self) -> float:
        return self.value + self.compensation

    def state(self) -> Tuple[float, float]:
        return self.value, self.compensation


def _check_telescoping(n, p_next, sum_g, sum_h, tolerance: float) -> None:
    """Exact integer and relative real telescoping checks; raises on the first bad row"""
    bad_g = np.flatnonzero(np.asarray(sum_g) + 2 != np.asarray(p_next))
    if bad_g.size:
        i = int(bad_g[0])
        raise StatsInvariantError(
            "gap sum does not telescope to p_{n+1} - 2",
            {"n": int(np.asarray(n)[i]), "sum_g": int(np.asarray(sum_g)[i]),
             "p_next": int(np.asarray(p_next)[i])},
        )
    root = sqrt_u64(p_next)
    deviation = np.abs(np.asarray(sum_h) + SQRT2 - root) / root
    bad_h = np.flatnonzero(deviation > tolerance)
    if bad_h.size:
        i = int(bad_h[0])
        raise StatsInvariantError(
            "Andrica sum drifted from sqrt(p_{n+1}) - sqrt(2)",
            {"n": int(np.asarray(n)[i]), "sum_h": float(np.asarray(sum_h)[i]),
             "relative_deviation": float(deviation[i]), "tolerance": tolerance},
        )


def _check_unit_average(n, h_bar) -> None:
    h_bar = np.asarray(h_bar)
    bad = np.flatnonzero((h_bar <= 0.0) | (h_bar >= 1.0))
    if bad.size:
        i = int(bad[0])
        raise StatsInvariantError(
            "average Andrica value left (0, 1)",
            {"n": int(np.asarray(n)[i]), "h_bar": float(h_bar[i])},
        )


def running_stats(records: Iterable[GapRecord], tolerance: float = Config.H_TOLERANCE) -> Iterator[RunningStats]:
    """
    RunningStats after every record.

    Raises:
        ContiguityError: records do not start at n = 1 or skip an index
        StatsInvariantError: a telescoping identity or 0 < h_bar < 1 fails
    """
    sum_g = 0
    sum_h = KahanSum()
    expected = 1
    for record in records:
        if record.n != expected:
            raise ContiguityError(f"expected record n={expected}, got n={record.n}")
        sum_g += record.g
        sum_h.add(record.h)
        total = sum_h.total
        stats = RunningStats(
            n=record.n, p_next=record.p_next, sum_g=sum_g, sum_h=total,
            g_bar=sum_g / record.n, h_bar=total / record.n,
        )
        _check_telescoping([stats.n], [stats.p_next], [stats.sum_g], [stats.sum_h], tolerance)
        _check_unit_average([stats.n], [stats.h_bar])
        yield stats
        expected += 1


@dataclass
class ChunkStats:
    """Running statistics for every n of one GapChunk"""
    n: np.ndarray
    sum_g: np.ndarray
    sum_h: np.ndarray
    g_bar: np.ndarray
    h_bar: np.ndarray
    prev_h_bar: np.ndarray  # h_bar_{n-1}; NaN at n = 1

    def rows(self, chunk: GapChunk) -> Iterator[RunningStats]:
        for i in range(len(self.n)):
            yield RunningStats(int(self.n[i]), int(chunk.q[i]), int(self.sum_g[i]),
                               float(self.sum_h[i]), float(self.g_bar[i]), float(self.h_bar[i]))


class StatsFold:
    """
    Ordered fold of GapChunks into running statistics.

    Chunks may be produced concurrently but must be folded in increasing n.
    The fold state (n, last prime, sum_g, sum_h) is what a checkpoint stores.
    """

    def __init__(self, tolerance: float = Config.H_TOLERANCE, check_unit_average: bool = True):
        self.tolerance = tolerance
        self.check_unit_average = check_unit_average
        self.n = 0
        self.last_prime = 2
        self.sum_g = 0
        self.sum_h = KahanSum()

    @property
    def carry(self) -> Optional[Tuple[int, int]]:
        """(index, value) of the last prime folded, or None before the first chunk"""
        return None if self.n == 0 else (self.n + 1, self.last_prime)

    def fold(self, chunk: GapChunk) -> ChunkStats:
        if chunk.first_n != self.n + 1:
            raise ContiguityError(f"expected chunk starting at n={self.n + 1}, got n={chunk.first_n}")

        sum_g = self.sum_g + np.cumsum(chunk.g)
        sum_h = self.sum_h.total + np.cumsum(chunk.h)
        g_bar = sum_g / chunk.n
        h_bar = sum_h / chunk.n
        first_prev = self.sum_h.total / self.n if self.n else np.nan
        prev_h_bar = np.concatenate(([first_prev], h_bar[:-1]))

        _check_telescoping(chunk.n, chunk.q, sum_g, sum_h, self.tolerance)
        if self.check_unit_average:
            _check_unit_average(chunk.n, h_bar)

        self.n = chunk.last_n
        self.last_prime = int(chunk.q[-1])
        self.sum_g = int(sum_g[-1])
        self.sum_h.add_many(chunk.h)
        return ChunkStats(n=chunk.n, sum_g=sum_g, sum_h=sum_h, g_bar=g_bar,
                          h_bar=h_bar, prev_h_bar=prev_h_bar)


class RecordTracker(BaseModel):
    """
    Record gaps, record Andrica values and the below-one tally.

    min_prefix_surplus is min over prefixes k of (2 * below_k - k); it is >= 0
    exactly when at least half of every prefix has h_n < 1.
    """

    first_n: int = Field(default=1, ge=1)
    max_g_events: List[Tuple[int, int]] = Field(default_factory=list)
    max_h_events: List[Tuple[int, float]] = Field(default_factory=list)
    count_h_below_one: int = 0
    total: int = 0
    min_prefix_surplus: Optional[int] = None

    def _expect(self, n: int) -> None:
        if n != self.first_n + self.total:
            raise ContiguityError(f"expected record n={self.first_n + self.total}, got n={n}")

    def observe(self, record: GapRecord) -> None:
        self._expect(record.n)
        if not self.max_g_events or record.g > self.max_g_events[-1][1]:
            self.max_g_events.append((record.n, record.g))
        if not self.max_h_events or record.h > self.max_h_events[-1][1]:
            self.max_h_events.append((record.n, record.h))
        below = bool(andrica_mask(np.int64(record.p_n), np.int64(record.g)))
        self.count_h_below_one += below
        self.total += 1
        surplus = 2 * self.count_h_below_one - self.total
        if self.min_prefix_surplus is None or surplus < self.min_prefix_surplus:
            self.min_prefix_surplus = surplus

    def observe_chunk(self, chunk: GapChunk) -> None:
        self._expect(chunk.first_n)
        self.max_g_events.extend(_record_events(chunk.n, chunk.g, self.max_g_events, int))
        self.max_h_events.extend(_record_events(chunk.n, chunk.h, self.max_h_events, float))

        below = andrica_mask(chunk.p, chunk.g)
        surplus = (2 * self.count_h_below_one - self.total) + np.cumsum(np.where(below, 1, -1))
        chunk_min = int(surplus.min())
        if self.min_prefix_surplus is None or chunk_min < self.min_prefix_surplus:
            self.min_prefix_surplus = chunk_min
        self.count_h_below_one += int(below.sum())
        self.total += len(chunk)

    def merge(self, later: "RecordTracker") -> "RecordTracker":
        """Combine with a tracker covering the records right after this one"""
        if later.first_n != self.first_n + self.total:
            raise ContiguityError(
                f"tracker starting at n={later.first_n} does not follow n={self.first_n + self.total - 1}"
            )
        if later.total == 0:
            return self.model_copy(deep=True)
        g_events = list(self.max_g_events)
        for n, g in later.max_g_events:
            if not g_events or g > g_events[-1][1]:
                g_events.append((n, g))
        h_events = list(self.max_h_events)
        for n, h in later.max_h_events:
            if not h_events or h > h_events[-1][1]:
                h_events.append((n, h))
        offset = 2 * self.count_h_below_one - self.total
        candidates = [s for s in (self.min_prefix_surplus,) if s is not None]
        candidates.append(offset + later.min_prefix_surplus)
        return RecordTracker(
            first_n=self.first_n,
            max_g_events=g_events,
            max_h_events=h_events,
            count_h_below_one=self.count_h_below_one + later.count_h_below_one,
            total=self.total + later.total,
            min_prefix_surplus=min(candidates),
        )


def _record_events(n: np.ndarray, values: np.ndarray, events: list, cast) -> list:
    """New (n, value) records in a chunk, given the events seen so far"""
    previous = events[-1][1] if events else -np.inf
    running = np.maximum.accumulate(np.concatenate(([previous], values)))[:-1]
    hits = np.flatnonzero(values > running)
    return [(int(n[i]), cast(values[i])) for i in hits]


def records(gap_stream: Iterable[GapRecord]) -> RecordTracker:
    """Fold a contiguous GapRecord stream (from n = 1) into a RecordTracker"""
    tracker = RecordTracker()
    for record in gap_stream:
        tracker.observe(record)
    return tracker


def fraction_below_one(tracker: RecordTracker) -> float:
    """Share of pairs with h_n < 1"""
    if tracker.total < 1:
        raise EmptyTrackerError("fraction_below_one needs at least one record")
    return tracker.count_h_below_one / tracker.total


class HDecay(NamedTuple):
    window_start: int
    max_before: float
    max_window: float
    decays: bool


def h_decay(window_start: int, segment_size: int = Config.SEGMENT_SIZE, threads: int = 1) -> HDecay:
    """
    max{h_k : N <= k <= 2N} against max{h_k : k < N}.

    A testable stand-in for lim h_n = 0 at a finite N.
    """
    if window_start < 2:
        raise DomainError(f"h_decay needs N >= 2, got {window_start}")
    limit = nth_prime(2 * window_start + 1, segment_size, threads)
    h = np.concatenate([chunk.h for chunk in gap_chunks(limit, segment_size, threads)])
    before = float(h[: window_start - 1].max())
    window = float(h[window_start - 1: 2 * window_start].max())
    return HDecay(window_start, before, window, window < before)
