"""
Segmented, odd-only sieve of Eratosthenes.

Everything downstream (gaps, bounds, claims) consumes primes as numpy int64
arrays, one per segment, delivered in ascending order.
"""
import logging
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Iterator, List, NamedTuple, Optional, Tuple, TypeVar

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.config import Config
from src.errors import DomainError, PlanMismatchError, PrimeOverflowError, ResourceLimitError

logger = logging.getLogger(__name__)

SMALL_PRIMES = (2, 3, 5, 7, 11)

T = TypeVar("T")
R = TypeVar("R")


class PrimeEntry(NamedTuple):
    """The n-th prime: (index n, value p_n), 1-based"""
    index: int
    value: int


class SegmentPlan(BaseModel):
    """Tiling of [lo, hi] into segments of `segment_size` odd candidates"""

    model_config = ConfigDict(frozen=True)

    lo: int = Field(ge=0)
    hi: int = Field(ge=0)
    segment_size: int = Field(default=Config.SEGMENT_SIZE, ge=1)

    @model_validator(mode="after")
    def check_order(self) -> "SegmentPlan":
        if self.lo > self.hi:
            raise PlanMismatchError(f"segment plan has lo={self.lo} > hi={self.hi}")
        if self.hi > Config.MAX_PRIME:
            raise PrimeOverflowError(f"segment plan upper end {self.hi} exceeds 2^63 - 1")
        return self

    @classmethod
    def for_limit(cls, limit: int, segment_size: int = Config.SEGMENT_SIZE) -> "SegmentPlan":
        return cls(lo=0, hi=limit, segment_size=segment_size)

    def segments(self) -> Iterator[Tuple[int, int]]:
        """Inclusive (start, end) tiles, ascending, no overlap and no holes"""
        span = 2 * self.segment_size
        start = self.lo
        while start <= self.hi:
            end = min(start + span - 1, self.hi)
            yield start, end
            start = end + 1

    def covers(self, limit: int) -> bool:
        return self.lo <= 2 and self.hi == limit


def base_primes(limit: int) -> np.ndarray:
    """All primes <= limit with a plain (unsegmented) sieve; used for small limits"""
    if limit < 2:
        return np.array([], dtype=np.int64)
    is_prime = np.ones(limit + 1, dtype=bool)
    is_prime[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if is_prime[p]:
            is_prime[p * p::p] = False
    return np.flatnonzero(is_prime).astype(np.int64)


def sieve_range(lo: int, hi: int, base: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Primes in the inclusive range [lo, hi].

    Args:
        lo: lower end (any non-negative integer)
        hi: upper end, below 2^63
        base: primes up to isqrt(hi); computed when omitted

    Returns:
        Ascending int64 array of primes
    """
    if hi < 2 or lo > hi:
        return np.array([], dtype=np.int64)
    if base is None:
        base = base_primes(math.isqrt(hi))

    start = max(lo | 1, 3)
    if start > hi:
        return np.array([2], dtype=np.int64) if lo <= 2 <= hi else np.array([], dtype=np.int64)

    count = (hi - start) // 2 + 1
    mask = np.ones(count, dtype=bool)
    for p in base.tolist():
        if p == 2:
            continue
        p2 = p * p
        if p2 > hi:
            break
        first = max(p2, -(-start // p) * p)
        if first % 2 == 0:
            first += p
        if first > hi:
            continue
        mask[(first - start) // 2::p] = False

    primes = start + 2 * np.flatnonzero(mask).astype(np.int64)
    if lo <= 2:
        primes = np.concatenate((np.array([2], dtype=np.int64), primes))
    return primes


def prime_segments(plan: SegmentPlan, threads: int = 1) -> Iterator[np.ndarray]:
    """
    Sieve every tile of `plan`, yielding one array per tile in ascending order.

    With threads > 1 tiles are sieved concurrently, but at most 2 * threads
    tiles are in flight and results are still delivered in tile order.
    """
    base = base_primes(math.isqrt(plan.hi))
    yield from ordered_map(lambda tile: sieve_range(tile[0], tile[1], base), plan.segments(), threads)


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> Iterator[R]:
    """
    fn over items, results yielded in input order.

    With threads > 1 calls run in a pool with at most 2 * threads in flight;
    items are drawn lazily, so an unbounded input stays bounded in memory.
    """
    if threads <= 1:
        for item in items:
            yield fn(item)
        return

    with ThreadPoolExecutor(max_workers=threads) as executor:
        pending = deque()
        for item in items:
            pending.append(executor.submit(fn, item))
            if len(pending) >= 2 * threads:
                yield pending.popleft().result()
        while pending:
            yield pending.popleft().result()


def prime_array(limit: int, segment_size: int = Config.SEGMENT_SIZE, threads: int = 1) -> np.ndarray:
    """All primes <= limit as one int64 array"""
    if limit < 2:
        return np.array([], dtype=np.int64)
    plan = SegmentPlan.for_limit(limit, segment_size)
    return np.concatenate(list(prime_segments(plan, threads)))


def primes_up_to(limit: int, segmented: bool = True,
                 segment_size: int = Config.SEGMENT_SIZE) -> List[PrimeEntry]:
    """
    Exactly the primes <= limit with their 1-based indices.

    Raises:
        ResourceLimitError: segmenting disabled and limit above the memory budget
    """
    if not segmented:
        if limit > Config.MAX_UNSEGMENTED_LIMIT:
            raise ResourceLimitError(
                f"limit {limit} exceeds the unsegmented budget of {Config.MAX_UNSEGMENTED_LIMIT}"
            )
        values = base_primes(limit)
    else:
        values = prime_array(limit, segment_size)
    return [PrimeEntry(i, v) for i, v in enumerate(values.tolist(), start=1)]


def prime_stream(limit: int, plan: SegmentPlan, threads: int = 1) -> Iterator[PrimeEntry]:
    """Same content as primes_up_to(limit), produced segment by segment"""
    if not plan.covers(limit):
        raise PlanMismatchError(
            f"plan [{plan.lo}, {plan.hi}] does not tile [2, {limit}]"
        )
    index = 0
    for segment in prime_segments(plan, threads):
        for value in segment.tolist():
            index += 1
            yield PrimeEntry(index, value)


def prime_count(x: int, segment_size: int = Config.SEGMENT_SIZE, threads: int = 1) -> int:
    """Exact number of primes <= x"""
    if x < 2:
        return 0
    plan = SegmentPlan.for_limit(x, segment_size)
    return sum(len(segment) for segment in prime_segments(plan, threads))


def pi_approx(x: float) -> float:
    """x / ln x, the approximation of the prime counting function"""
    if x <= 1:
        raise DomainError(f"pi_approx needs x > 1, got {x}")
    return x / math.log(x)


def nth_prime_upper_bound(n: int) -> int:
    """Integer ceiling of n(ln n + ln ln n), valid as an upper bound for n >= 6"""
    bound = n * (math.log(n) + math.log(math.log(n)))
    if bound >= Config.MAX_PRIME:
        raise PrimeOverflowError(f"sieve window for n={n} exceeds the 63-bit range")
    return math.ceil(bound)


def nth_prime(n: int, segment_size: int = Config.SEGMENT_SIZE, threads: int = 1) -> int:
    """p_n, sieving only as far as the upper bound for the n-th prime"""
    if n < 1:
        raise DomainError(f"nth_prime needs n >= 1, got {n}")
    if n < 6:
        return SMALL_PRIMES[n - 1]

    limit = nth_prime_upper_bound(n)
    plan = SegmentPlan.for_limit(limit, segment_size)
    logger.debug("nth_prime(%d): sieving up to %d", n, limit)

    seen = 0
    for segment in prime_segments(plan, threads):
        if seen + len(segment) >= n:
            return int(segment[n - seen - 1])
        seen += len(segment)
    # unreachable for n >= 6: the bound is proven
    raise ArithmeticError(f"upper bound {limit} did not contain the {n}-th prime")
