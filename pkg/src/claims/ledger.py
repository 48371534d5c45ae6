"""
The claim ledger: each inequality about prime gaps and Andrica values gets a
tag, a vectorized predicate over the gap stream and an expected empirical
status.

Some claims are expected to fail (the decreasing-average and h_n < h_bar_n
steps do not hold term by term); their counterexamples are results, not bugs.
"""
import logging
from enum import Enum
from typing import Callable, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from src.config import Config
from src.errors import ArgumentOrderError, ClaimConsistencyError, DomainError, UnknownClaimError
from src.primes.gaps import (
    ChunkStats,
    GapChunk,
    RecordTracker,
    StatsFold,
    andrica_mask,
    gap_chunks,
    sqrt_u64,
)
from src.primes.sieve import ordered_map

logger = logging.getLogger(__name__)

VIOLATION_SAMPLE = 16
MONOTONE_RTOL = 1e-9
ISQRT_MAX = 3037000499  # isqrt(2^63 - 1)


class ClaimId(str, Enum):
    ANDRICA = "ANDRICA"
    ANDRICA_GAP_FORM = "ANDRICA_GAP_FORM"
    AVG_IN_UNIT = "AVG_IN_UNIT"
    AVG_MONOTONE = "AVG_MONOTONE"
    H_LT_AVG = "H_LT_AVG"
    GAP_LT_2LN = "GAP_LT_2LN"
    AVG_ASYMPTOTIC = "AVG_ASYMPTOTIC"
    GBAR_LT_N = "GBAR_LT_N"
    HBAR_SIMPLE_BOUND = "HBAR_SIMPLE_BOUND"
    GBAR_ASYMPTOTIC = "GBAR_ASYMPTOTIC"


class ExpectedStatus(str, Enum):
    HOLDS = "holds-at-desk-scale"
    FAILS = "fails-with-counterexamples"
    BAND = "band-check"


class CatalogEntry(NamedTuple):
    claim: ClaimId
    source: str
    expected: ExpectedStatus
    statement: str


CATALOG = (
    CatalogEntry(ClaimId.ANDRICA, "Andrica's conjecture", ExpectedStatus.HOLDS,
                 "h_n = sqrt(p_{n+1}) - sqrt(p_n) < 1 for all n"),
    CatalogEntry(ClaimId.ANDRICA_GAP_FORM, "Andrica's conjecture, gap form", ExpectedStatus.HOLDS,
                 "g_n < 1 + 2 sqrt(p_n)"),
    CatalogEntry(ClaimId.AVG_IN_UNIT, "average Andrica value lies in the unit interval", ExpectedStatus.HOLDS,
                 "0 < h_bar_n < 1"),
    CatalogEntry(ClaimId.AVG_MONOTONE, "average Andrica value decreases in n", ExpectedStatus.FAILS,
                 "h_bar_n < h_bar_{n-1}, n >= 2; fails whenever h_n > h_bar_{n-1}"),
    CatalogEntry(ClaimId.H_LT_AVG, "Andrica value below the running average", ExpectedStatus.FAILS,
                 "h_n < (sqrt(p_{n+1}) - sqrt(2)) / n; equality at n = 1"),
    CatalogEntry(ClaimId.GAP_LT_2LN, "gap below twice the average gap", ExpectedStatus.FAILS,
                 "g_n < 2 ln n; meant asymptotically, read literally here (n = 1 gives 1 < 0)"),
    CatalogEntry(ClaimId.AVG_ASYMPTOTIC, "average Andrica value ~ 1/sqrt(pi(n))", ExpectedStatus.BAND,
                 "h_bar_n * sqrt(n / ln n) within the configured band for n >= band start"),
    CatalogEntry(ClaimId.GBAR_LT_N, "average gap below n", ExpectedStatus.FAILS,
                 "g_bar_n < n, i.e. p_{n+1} - 2 < n^2; n = 1 gives 1 < 1"),
    CatalogEntry(ClaimId.HBAR_SIMPLE_BOUND, "average Andrica value under the p_k < k^2 bound", ExpectedStatus.HOLDS,
                 "h_bar_n < 1 - (sqrt(2) - 1) / n, i.e. p_{n+1} < (n + 1)^2"),
    CatalogEntry(ClaimId.GBAR_ASYMPTOTIC, "average gap ~ ln n", ExpectedStatus.BAND,
                 "g_bar_n / ln n within the configured band for n >= band start"),
)

CATALOG_BY_ID = {entry.claim: entry for entry in CATALOG}


def claim_catalog() -> List[CatalogEntry]:
    return list(CATALOG)


def parse_claim(tag: Union[str, ClaimId]) -> ClaimId:
    try:
        return ClaimId(tag)
    except ValueError:
        raise UnknownClaimError(f"unknown claim tag: {tag!r}") from None


class LedgerSettings(BaseModel):
    band: Tuple[float, float] = Config.AVG_BAND
    gbar_band: Tuple[float, float] = Config.GBAR_BAND
    band_start: int = Config.BAND_START
    tolerance: float = Config.H_TOLERANCE


class FirstViolation(BaseModel):
    n: int
    lhs: float
    rhs: float


class ClaimOutcome(BaseModel):
    claim: str
    checked_n: int
    violations: int
    first_violation: Optional[FirstViolation] = None
    satisfied_fraction: float
    band: Optional[Tuple[float, float]] = None
    violation_head: List[int] = Field(default_factory=list)


class ClaimAccumulator(BaseModel):
    """Running violation accounting for one claim; combines associatively"""
    claim: str
    checked: int = 0
    violations: int = 0
    first_violation: Optional[FirstViolation] = None
    violation_head: List[int] = Field(default_factory=list)

    def add(self, n: np.ndarray, ok: np.ndarray, lhs: np.ndarray, rhs: np.ndarray) -> None:
        self.checked += len(n)
        bad = np.flatnonzero(~ok)
        if bad.size == 0:
            return
        self.violations += int(bad.size)
        if self.first_violation is None:
            i = int(bad[0])
            self.first_violation = FirstViolation(n=int(n[i]), lhs=float(lhs[i]), rhs=float(rhs[i]))
        room = VIOLATION_SAMPLE - len(self.violation_head)
        if room > 0:
            self.violation_head.extend(int(n[i]) for i in bad[:room])

    def merge(self, later: "ClaimAccumulator") -> "ClaimAccumulator":
        firsts = [f for f in (self.first_violation, later.first_violation) if f is not None]
        return ClaimAccumulator(
            claim=self.claim,
            checked=self.checked + later.checked,
            violations=self.violations + later.violations,
            first_violation=min(firsts, key=lambda f: f.n) if firsts else None,
            violation_head=sorted(self.violation_head + later.violation_head)[:VIOLATION_SAMPLE],
        )

    def outcome(self, band: Optional[Tuple[float, float]] = None) -> ClaimOutcome:
        fraction = 1.0 if self.checked == 0 else (self.checked - self.violations) / self.checked
        return ClaimOutcome(
            claim=self.claim,
            checked_n=self.checked,
            violations=self.violations,
            first_violation=self.first_violation,
            satisfied_fraction=fraction,
            band=band,
            violation_head=list(self.violation_head),
        )


def andrica_holds(p: int, q: int) -> bool:
    """h < 1 for one prime pair, decided in exact integers: (g - 1)^2 < 4p"""
    if p < 2 or q <= p:
        raise ArgumentOrderError(f"andrica_holds needs q > p >= 2, got p={p}, q={q}")
    return (q - p - 1) ** 2 < 4 * p


def isqrt_array(values: np.ndarray) -> np.ndarray:
    """floor(sqrt(v)) for int64 values, corrected to be exact"""
    r = np.minimum(np.floor(sqrt_u64(values)).astype(np.int64), ISQRT_MAX)
    r -= (r * r > values).astype(np.int64)
    # (r + 1)^2 <= v without forming (r + 1)^2, which overflows at r = ISQRT_MAX
    r += (values // (r + 1) >= r + 1).astype(np.int64)
    return r


def floor_two_sqrt(p: np.ndarray) -> np.ndarray:
    """floor(2 sqrt(p)) without forming 4p: 2r or 2r + 1 where r = isqrt(p)"""
    r = isqrt_array(p)
    return 2 * r + (r * r + r < p).astype(np.int64)


Predicate = Callable[[GapChunk, Optional[ChunkStats], LedgerSettings], Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]


def _all(chunk: GapChunk) -> np.ndarray:
    return np.ones(len(chunk), dtype=bool)


def _andrica(chunk, stats, settings):
    return _all(chunk), andrica_mask(chunk.p, chunk.g), chunk.h, np.ones(len(chunk))


def _andrica_gap_form(chunk, stats, settings):
    ok = chunk.g - 1 <= floor_two_sqrt(chunk.p)
    rhs = 1 + 2 * sqrt_u64(chunk.p)
    return _all(chunk), ok, chunk.g.astype(np.float64), rhs


def _avg_in_unit(chunk, stats, settings):
    ok = (stats.h_bar > 0) & (stats.h_bar < 1)
    return _all(chunk), ok, stats.h_bar, np.ones(len(chunk))


def _avg_monotone(chunk, stats, settings):
    checked = chunk.n >= 2
    with np.errstate(invalid="ignore"):
        ok = stats.h_bar < stats.prev_h_bar
    return checked, ok, stats.h_bar, stats.prev_h_bar


def _h_lt_avg(chunk, stats, settings):
    # rhs is the running average itself, so n = 1 compares h_1 with h_1
    return _all(chunk), chunk.h < stats.h_bar, chunk.h, stats.h_bar


def _gap_lt_2ln(chunk, stats, settings):
    rhs = 2 * np.log(chunk.n.astype(np.float64))
    return _all(chunk), chunk.g < rhs, chunk.g.astype(np.float64), rhs


def _band_check(value: np.ndarray, band: Tuple[float, float]):
    lo, hi = band
    ok = (value >= lo) & (value <= hi)
    rhs = np.where(value < lo, lo, hi)
    return ok, value, rhs


def _avg_asymptotic(chunk, stats, settings):
    checked = chunk.n >= settings.band_start
    n = chunk.n.astype(np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = stats.h_bar * np.sqrt(n / np.log(n))
    return (checked,) + _band_check(value, settings.band)


def _gbar_lt_n(chunk, stats, settings):
    ok = chunk.q - 2 < chunk.n * chunk.n
    # g_bar_n = (p_{n+1} - 2) / n exactly, so no running state is needed
    return _all(chunk), ok, (chunk.q - 2) / chunk.n, chunk.n.astype(np.float64)


def _hbar_simple_bound(chunk, stats, settings):
    ok = chunk.q < (chunk.n + 1) * (chunk.n + 1)
    rhs = 1 - (np.sqrt(2.0) - 1) / chunk.n
    return _all(chunk), ok, stats.h_bar, rhs


def _gbar_asymptotic(chunk, stats, settings):
    checked = chunk.n >= settings.band_start
    with np.errstate(divide="ignore", invalid="ignore"):
        value = stats.g_bar / np.log(chunk.n.astype(np.float64))
    return (checked,) + _band_check(value, settings.gbar_band)


PREDICATES: Dict[ClaimId, Predicate] = {
    ClaimId.ANDRICA: _andrica,
    ClaimId.ANDRICA_GAP_FORM: _andrica_gap_form,
    ClaimId.AVG_IN_UNIT: _avg_in_unit,
    ClaimId.AVG_MONOTONE: _avg_monotone,
    ClaimId.H_LT_AVG: _h_lt_avg,
    ClaimId.GAP_LT_2LN: _gap_lt_2ln,
    ClaimId.AVG_ASYMPTOTIC: _avg_asymptotic,
    ClaimId.GBAR_LT_N: _gbar_lt_n,
    ClaimId.HBAR_SIMPLE_BOUND: _hbar_simple_bound,
    ClaimId.GBAR_ASYMPTOTIC: _gbar_asymptotic,
}


# decided by the chunk alone, so they are evaluated in the worker pool
PREFIX_FREE = frozenset({ClaimId.ANDRICA, ClaimId.ANDRICA_GAP_FORM, ClaimId.GAP_LT_2LN, ClaimId.GBAR_LT_N})


def _assert_consistency(claim: ClaimId, chunk: GapChunk, stats: Optional[ChunkStats], ok: np.ndarray) -> None:
    if claim is ClaimId.ANDRICA_GAP_FORM:
        disagree = np.flatnonzero(ok != andrica_mask(chunk.p, chunk.g))
        if disagree.size:
            n = int(chunk.n[disagree[0]])
            raise ClaimConsistencyError(f"h_n < 1 and g_n < 1 + 2 sqrt(p_n) disagree at n={n}")
    elif claim is ClaimId.AVG_MONOTONE:
        # h_bar_n >= h_bar_{n-1} happens exactly when h_n >= h_bar_{n-1}
        bad = (chunk.n >= 2) & ~ok
        off = bad & (chunk.h < stats.prev_h_bar * (1 - MONOTONE_RTOL))
        if off.any():
            n = int(chunk.n[np.flatnonzero(off)[0]])
            raise ClaimConsistencyError(f"average rose at n={n} although h_n < h_bar_(n-1)")


def evaluate_claim(claim: ClaimId, chunk: GapChunk, stats: Optional[ChunkStats],
                   settings: LedgerSettings) -> ClaimAccumulator:
    """Accumulator for one claim over one chunk; stats may be None for PREFIX_FREE claims"""
    checked, ok, lhs, rhs = PREDICATES[claim](chunk, stats, settings)
    _assert_consistency(claim, chunk, stats, ok)
    accumulator = ClaimAccumulator(claim=claim.value)
    accumulator.add(chunk.n[checked], ok[checked], lhs[checked], rhs[checked])
    return accumulator


class ChunkPartial(NamedTuple):
    """Everything about one chunk that does not depend on the chunks before it"""
    chunk: GapChunk
    tracker: RecordTracker
    accumulators: Dict[ClaimId, ClaimAccumulator]


def chunk_partial(chunk: GapChunk, claims: Sequence[ClaimId], settings: LedgerSettings) -> ChunkPartial:
    tracker = RecordTracker(first_n=chunk.first_n)
    tracker.observe_chunk(chunk)
    accumulators = {c: evaluate_claim(c, chunk, None, settings) for c in claims if c in PREFIX_FREE}
    return ChunkPartial(chunk, tracker, accumulators)


CheckpointHook = Callable[["ClaimFold"], object]


class ClaimFold:
    """
    Single ordered pass over gap chunks feeding every selected claim.

    Per-chunk partials (record tracker, prefix-free claims) are computed in a
    pool and combined in n order with RecordTracker.merge and
    ClaimAccumulator.merge; the running statistics and the claims that need
    them are folded at combine time. Also carries everything a checkpoint
    needs.
    """

    def __init__(self, claims: Optional[Sequence[ClaimId]] = None, settings: Optional[LedgerSettings] = None):
        self.settings = settings or LedgerSettings()
        self.claims = [parse_claim(c) for c in (claims or list(ClaimId))]
        self.stats = StatsFold(tolerance=self.settings.tolerance, check_unit_average=False)
        self.tracker = RecordTracker()
        self.accumulators = {c: ClaimAccumulator(claim=c.value) for c in self.claims}
        self._combining = False

    def combine(self, partial: ChunkPartial) -> ChunkStats:
        """Fold the partial for the chunk right after the current state"""
        chunk = partial.chunk
        self._combining = True
        stats = self.stats.fold(chunk)
        self.tracker = self.tracker.merge(partial.tracker)
        for claim in self.claims:
            part = partial.accumulators.get(claim)
            if part is None:
                part = evaluate_claim(claim, chunk, stats, self.settings)
            self.accumulators[claim] = self.accumulators[claim].merge(part)
        self._combining = False
        return stats

    def run(self, limit: int, segment_size: int = Config.SEGMENT_SIZE, threads: int = 1,
            checkpoint: Optional[CheckpointHook] = None, checkpoint_every: int = 0) -> "ClaimFold":
        """
        Continue the fold up to `limit`.

        Args:
            checkpoint: called with this fold every `checkpoint_every` chunks
                (0: never) and once more if the run is interrupted
        """
        chunks = gap_chunks(limit, segment_size, threads, carry=self.stats.carry)
        partials = ordered_map(lambda chunk: chunk_partial(chunk, self.claims, self.settings), chunks, threads)
        combined = 0
        try:
            for partial in partials:
                self.combine(partial)
                combined += 1
                if checkpoint is not None and checkpoint_every and combined % checkpoint_every == 0:
                    checkpoint(self)
        except KeyboardInterrupt:
            if checkpoint is not None and not self._combining:
                logger.warning("interrupted at n=%d; writing checkpoint", self.stats.n)
                checkpoint(self)
            raise
        logger.info("claim fold reached n=%d (p=%d)", self.stats.n, self.stats.last_prime)
        return self

    def band_for(self, claim: ClaimId) -> Optional[Tuple[float, float]]:
        if claim is ClaimId.AVG_ASYMPTOTIC:
            return tuple(self.settings.band)
        if claim is ClaimId.GBAR_ASYMPTOTIC:
            return tuple(self.settings.gbar_band)
        return None

    def outcomes(self) -> List[ClaimOutcome]:
        return [self.accumulators[c].outcome(self.band_for(c)) for c in self.claims]


def verify_all(limit: int, claims: Optional[Iterable[Union[str, ClaimId]]] = None,
               settings: Optional[LedgerSettings] = None,
               segment_size: int = Config.SEGMENT_SIZE, threads: int = 1) -> List[ClaimOutcome]:
    """One ClaimOutcome per claim, all from a single pass over the gap stream"""
    if limit < Config.MIN_LIMIT:
        raise DomainError(f"verify_all needs limit >= {Config.MIN_LIMIT}, got {limit}")
    selected = [parse_claim(c) for c in claims] if claims is not None else None
    return ClaimFold(selected, settings).run(limit, segment_size, threads).outcomes()


def check_claim(claim: Union[str, ClaimId], limit: int, settings: Optional[LedgerSettings] = None,
                segment_size: int = Config.SEGMENT_SIZE, threads: int = 1) -> ClaimOutcome:
    """Evaluate a single claim for every n with p_{n+1} <= limit"""
    return verify_all(limit, [parse_claim(claim)], settings, segment_size, threads)[0]


def unexpected_failures(outcomes: Iterable[ClaimOutcome]) -> List[ClaimOutcome]:
    """Outcomes whose claim was expected to hold (or stay in band) but was violated"""
    failed = []
    for outcome in outcomes:
        expected = CATALOG_BY_ID[ClaimId(outcome.claim)].expected
        if expected is not ExpectedStatus.FAILS and outcome.violations > 0:
            failed.append(outcome)
    return failed
