#!/usr/bin/env python
"""
Tests for the claim ledger
"""
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from src.claims.ledger import (
    CATALOG,
    PREDICATES,
    PREFIX_FREE,
    VIOLATION_SAMPLE,
    ClaimAccumulator,
    ClaimFold,
    ClaimId,
    ExpectedStatus,
    LedgerSettings,
    andrica_holds,
    check_claim,
    chunk_partial,
    claim_catalog,
    floor_two_sqrt,
    isqrt_array,
    parse_claim,
    unexpected_failures,
    verify_all,
)
from src.config import Config
from src.errors import ArgumentOrderError, ContiguityError, DomainError, UnknownClaimError
from src.primes.gaps import andrica_mask, gap_chunks


def by_claim(outcomes):
    return {o.claim: o for o in outcomes}


@pytest.fixture(scope="module")
def ten_thousand():
    return by_claim(verify_all(10_000))


class TestCatalog:
    def test_every_claim_listed_once(self):
        assert sorted(e.claim.value for e in claim_catalog()) == sorted(c.value for c in ClaimId)
        assert set(PREDICATES) == set(ClaimId)

    @pytest.mark.parametrize("claim,expected", [
        (ClaimId.ANDRICA, ExpectedStatus.HOLDS),
        (ClaimId.ANDRICA_GAP_FORM, ExpectedStatus.HOLDS),
        (ClaimId.AVG_IN_UNIT, ExpectedStatus.HOLDS),
        (ClaimId.AVG_MONOTONE, ExpectedStatus.FAILS),
        (ClaimId.H_LT_AVG, ExpectedStatus.FAILS),
        (ClaimId.GAP_LT_2LN, ExpectedStatus.FAILS),
        (ClaimId.AVG_ASYMPTOTIC, ExpectedStatus.BAND),
        (ClaimId.GBAR_LT_N, ExpectedStatus.FAILS),
        (ClaimId.HBAR_SIMPLE_BOUND, ExpectedStatus.HOLDS),
        (ClaimId.GBAR_ASYMPTOTIC, ExpectedStatus.BAND),
    ])
    def test_expected_status(self, claim, expected):
        assert {e.claim: e.expected for e in CATALOG}[claim] is expected

    def test_parse(self):
        assert parse_claim("ANDRICA") is ClaimId.ANDRICA
        assert parse_claim(ClaimId.GAP_LT_2LN) is ClaimId.GAP_LT_2LN

    @pytest.mark.parametrize("tag", ["andrica", "LEGENDRE", ""])
    def test_unknown_tag(self, tag):
        with pytest.raises(UnknownClaimError):
            parse_claim(tag)

    def test_unknown_tag_in_verify(self):
        with pytest.raises(UnknownClaimError):
            verify_all(100, ["ANDRICA", "NOPE"])


class TestIntegerSquareRoots:
    @given(v=st.integers(0, (1 << 63) - 1))
    def test_isqrt(self, v):
        assert int(isqrt_array(np.array([v], dtype=np.int64))[0]) == math.isqrt(v)

    @pytest.mark.parametrize("v", [
        3037000499 ** 2 - 1,
        3037000499 ** 2,
        3037000499 ** 2 + 5,
        (1 << 63) - 1,
    ])
    def test_isqrt_at_the_top_of_int64(self, v):
        assert int(isqrt_array(np.array([v], dtype=np.int64))[0]) == math.isqrt(v)

    def test_floor_two_sqrt_at_the_top_of_int64(self):
        p = np.array([3037000499 ** 2 + 5, (1 << 63) - 25], dtype=np.int64)
        assert floor_two_sqrt(p).tolist() == [math.isqrt(4 * int(v)) for v in p.tolist()]

    @given(p=st.integers(2, (1 << 63) - 1))
    def test_floor_two_sqrt(self, p):
        assert int(floor_two_sqrt(np.array([p], dtype=np.int64))[0]) == math.isqrt(4 * p)

    @given(p=st.integers(2, 10 ** 15), g=st.integers(1, 10 ** 6))
    def test_gap_form_agrees_with_exact_criterion(self, p, g):
        p_arr = np.array([p], dtype=np.int64)
        g_arr = np.array([g], dtype=np.int64)
        gap_form = bool((g_arr - 1 <= floor_two_sqrt(p_arr))[0])
        assert gap_form == bool(andrica_mask(p_arr, g_arr)[0])

    @given(p=st.integers(2, 10 ** 15), g=st.integers(1, 10 ** 6))
    def test_scalar_check_matches_mask(self, p, g):
        mask = andrica_mask(np.array([p], dtype=np.int64), np.array([g], dtype=np.int64))
        assert andrica_holds(p, p + g) == bool(mask[0])

    def test_scalar_check(self):
        assert andrica_holds(7, 11)
        assert andrica_holds(16, 24)
        assert not andrica_holds(16, 25)
        with pytest.raises(ArgumentOrderError):
            andrica_holds(11, 7)


class TestExamples:
    def test_andrica_to_a_million(self):
        outcome = check_claim("ANDRICA", 1_000_000)
        assert outcome.violations == 0
        assert outcome.checked_n == 78497
        assert outcome.first_violation is None
        assert outcome.satisfied_fraction == 1.0

    def test_avg_monotone_to_a_hundred(self):
        outcome = check_claim(ClaimId.AVG_MONOTONE, 100)
        # h_bar_2 = (sqrt 5 - sqrt 2) / 2 already exceeds h_bar_1 = sqrt 3 - sqrt 2
        assert outcome.first_violation.n == 2
        assert outcome.first_violation.lhs == pytest.approx((math.sqrt(5) - math.sqrt(2)) / 2)
        assert outcome.first_violation.rhs == pytest.approx(math.sqrt(3) - math.sqrt(2))
        assert 4 in outcome.violation_head
        assert 3 not in outcome.violation_head
        assert outcome.checked_n == 23  # n = 1 has no predecessor

    def test_average_at_four_rises(self):
        h_bar_3 = (math.sqrt(7) - math.sqrt(2)) / 3
        h_bar_4 = (math.sqrt(11) - math.sqrt(2)) / 4
        assert h_bar_3 == pytest.approx(0.410513, abs=1e-6)
        assert h_bar_4 == pytest.approx(0.475602, abs=1e-6)
        assert h_bar_4 > h_bar_3

    def test_h_lt_avg_fails_at_one_by_equality(self):
        outcome = check_claim(ClaimId.H_LT_AVG, 100)
        assert outcome.first_violation.n == 1
        assert outcome.first_violation.lhs == outcome.first_violation.rhs
        assert 2 in outcome.violation_head

    def test_gap_lt_2ln_fails_early(self):
        outcome = check_claim(ClaimId.GAP_LT_2LN, 100)
        assert outcome.violation_head[:2] == [1, 2]

    def test_ten_thousand(self, ten_thousand):
        for tag in ("ANDRICA", "ANDRICA_GAP_FORM", "AVG_IN_UNIT", "HBAR_SIMPLE_BOUND",
                    "AVG_ASYMPTOTIC", "GBAR_ASYMPTOTIC"):
            assert ten_thousand[tag].violations == 0, tag
        for tag in ("AVG_MONOTONE", "H_LT_AVG", "GAP_LT_2LN"):
            assert ten_thousand[tag].violations > 0, tag
        gbar = ten_thousand["GBAR_LT_N"]
        assert gbar.violations == 1
        assert gbar.first_violation.n == 1

    def test_bands_are_reported(self, ten_thousand):
        assert ten_thousand["AVG_ASYMPTOTIC"].band == (0.9, 1.2)
        assert ten_thousand["GBAR_ASYMPTOTIC"].band == (1.0, 1.4)
        assert ten_thousand["ANDRICA"].band is None
        assert ten_thousand["AVG_ASYMPTOTIC"].checked_n == 1229 - 1 - 999

    def test_narrow_band_fails(self):
        settings = LedgerSettings(band=(1.1, 1.2))
        outcome = check_claim(ClaimId.AVG_ASYMPTOTIC, 100_000, settings)
        assert outcome.violations > 0
        assert outcome.first_violation.rhs == 1.1

    def test_smallest_limit(self):
        outcomes = by_claim(verify_all(3))
        assert outcomes["ANDRICA"].checked_n == 1
        assert outcomes["AVG_MONOTONE"].checked_n == 0
        assert outcomes["AVG_MONOTONE"].satisfied_fraction == 1.0
        assert outcomes["AVG_ASYMPTOTIC"].checked_n == 0

    @pytest.mark.parametrize("limit", [2, 0])
    def test_limit_too_small(self, limit):
        with pytest.raises(DomainError):
            verify_all(limit)

    def test_no_unexpected_failures(self):
        assert unexpected_failures(verify_all(100_000)) == []


def oracle_predicates(n, p, q, g):
    """Each claim decided at 40 digits from one trial-division pair; None when n is not checked"""
    sqrt_q, sqrt_p, root2 = mpmath.sqrt(q), mpmath.sqrt(p), mpmath.sqrt(2)
    h = sqrt_q - sqrt_p
    h_bar = (sqrt_q - root2) / n
    prev_h_bar = (sqrt_p - root2) / (n - 1) if n > 1 else None
    g_bar = mpmath.mpf(q - 2) / n
    ln_n = mpmath.log(n)
    banded = n >= Config.BAND_START
    avg_scaled = h_bar * mpmath.sqrt(n / ln_n) if banded else None
    gbar_scaled = g_bar / ln_n if banded else None
    return {
        ClaimId.ANDRICA: h < 1,
        ClaimId.ANDRICA_GAP_FORM: g < 1 + 2 * sqrt_p,
        ClaimId.AVG_IN_UNIT: 0 < h_bar < 1,
        ClaimId.AVG_MONOTONE: None if prev_h_bar is None else h_bar < prev_h_bar,
        ClaimId.H_LT_AVG: h < h_bar,
        ClaimId.GAP_LT_2LN: g < 2 * ln_n,
        ClaimId.AVG_ASYMPTOTIC: None if not banded else Config.AVG_BAND[0] <= avg_scaled <= Config.AVG_BAND[1],
        ClaimId.GBAR_LT_N: g_bar < n,
        ClaimId.HBAR_SIMPLE_BOUND: h_bar < 1 - (root2 - 1) / n,
        ClaimId.GBAR_ASYMPTOTIC: None if not banded else Config.GBAR_BAND[0] <= gbar_scaled <= Config.GBAR_BAND[1],
    }


class TestAgainstTrialDivision:
    @pytest.fixture(scope="class")
    def expected(self, oracle_gaps):
        checked = {c: 0 for c in ClaimId}
        violations = {c: [] for c in ClaimId}
        with mpmath.workdps(40):
            for n, p, q, g, *_ in oracle_gaps:
                for claim, holds in oracle_predicates(n, p, q, g).items():
                    if holds is None:
                        continue
                    checked[claim] += 1
                    if not holds:
                        violations[claim].append(n)
        return checked, violations

    @pytest.fixture(scope="class")
    def outcomes(self, oracle_primes):
        return by_claim(verify_all(oracle_primes[-1]))

    @pytest.mark.parametrize("claim", list(ClaimId))
    def test_claim_matches_oracle(self, claim, expected, outcomes):
        checked, violations = expected
        outcome = outcomes[claim.value]
        assert outcome.checked_n == checked[claim]
        assert outcome.violations == len(violations[claim])
        assert outcome.violation_head == violations[claim][:VIOLATION_SAMPLE]
        if violations[claim]:
            assert outcome.first_violation.n == violations[claim][0]
        else:
            assert outcome.first_violation is None

    def test_known_counts(self, outcomes):
        counts = {tag: o.violations for tag, o in outcomes.items()}
        assert counts["ANDRICA"] == counts["ANDRICA_GAP_FORM"] == 0
        assert counts["AVG_MONOTONE"] == 1336
        assert counts["H_LT_AVG"] == 1337
        assert counts["GAP_LT_2LN"] == 1851


class TestSinglePass:
    def test_matches_individual_checks(self, ten_thousand):
        for claim in ClaimId:
            assert check_claim(claim, 10_000).model_dump() == ten_thousand[claim.value].model_dump()

    def test_segment_size_invariance(self, ten_thousand):
        small = by_claim(verify_all(10_000, segment_size=64))
        for tag, outcome in ten_thousand.items():
            assert (small[tag].checked_n, small[tag].violations, small[tag].violation_head) == \
                (outcome.checked_n, outcome.violations, outcome.violation_head)

    def test_fold_carries_record_tracker(self):
        fold = ClaimFold().run(1_000_000)
        assert fold.tracker.total == fold.stats.n == 78497
        assert fold.tracker.max_h_events[-1][0] == 4
        assert fold.tracker.min_prefix_surplus >= 0


class TestAccumulator:
    def test_merge_matches_single_run(self):
        chunks = list(gap_chunks(5000, segment_size=128))
        half = len(chunks) // 2
        fold = ClaimFold([ClaimId.AVG_MONOTONE])
        first, second = ClaimAccumulator(claim="AVG_MONOTONE"), ClaimAccumulator(claim="AVG_MONOTONE")
        for i, chunk in enumerate(chunks):
            stats = fold.stats.fold(chunk)
            checked, ok, lhs, rhs = PREDICATES[ClaimId.AVG_MONOTONE](chunk, stats, fold.settings)
            target = first if i < half else second
            target.add(chunk.n[checked], ok[checked], lhs[checked], rhs[checked])
        merged = first.merge(second)
        whole = check_claim(ClaimId.AVG_MONOTONE, 5000)
        assert merged.outcome().model_dump() == whole.model_dump()

    def test_violation_head_is_bounded(self):
        outcome = check_claim(ClaimId.H_LT_AVG, 100_000)
        assert outcome.violations > 16
        assert len(outcome.violation_head) == 16
        assert outcome.violation_head == sorted(outcome.violation_head)

    def test_empty_outcome(self):
        outcome = ClaimAccumulator(claim="ANDRICA").outcome()
        assert outcome.checked_n == 0
        assert outcome.satisfied_fraction == 1.0


class TestParallelReduction:
    def fold_state(self, fold):
        return (
            fold.stats.n, fold.stats.sum_g, fold.stats.last_prime, fold.stats.sum_h.state(),
            fold.tracker.model_dump(),
            {c: a.model_dump() for c, a in fold.accumulators.items()},
        )

    def test_threads_do_not_change_the_fold(self):
        single = ClaimFold().run(1_000_000, segment_size=1 << 14, threads=1)
        pooled = ClaimFold().run(1_000_000, segment_size=1 << 14, threads=4)
        assert self.fold_state(pooled) == self.fold_state(single)

    def test_partials_built_out_of_order_combine_in_order(self):
        fold = ClaimFold()
        chunks = list(gap_chunks(20_000, segment_size=256))
        partials = [chunk_partial(c, fold.claims, fold.settings) for c in reversed(chunks)]
        for partial in reversed(partials):
            fold.combine(partial)
        assert self.fold_state(fold) == self.fold_state(ClaimFold().run(20_000, segment_size=256))

    def test_partial_covers_only_prefix_free_claims(self):
        chunk = next(gap_chunks(1000, segment_size=64))
        partial = chunk_partial(chunk, list(ClaimId), LedgerSettings())
        assert set(partial.accumulators) == PREFIX_FREE
        assert partial.tracker.first_n == chunk.first_n
        assert partial.tracker.total == len(chunk)

    def test_combine_rejects_a_skipped_chunk(self):
        fold = ClaimFold()
        chunks = list(gap_chunks(1000, segment_size=64))
        fold.combine(chunk_partial(chunks[0], fold.claims, fold.settings))
        with pytest.raises(ContiguityError):
            fold.combine(chunk_partial(chunks[2], fold.claims, fold.settings))


class TestCheckpointHook:
    def test_called_every_n_chunks(self):
        chunk_count = len(list(gap_chunks(100_000, segment_size=1024)))
        seen = []
        ClaimFold().run(100_000, segment_size=1024, checkpoint=lambda f: seen.append(f.stats.n),
                        checkpoint_every=5)
        assert len(seen) == chunk_count // 5
        assert seen == sorted(set(seen))

    def test_never_called_without_interval(self):
        seen = []
        ClaimFold().run(100_000, segment_size=1024, checkpoint=seen.append)
        assert seen == []


@pytest.mark.slow
class TestDeskScale:
    def test_hundred_million(self):
        fold = ClaimFold().run(100_000_000)
        outcomes = by_claim(fold.outcomes())
        assert fold.stats.n == 5761454
        assert outcomes["ANDRICA"].violations == 0
        assert outcomes["AVG_ASYMPTOTIC"].violations == 0
        assert unexpected_failures(fold.outcomes()) == []
        assert fold.tracker.max_h_events[-1][0] == 4
        assert fold.tracker.count_h_below_one == fold.tracker.total
