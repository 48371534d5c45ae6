"""
Shared fixtures: an independent trial-division oracle and hypothesis profiles.

Run the 10^8 desk-scale checks with:  pytest -m slow
"""
import math
import os

import hypothesis
import pytest

hypothesis.settings.register_profile("fast", max_examples=10)
hypothesis.settings.register_profile("thorough", max_examples=500, deadline=None)
hypothesis.settings.register_profile("default", deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))


ORACLE_LIMIT = 100_000


def trial_division_primes(limit: int) -> list:
    """Primes <= limit, each confirmed by division by the smaller primes"""
    primes = []
    for candidate in range(2, limit + 1):
        root = math.isqrt(candidate)
        for p in primes:
            if p > root:
                primes.append(candidate)
                break
            if candidate % p == 0:
                break
        else:
            primes.append(candidate)
    return primes


@pytest.fixture(scope="session")
def oracle_primes():
    """Trial-division primes up to ORACLE_LIMIT"""
    return trial_division_primes(ORACLE_LIMIT)


@pytest.fixture(scope="session")
def oracle_gaps(oracle_primes):
    """(n, p, q, g, h, sum_g, h_bar) computed directly from the oracle primes"""
    rows = []
    sum_g = 0
    for n, (p, q) in enumerate(zip(oracle_primes, oracle_primes[1:]), start=1):
        g = q - p
        sum_g += g
        h = math.sqrt(q) - math.sqrt(p)
        h_bar = (math.sqrt(q) - math.sqrt(2)) / n
        rows.append((n, p, q, g, h, sum_g, h_bar))
    return rows
