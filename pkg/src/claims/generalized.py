"""
Andrica's inequality with a general exponent x in (0, 1):

    h^(x)_n = p_{n+1}^x - p_n^x < 1

and the threshold n0 beyond which ln n < n^b, b = 1/x - 1, holds for every
integer. The real function n^b - ln n stays positive on n >= 1 exactly when
b > 1/e; below that it dips under zero on an interval whose right end is the
largest root of t = e^(b t) with n = e^t.
"""
import logging
import math
from typing import List, Optional

import mpmath
import numpy as np
from pydantic import BaseModel

from src.claims.ledger import ClaimAccumulator, ClaimOutcome
from src.config import Config
from src.errors import ArgumentOrderError, ConvergenceError, DomainError
from src.primes.gaps import gap_chunks

logger = logging.getLogger(__name__)

TANGENCY = 1 / math.e
MAX_BRACKET_DOUBLINGS = 64
SCAN_PRECISION = 50  # decimal digits for the integer confirmation scan
FULL_SCAN_LIMIT = 10_000


class ExponentAnalysis(BaseModel):
    x: float
    b: float
    n0: Optional[int] = None
    always_holds: bool
    tangent: bool
    real_crossing: Optional[float] = None
    log_crossing: Optional[float] = None
    last_failure: Optional[int] = None
    exceeds_range: bool = False


def _check_exponent(x: float) -> None:
    if not 0 < x < 1:
        raise DomainError(f"exponent x must lie in (0, 1), got {x}")


def critical_exponent() -> float:
    """x at which b = 1/x - 1 equals 1/e"""
    return 1 / (1 + TANGENCY)


def h_general(p: int, q: int, x: float) -> float:
    """q^x - p^x as p^x * expm1(x ln(q/p)), free of cancellation"""
    _check_exponent(x)
    if p < 2 or q <= p:
        raise ArgumentOrderError(f"h_general needs q > p >= 2, got p={p}, q={q}")
    return float(p) ** x * math.expm1(x * math.log1p((q - p) / p))


def h_general_array(p: np.ndarray, g: np.ndarray, x: float) -> np.ndarray:
    pf = p.astype(np.float64)
    return pf ** x * np.expm1(x * np.log1p(g / pf))


def _largest_crossing(b: float) -> float:
    """
    Largest root t of t = e^(b t) for 0 < b <= 1/e, by bisection on
    G(t) = b t - ln t (same sign as e^(b t) - t, no overflow).
    """
    def G(t: float) -> float:
        return b * t - math.log(t)

    lo, hi = math.e, 2 * math.e
    for _ in range(MAX_BRACKET_DOUBLINGS):
        if G(hi) > 0:
            break
        lo, hi = hi, 2 * hi
    else:
        raise ConvergenceError(f"could not bracket the crossing for b={b}")

    for i in range(Config.BISECTION_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if G(mid) > 0:
            hi = mid
        else:
            lo = mid
    logger.debug("bisection for b=%g stopped after %d steps at t=%r", b, i + 1, hi)
    return hi


def _log_below_power(n: int, b) -> bool:
    return mpmath.log(n) < mpmath.power(n, b)


def _confirm_threshold(estimate: int, x: float) -> tuple:
    """
    Scan integers around the real crossing at high precision.

    Returns:
        (n0, last failing integer or None)
    """
    with mpmath.workdps(SCAN_PRECISION):
        b = 1 / mpmath.mpf(x) - 1
        lower = max(1, estimate - Config.N0_SCAN_BELOW)
        upper = estimate + Config.N0_SCAN_ABOVE
        failures = [n for n in range(lower, upper + 1) if not _log_below_power(n, b)]
        if not failures and lower > 1:
            if lower > FULL_SCAN_LIMIT:
                raise ConvergenceError(f"no failing integer near the crossing {estimate}")
            failures = [n for n in range(1, lower) if not _log_below_power(n, b)]
    if not failures:
        return 1, None
    last = max(failures)
    return last + 1, last


def threshold_n0(x: float) -> ExponentAnalysis:
    """
    Smallest N with ln n < n^b for every integer n >= N, where b = 1/x - 1.
    """
    _check_exponent(x)
    b = 1 / x - 1
    tangent = abs(b - TANGENCY) <= Config.TANGENT_TOLERANCE
    if b > TANGENCY:
        return ExponentAnalysis(x=x, b=b, n0=1, always_holds=True, tangent=tangent)

    t = _largest_crossing(b)
    real = math.exp(t) if t < math.log(Config.MAX_PRIME) else None
    if real is None:
        logger.info("crossing for x=%g lies beyond 2^63 (ln n = %g)", x, t)
        return ExponentAnalysis(x=x, b=b, always_holds=False, tangent=tangent,
                                log_crossing=t, exceeds_range=True)

    n0, last = _confirm_threshold(math.floor(real) + 1, x)
    return ExponentAnalysis(x=x, b=b, n0=n0, always_holds=False, tangent=tangent,
                            real_crossing=real, log_crossing=t, last_failure=last)


def analyze_exponents(xs: List[float]) -> List[ExponentAnalysis]:
    return [threshold_n0(x) for x in xs]


def check_generalized(x: float, limit: int, segment_size: int = Config.SEGMENT_SIZE,
                      threads: int = 1) -> ClaimOutcome:
    """h^(x)_n < 1 for every gap with p_{n+1} <= limit"""
    _check_exponent(x)
    if limit < Config.MIN_LIMIT:
        raise DomainError(f"check_generalized needs limit >= {Config.MIN_LIMIT}, got {limit}")
    accumulator = ClaimAccumulator(claim=f"ANDRICA_POWER[x={x:g}]")
    for chunk in gap_chunks(limit, segment_size, threads):
        value = h_general_array(chunk.p, chunk.g, x)
        accumulator.add(chunk.n, value < 1, value, np.ones(len(chunk)))
    return accumulator.outcome()
