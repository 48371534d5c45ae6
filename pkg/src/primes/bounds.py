"""
Explicit bounds for the k-th prime and a sweep that checks them.

Each bound carries its own applicability start and relation:

    rosser          p_k >  k ln k                                   k >= 1
    bracket86       k(ln k + lnln k - 1) < p_k < k(ln k + lnln k)   k >= 6
    dusart_lower    p_k >= k(ln k + lnln k - 1 + (lnln k - 2.1)/ln k)   k >= 3
    dusart_upper    p_k <= k(ln k + lnln k - 1 + (lnln k - 2)/ln k)     k >= 688383
    square          p_k <  k^2                                      k >= 2

k = 1 breaks the square bound (p_1 = 2 > 1); the sweep starts it at 2 unless
told otherwise.
"""
import logging
from enum import Enum
from typing import Dict, Iterable, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field

from src.config import Config
from src.errors import DomainError
from src.primes.sieve import SMALL_PRIMES, nth_prime_upper_bound, prime_array

logger = logging.getLogger(__name__)


class BoundId(str, Enum):
    ROSSER = "rosser"
    BRACKET86_LOWER = "bracket86_lower"
    BRACKET86_UPPER = "bracket86_upper"
    DUSART_LOWER = "dusart_lower"
    DUSART_UPPER = "dusart_upper"
    SQUARE = "square"


# bound -> (first applicable k, relation p_k must satisfy against the bound)
BOUND_DOMAINS = {
    BoundId.ROSSER: (1, ">"),
    BoundId.BRACKET86_LOWER: (6, ">"),
    BoundId.BRACKET86_UPPER: (6, "<"),
    BoundId.DUSART_LOWER: (3, ">="),
    BoundId.DUSART_UPPER: (688383, "<="),
    BoundId.SQUARE: (2, "<"),
}


def rosser_lower(k):
    return k * np.log(k)


def simple_estimate(k):
    """The asymptotic stand-in p_k ~ k ln k"""
    return k * np.log(k)


def bracket86_lower(k):
    return k * (np.log(k) + np.log(np.log(k)) - 1)


def bracket86_upper(k):
    return k * (np.log(k) + np.log(np.log(k)))


def dusart_lower(k):
    ln = np.log(k)
    lnln = np.log(ln)
    return k * (ln + lnln - 1 + (lnln - 2.1) / ln)


def dusart_upper(k):
    ln = np.log(k)
    lnln = np.log(ln)
    return k * (ln + lnln - 1 + (lnln - 2) / ln)


EVALUATORS = {
    BoundId.ROSSER: rosser_lower,
    BoundId.BRACKET86_LOWER: bracket86_lower,
    BoundId.BRACKET86_UPPER: bracket86_upper,
    BoundId.DUSART_LOWER: dusart_lower,
    BoundId.DUSART_UPPER: dusart_upper,
}


class BoundEvaluation(BaseModel):
    """All bound expressions at one k; None where k is outside the bound's domain"""
    k: int
    p_k: int
    rosser_lower: float
    bracket86_lower: Optional[float] = None
    bracket86_upper: Optional[float] = None
    dusart_lower: Optional[float] = None
    dusart_upper: Optional[float] = None
    square_upper: Optional[int] = None
    simple: float


class BoundViolation(BaseModel):
    bound_id: BoundId
    k: int
    p_k: int
    bound_value: float
    kind: Literal["violation", "indeterminate"]


class BoundReport(BaseModel):
    k_max: int
    square_from: int
    checked: Dict[BoundId, int] = Field(default_factory=dict)
    violations: List[BoundViolation] = Field(default_factory=list)

    @property
    def hard_violations(self) -> List[BoundViolation]:
        return [v for v in self.violations if v.kind == "violation"]


def _applies(bound: BoundId, k: int) -> bool:
    return k >= BOUND_DOMAINS[bound][0]


def evaluate_bounds(k: int, p_k: int) -> BoundEvaluation:
    """
    Evaluate every bound expression at k.

    Args:
        k: prime index, k >= 1
        p_k: the k-th prime (trusted, not re-derived)
    """
    if k < 1:
        raise DomainError(f"evaluate_bounds needs k >= 1, got {k}")
    values = {
        bound.value: float(evaluator(float(k)))
        for bound, evaluator in EVALUATORS.items()
        if _applies(bound, k)
    }
    return BoundEvaluation(
        k=k,
        p_k=p_k,
        rosser_lower=values[BoundId.ROSSER.value],
        bracket86_lower=values.get(BoundId.BRACKET86_LOWER.value),
        bracket86_upper=values.get(BoundId.BRACKET86_UPPER.value),
        dusart_lower=values.get(BoundId.DUSART_LOWER.value),
        dusart_upper=values.get(BoundId.DUSART_UPPER.value),
        square_upper=k * k if _applies(BoundId.SQUARE, k) else None,
        simple=float(simple_estimate(float(k))),
    )


def first_primes(count: int, segment_size: int = Config.SEGMENT_SIZE, threads: int = 1) -> np.ndarray:
    """p_1 .. p_count as an int64 array"""
    if count < 6:
        return np.array(SMALL_PRIMES[:count], dtype=np.int64)
    primes = prime_array(nth_prime_upper_bound(count), segment_size, threads)
    return primes[:count]


def _sweep_float(bound: BoundId, k: np.ndarray, p: np.ndarray) -> List[BoundViolation]:
    relation = BOUND_DOMAINS[bound][1]
    value = EVALUATORS[bound](k.astype(np.float64))
    pf = p.astype(np.float64)
    if relation == ">":
        failed, excess = ~(pf > value), value - pf
    elif relation == ">=":
        failed, excess = ~(pf >= value), value - pf
    elif relation == "<":
        failed, excess = ~(pf < value), pf - value
    else:
        failed, excess = ~(pf <= value), pf - value

    found = []
    for i in np.flatnonzero(failed):
        kind = "violation" if excess[i] > np.spacing(value[i]) else "indeterminate"
        found.append(BoundViolation(bound_id=bound, k=int(k[i]), p_k=int(p[i]),
                                    bound_value=float(value[i]), kind=kind))
    return found


def check_bounds(k_max: int, bounds: Optional[Iterable[BoundId]] = None, square_from: int = 2,
                 segment_size: int = Config.SEGMENT_SIZE, threads: int = 1) -> BoundReport:
    """
    Check each selected bound for every applicable k <= k_max.

    A failure within one ulp of the bound value is reported as indeterminate
    rather than as a violation.
    """
    if k_max < 1:
        raise DomainError(f"check_bounds needs k_max >= 1, got {k_max}")
    selected = list(bounds) if bounds is not None else list(BoundId)
    primes = first_primes(k_max, segment_size, threads)
    ks = np.arange(1, k_max + 1, dtype=np.int64)
    report = BoundReport(k_max=k_max, square_from=square_from)

    for bound in selected:
        start = square_from if bound is BoundId.SQUARE else BOUND_DOMAINS[bound][0]
        if start > k_max:
            report.checked[bound] = 0
            continue
        k = ks[start - 1:]
        p = primes[start - 1:]
        report.checked[bound] = len(k)
        if bound is BoundId.SQUARE:
            for i in np.flatnonzero(p >= k * k):
                report.violations.append(BoundViolation(
                    bound_id=bound, k=int(k[i]), p_k=int(p[i]),
                    bound_value=float(k[i] * k[i]), kind="violation"))
        else:
            report.violations.extend(_sweep_float(bound, k, p))
        logger.info("bound %s checked for k in [%d, %d]", bound.value, start, k_max)

    report.violations.sort(key=lambda v: (v.k, v.bound_id.value))
    return report
