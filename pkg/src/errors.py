"""
Exception hierarchy shared by the sieve, gap stream, claim ledger and CLI.

Every error derives from AndricaLabError and also from the builtin it refines,
so callers that only know about ValueError / OverflowError still catch them.
"""


class AndricaLabError(Exception):
    """Root of all toolkit errors"""


class ResourceLimitError(AndricaLabError, MemoryError):
    """Requested work exceeds the configured memory budget"""


class PlanMismatchError(AndricaLabError, ValueError):
    """Segment plan does not tile the requested range"""


class PrimeOverflowError(AndricaLabError, OverflowError):
    """A value would leave the 64-bit range"""


class DomainError(AndricaLabError, ValueError):
    """Argument outside the domain of a formula"""


class ArgumentOrderError(AndricaLabError, ValueError):
    """Prime pair given in the wrong order"""


class ContiguityError(AndricaLabError, ValueError):
    """Gap records skipped an index or did not start at n = 1"""


class EmptyTrackerError(AndricaLabError, ValueError):
    """Statistic requested from a tracker that saw no records"""


class StatsInvariantError(AndricaLabError, ArithmeticError):
    """A running-statistics invariant failed; carries the offending row"""

    def __init__(self, message: str, diagnostics: dict = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ClaimConsistencyError(AndricaLabError, ArithmeticError):
    """Two formulations of the same claim disagreed"""


class UnknownClaimError(AndricaLabError, KeyError):
    """Claim tag not in the ledger"""


class ConvergenceError(AndricaLabError, ArithmeticError):
    """Root finding could not bracket or confirm a crossing"""


class CheckpointVersionError(AndricaLabError, ValueError):
    """Checkpoint written by an incompatible schema version"""


class CheckpointCorruptionError(AndricaLabError, ValueError):
    """Checkpoint content does not match its integrity hash"""
