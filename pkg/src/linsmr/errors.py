"""Exception hierarchy for linsmr"""

from typing import Optional


class LinSmrError(Exception):
    """Base class for every error raised by linsmr."""


class MalformedHistory(LinSmrError):
    """A history violates the well-formedness rules."""

    def __init__(self, message: str, event_id: Optional[int] = None):
        self.event_id = event_id
        if event_id is not None:
            message = f"{message} (event {event_id})"
        super().__init__(message)


class ClientOverlapViolation(MalformedHistory):
    """A timeline extension made two operations of one client overlap."""


class UnknownOp(LinSmrError):
    """An operation id is not present in the history."""


class MalformedInput(LinSmrError):
    """Input handed to a checker or assembler does not meet its preconditions."""


class BudgetExhausted(LinSmrError):
    """A checker explored more search states than its budget allows."""


class UnknownSpec(LinSmrError):
    """No built-in specification is registered under the requested name."""


class UnknownScenario(LinSmrError):
    """No scenario is registered under the requested name."""


class ParseError(LinSmrError):
    """DSL source could not be parsed."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnbalancedLocks(LinSmrError):
    """Lock and unlock instructions are not properly nested and balanced."""


class WaitWithoutLock(LinSmrError):
    """A wait names a lock the thread does not hold."""


class UnprotectedAccess(LinSmrError):
    """A shared variable is read or written outside every lock."""


class UnsupportedProgram(LinSmrError):
    """A program cannot be turned into an effect specification."""


class ConfigInvalid(LinSmrError):
    """A simulation or scenario configuration is invalid."""


class OutOfSpecRun(LinSmrError):
    """The fault plan exceeds the tolerated number of faults in strict mode."""


class DeadlockDetected(LinSmrError):
    """No thread can run while waits or lock requests are still pending."""


class DuplicateReplicaResponse(LinSmrError):
    """A replica answered the same request twice."""
