"""Exception hierarchy shared by the protocol, harness and CLI layers."""


class QpsiError(Exception):
    """Base class for all simulator errors."""


class ElementNotInUniverse(QpsiError, ValueError):
    def __init__(self, missing):
        self.missing = tuple(sorted(missing))
        super().__init__(f"elements not in universe: {list(self.missing)}")


class LengthMismatch(QpsiError, ValueError):
    pass


class PreconditionViolated(QpsiError, ValueError):
    pass


class NoCloningViolation(QpsiError, RuntimeError):
    """Raised when a quantum sequence handle is used after it was sent."""


class DetectionFailure(QpsiError):
    """Decoy verification found a particle that does not match its preparation.

    Carries the first mismatching decoy record and the observed outcome.
    """

    def __init__(self, record, observed, mismatches=1):
        self.record = record
        self.observed = observed
        self.mismatches = mismatches
        super().__init__(
            f"decoy at transit position {record.position} prepared as "
            f"{record.prep.name} measured as {observed.name} "
            f"({mismatches} mismatching decoy(s))"
        )
