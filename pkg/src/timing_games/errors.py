"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class TimingGameError(Exception):
    """Base class for all errors raised by this package."""


class EmptyInput(TimingGameError, ValueError):
    pass


class NonFiniteSample(TimingGameError, ValueError):
    pass


class QuantileOutOfRange(TimingGameError, ValueError):
    pass


class WeiOverflow(TimingGameError, OverflowError):
    pass


class InvalidSlotTime(TimingGameError, ValueError):
    pass


class InvalidBid(TimingGameError, ValueError):
    pass


class NoEligibleBids(TimingGameError, LookupError):
    pass


class BidNotInAuction(TimingGameError, LookupError):
    pass


class MissingEligibility(TimingGameError, ValueError):
    """A bid without an eligibility time reached an operation that needs one."""


class NoBaselineBid(TimingGameError, LookupError):
    pass


class ZeroBaselineValue(NoBaselineBid):
    """The baseline winner exists but bids zero, so a relative uplift is undefined."""


class AllDrawsSkipped(TimingGameError, RuntimeError):
    pass


class AllRunsDegenerate(TimingGameError, RuntimeError):
    pass


class GasAboveLimit(TimingGameError, ValueError):
    pass


class UnknownFormat(TimingGameError, ValueError):
    pass


class MalformedRecord(TimingGameError, ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class ConfigError(TimingGameError, ValueError):
    pass
