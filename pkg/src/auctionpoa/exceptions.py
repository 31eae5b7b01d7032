"""Exception hierarchy shared by every module."""


class EpoaError(Exception):
    """Base class for all package errors."""


class ParseError(EpoaError, ValueError):
    def __init__(self, line, reason):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class ValidationError(EpoaError, ValueError):
    def __init__(self, record_id, reason):
        self.record_id = record_id
        self.reason = reason
        super().__init__(f"record {record_id!r}: {reason}")


class MalformedContext(ValidationError):
    pass


class SpecError(EpoaError, ValueError):
    pass


class BidCapTooLow(EpoaError):
    """The bid cap does not guarantee a bidder the top slot in every auction."""

    def __init__(self, bidder, achieved, required):
        self.bidder = bidder
        self.achieved = achieved
        self.required = required
        super().__init__(
            f"bid cap too low for bidder {bidder!r}: allocation at the cap is "
            f"{achieved:.6g}, maximum possible is {required:.6g}"
        )


class NeverAllocated(EpoaError):
    def __init__(self, bidder):
        self.bidder = bidder
        super().__init__(f"bidder {bidder!r} is never allocated at any grid bid")


class OutOfRange(EpoaError, ValueError):
    pass


class ZeroRevenue(EpoaError):
    pass


class EmptyBidderSet(EpoaError):
    pass


class NonPositiveMu(EpoaError, ValueError):
    pass


class DomainError(EpoaError, ValueError):
    pass
