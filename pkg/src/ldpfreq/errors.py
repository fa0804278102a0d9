"""Exception and warning types raised across ldpfreq."""


class LDPError(ValueError):
    """Base class for all ldpfreq errors."""


class InvalidBudget(LDPError):
    pass


class InvalidDomain(LDPError):
    pass


class OutOfDomain(LDPError):
    pass


class DegenerateSubset(LDPError):
    pass


class DegenerateChannel(LDPError):
    pass


class InfeasibleBudget(LDPError):
    pass


class InvalidSampleSize(LDPError):
    pass


class EmptyReportSet(LDPError):
    pass


class MixedReportTypes(LDPError):
    pass


class ShapeMismatch(LDPError):
    pass


class OutputSpaceTooLarge(LDPError):
    pass


class InvalidDistributionParam(LDPError):
    pass


class InvalidConfig(LDPError):
    pass


class EmptyGroupWarning(UserWarning):
    """Some value or attribute received no reports; its estimate was set to zero."""
