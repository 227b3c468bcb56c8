"""Exception types raised by htdp.

All validation errors derive from :class:`HTDPError`, itself a ``ValueError``,
so callers that only care about bad input can catch one type. The CLI maps
every :class:`HTDPError` to exit code 2.
"""


class HTDPError(ValueError):
    """Base class for all htdp validation and computation errors."""

    code = "HTDPError"


class NegativeProbability(HTDPError):
    code = "NegativeProbability"


class ProbabilitiesDoNotSumToOne(HTDPError):
    code = "ProbabilitiesDoNotSumToOne"


class DuplicateSample(HTDPError):
    code = "DuplicateSample"


class InvalidDesign(HTDPError):
    code = "InvalidDesign"


class EnumerationTooLarge(HTDPError):
    """Raised when a design would need more support samples than allowed."""

    code = "EnumerationTooLarge"


class InvalidDataset(HTDPError):
    code = "InvalidDataset"


class InvalidPair(HTDPError):
    code = "InvalidPair"


class ZeroInclusionProbabilityInSample(HTDPError):
    code = "ZeroInclusionProbabilityInSample"


class MismatchedScales(HTDPError):
    code = "MismatchedScales"


class ZeroScale(HTDPError):
    code = "ZeroScale"


class InvalidDelta(HTDPError):
    code = "InvalidDelta"


class EmptyPairList(HTDPError):
    code = "EmptyPairList"


class NoFeasiblePair(HTDPError):
    code = "NoFeasiblePair"


class TotalOutOfRange(HTDPError):
    code = "TotalOutOfRange"


class InvalidConfig(HTDPError):
    code = "InvalidConfig"


class Infeasible(HTDPError):
    """No Laplace scale below the cap reaches the requested privacy level."""

    code = "Infeasible"


class DegenerateInclusion(HTDPError):
    code = "DegenerateInclusion"


class InvalidTrials(HTDPError):
    code = "InvalidTrials"


class SchemaViolation(HTDPError):
    code = "SchemaViolation"


class NonMonotoneDeltaInB(UserWarning):
    """Warning: the scanned delta(eps; b) curve increased somewhere in b."""
