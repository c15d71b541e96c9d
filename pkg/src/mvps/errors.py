"""Exception hierarchy shared by every module."""


class MVPSError(ValueError):
    """Base class for domain errors; the CLI maps these to exit code 2."""


class ZeroMass(MVPSError):
    pass


class SpaceMismatch(MVPSError):
    pass


class BadCoefficients(MVPSError):
    pass


class NegativeEntries(MVPSError):
    pass


class EmptyPositivePart(MVPSError):
    pass


class PositiveSupportRequired(MVPSError):
    pass


class BadPartition(MVPSError):
    pass


class BadNullSet(MVPSError):
    pass


class HypothesisViolated(MVPSError):
    pass


class FiniteOnly(MVPSError):
    pass


class BadQ(MVPSError):
    pass


class TooLarge(MVPSError):
    pass


class SamplerFailure(MVPSError):
    pass


class ConfigError(MVPSError):
    pass
