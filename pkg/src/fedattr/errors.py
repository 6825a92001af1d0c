"""Exception hierarchy."""


class FedAttrError(Exception):
    """Base class for all package errors."""


class ConfigError(FedAttrError, ValueError):
    """Invalid protocol or experiment configuration."""


class WeightSumError(ConfigError):
    pass


class SubsetSizeError(ConfigError):
    pass


class DimensionError(FedAttrError, ValueError):
    pass


class AuthorizationError(FedAttrError, PermissionError):
    """Subset-sum query below the secure-aggregation threshold."""


class UnknownClient(FedAttrError, KeyError):
    pass


class RetryLimitExceeded(FedAttrError, RuntimeError):
    pass


class DegenerateError(FedAttrError, ValueError):
    pass


class EmptyCorpus(FedAttrError, ValueError):
    pass


class NoParticipation(FedAttrError, ValueError):
    pass


class ThresholdInfeasible(FedAttrError, ValueError):
    """The threshold window sqrt(T)*eps < gamma < sqrt(T)*m is empty."""


class InsufficientSamples(FedAttrError, ValueError):
    pass
