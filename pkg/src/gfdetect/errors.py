"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """An argument violates a documented precondition."""


class SingularSystemError(ValueError):
    """A linear system required by an estimator is (numerically) singular."""


class ConditionViolatedError(ValueError):
    """A hypothesis required by a theoretical bound does not hold."""


class ConfigError(ValueError):
    """An experiment configuration is inconsistent or unparseable."""
