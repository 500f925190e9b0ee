"""Errors raised by the solvers and the experiment drivers."""


class FerulamError(Exception):
    pass


class BelowThreshold(FerulamError, ValueError):
    """Velocity or energy is at or below the certified collision threshold."""


class NoConvergence(FerulamError, ArithmeticError):
    """The safeguarded solver missed its residual tolerance."""


class DomainError(FerulamError, ValueError):
    """Argument outside the domain of a section-coordinate map."""


class ConstructionFailed(FerulamError, RuntimeError):
    pass


class ConfigError(FerulamError, ValueError):
    pass
