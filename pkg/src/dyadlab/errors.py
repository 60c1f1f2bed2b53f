"""Exception types raised across the package."""


class DyadlabError(Exception):
    """Base class for all errors raised by dyadlab."""


class OutOfTree(DyadlabError):
    pass


class InvalidIndex(DyadlabError):
    pass


class TreeTooShallow(DyadlabError):
    pass


class UnsupportedTree(DyadlabError):
    pass


class BackendMismatch(DyadlabError):
    pass


class UnsupportedShift(DyadlabError):
    pass


class InvalidExponent(DyadlabError):
    pass


class Divergence(DyadlabError):
    pass


class NoExponent(DyadlabError):
    pass


class NegativeInput(DyadlabError):
    pass


class HeightTooLow(DyadlabError):
    pass


class RecursionBudgetExceeded(DyadlabError):
    pass


class NoConvergence(DyadlabError):
    """Carries the best estimate reached before giving up."""

    def __init__(self, message: str, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class ZeroFunction(DyadlabError):
    pass


class AtomicMeasure(DyadlabError):
    """Raised when a check that needs an atomless measure receives one flagged atomic."""


class CertificateViolation(DyadlabError):
    """A decomposition certificate failed one of its properties."""


class ConfigError(DyadlabError):
    pass


class CheckFailure(DyadlabError):
    pass


class UnknownScenario(DyadlabError):
    pass
