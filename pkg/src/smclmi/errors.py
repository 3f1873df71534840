"""Exception types shared across the package."""


class SmcError(Exception):
    """Base class for all errors raised by smclmi."""


class ConfigurationError(SmcError, ValueError):
    pass


class EquivalentControlSingular(SmcError, ZeroDivisionError):
    def __init__(self, denominator, message=None):
        self.denominator = denominator
        super().__init__(message or f"equivalent control undefined: m.(Cx + D) = {denominator!r}")


class DomainError(SmcError, ValueError):
    pass


class NoEquilibrium(SmcError, RuntimeError):
    pass


class Infeasible(SmcError, RuntimeError):
    def __init__(self, message, max_eig=None):
        self.max_eig = max_eig
        super().__init__(message)


class IllConditionedTransform(SmcError, RuntimeError):
    pass


class EventLocalizationFailure(SmcError, RuntimeError):
    pass


class ZenoError(SmcError, RuntimeError):
    pass


class DivergenceError(SmcError, RuntimeError):
    pass


class UnsupportedSurface(SmcError, ValueError):
    pass


class NoCrossing(SmcError, LookupError):
    pass
