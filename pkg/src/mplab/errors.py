"""Exception hierarchy shared by every module of the package."""


class MPLabError(Exception):
    """Base class for all errors raised by mplab."""


# geometry
class NonOrthonormalFrame(MPLabError, ValueError):
    pass


class BadWidth(MPLabError, ValueError):
    pass


class NonCylinder(MPLabError, ValueError):
    pass


class DimensionMismatch(MPLabError, ValueError):
    pass


# operators
class NonFiniteCoefficient(MPLabError, ArithmeticError):
    pass


class UnknownPreset(MPLabError, KeyError):
    pass


# structure
class InsufficientSamples(MPLabError, ValueError):
    pass


# barriers
class NegativeInput(MPLabError, ValueError):
    pass


class NonPositiveK(MPLabError, ValueError):
    pass


class NoAdmissibleWidth(MPLabError, ArithmeticError):
    pass


class CosineDegenerate(MPLabError, ArithmeticError):
    pass


class BadParams(MPLabError, ValueError):
    pass


# verify
class UnknownCounterexample(MPLabError, KeyError):
    pass


class BadScale(MPLabError, ValueError):
    pass


# solver
class NonMonotoneStencil(MPLabError, ValueError):
    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class NoConvergence(MPLabError, RuntimeError):
    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


# bounds
class HypothesisNotMet(MPLabError):
    def __init__(self, flag, message=None):
        super().__init__(message or f"hypothesis not met: {flag}")
        self.flag = flag


# cli
class ConfigError(MPLabError, ValueError):
    def __init__(self, message, field=None, line=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field {field!r}")
        prefix = f"[{', '.join(loc)}] " if loc else ""
        super().__init__(prefix + message)
        self.field = field
        self.line = line
