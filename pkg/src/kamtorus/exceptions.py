"""Exception hierarchy. The CLI maps these onto exit codes."""


class KAMError(Exception):
    """Base class for all errors raised by kamtorus."""


class RealityError(KAMError):
    """A series that should represent a real function has a large imaginary part."""


class ResonanceError(KAMError):
    """The frequency vector is exactly resonant at the requested truncation."""

    def __init__(self, message, k=None):
        super().__init__(message)
        self.k = k


class SmallDivisorError(KAMError):
    """A divisor k.alpha fell below the configured floor."""

    def __init__(self, message, k=None, divisor=None):
        super().__init__(message)
        self.k = k
        self.divisor = divisor


class PreconditionError(KAMError):
    """A named numerical precondition of an operation does not hold."""

    def __init__(self, name, message):
        super().__init__(f"{name}: {message}")
        self.name = name


class NondegeneracyError(PreconditionError):
    def __init__(self, message):
        super().__init__("nondegeneracy", message)


class AliasingError(KAMError):
    """Too much energy near the truncation edge: the grid is too coarse."""


class ConvergenceError(KAMError):
    """An inner fixed-point or Newton iteration failed to converge."""


class DivergenceError(KAMError):
    """The KAM iteration's defect grew on consecutive steps."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class TorusEscapeError(KAMError):
    """A trajectory left the strip |r| <= r_escape: the torus is not invariant."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time
