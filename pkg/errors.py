"""
Exception hierarchy shared by every module of the suite
"""


class FieldTheoryError(Exception):
    """Base class for all errors raised by the suite"""


class InvalidIndexError(FieldTheoryError):
    pass


class ZeroSpinorError(FieldTheoryError):
    pass


class AxialCurrentNonzeroError(FieldTheoryError):
    """Input spinor is not of the form exp(i theta) * real"""


class NotNullError(FieldTheoryError):
    """Current is not null, so no Majorana spinor produces it"""


class DegenerateAxisError(FieldTheoryError):
    pass


class NonpositiveDensityError(FieldTheoryError):
    pass


class CurrentMismatchError(FieldTheoryError):
    pass


class ConstraintViolatedError(FieldTheoryError):
    pass


class ZeroChargeError(FieldTheoryError):
    pass


class JetOrderError(FieldTheoryError):
    """A computation needs more derivative orders than the jet carries"""


class BoundaryTooCloseError(FieldTheoryError):
    pass


class DegenerateFrameError(FieldTheoryError):
    """v, u, w are (numerically) linearly dependent"""


class VanishingDeterminantError(FieldTheoryError):
    pass


class UnitCircleViolationError(FieldTheoryError):
    pass


class VanishingDensityError(FieldTheoryError):
    pass


class InstabilityError(FieldTheoryError):
    pass


class DegeneratePointError(FieldTheoryError):
    pass


class OutOfDomainError(FieldTheoryError):
    pass


class SignAmbiguityError(FieldTheoryError):
    pass


class ConfigError(FieldTheoryError):
    pass


class PointError(FieldTheoryError):
    """Wraps an upstream error with the spacetime point where it happened"""

    def __init__(self, point, cause):
        self.point = tuple(float(x) for x in point)
        self.cause = cause
        super().__init__(f"at {self.point}: {type(cause).__name__}: {cause}")

    @property
    def kind(self):
        return type(self.cause).__name__


class ZeroAmplitudeError(ZeroSpinorError):
    """Plane-wave seed is annihilated by the on-shell projector"""
