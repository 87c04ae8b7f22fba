"""Exception hierarchy shared by all modules.

Each error carries an ``exit_code`` so the CLI can map failures without a
lookup table: 2 for validation problems, 3 for numeric guard trips.
"""


class LatError(Exception):
    exit_code = 2


class ValidationError(LatError, ValueError):
    exit_code = 2


class NumericGuardError(LatError, ArithmeticError):
    exit_code = 3


# numfield
class NotMonic(ValidationError):
    pass


class DegreeTooSmall(ValidationError):
    pass


class NotTotallyReal(ValidationError):
    pass


class FieldMismatch(ValidationError):
    pass


class PrecisionExhausted(NumericGuardError):
    pass


# lattice
class RankDeficient(ValidationError):
    pass


class SingularBasis(ValidationError):
    pass


# boxcount
class VolumeLimitExceeded(NumericGuardError):
    pass


# fourier
class CutoffTooLarge(NumericGuardError):
    pass


# unitsgeo
class ZeroCoordinate(ValidationError):
    pass


class ZeroNorm(ValidationError):
    pass


class SingularUnitBasis(ValidationError):
    pass


class IncompleteEnumeration(UserWarning):
    """Coefficient radius may be too small to reach every requested point."""


# lds
class NonAdmissible(ValidationError):
    pass


class EmptyWindow(ValidationError):
    pass


class BadPrefix(ValidationError):
    pass


class TooLargeForExact(NumericGuardError):
    pass
