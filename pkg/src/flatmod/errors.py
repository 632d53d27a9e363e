"""Exception hierarchy; each class carries the CLI exit code it maps to."""


class FlatmodError(Exception):
    exit_code = 1


class InputError(FlatmodError, ValueError):
    """Malformed input: bad schema, unparsable numbers, inconsistent gluing."""

    exit_code = 2


class PreconditionError(FlatmodError, ValueError):
    """Well-formed input violating a mathematical precondition."""

    exit_code = 3


class DegeneracyError(FlatmodError, ArithmeticError):
    """Numerics broke down: flip loop did not terminate, near-singular form, etc."""

    exit_code = 4
