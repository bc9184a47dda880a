"""
Exceptions raised by ``robnas``.

Every error derives from :class:`RobnasError` *and* from the builtin exception it refines, so
callers that only care about ``ValueError``/``LookupError`` keep working::

    try:
        parse_genotype(text)
    except ValueError as e:
        ...

Each class carries :attr:`RobnasError.exit_code`, used by the command line to turn an error
into a stable process exit status.

.. autoclass:: RobnasError
.. autoclass:: ValidationError
.. autoclass:: ParseError
.. autoclass:: NotFoundError
.. autoclass:: NumericalError
.. autoclass:: AssumptionViolated
"""

from typing import Optional


class RobnasError(Exception):
    """
    Base for all errors of the package.
    """

    #: Process exit status the CLI uses for this kind of error
    exit_code: int = 1


class ValidationError(RobnasError, ValueError):
    """
    Input does not satisfy a documented precondition: wrong shape, value out of range, unknown
    config key, duplicate benchmark record.
    """

    exit_code = 2


class ParseError(ValidationError):
    """
    Text (genotype string, benchmark file, config file) can't be parsed.

    Args:
        message: Human-readable description
        token: Offending token, if known
        position: 0-based character position of the token in the parsed string
        line_no: 1-based line number in the parsed file
    """

    def __init__(self, message: str, *, token: Optional[str] = None, position: Optional[int] = None,
                 line_no: Optional[int] = None):
        self.token = token
        self.position = position
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class NotFoundError(RobnasError, LookupError):
    """
    Requested data is absent: unknown genotype/dataset/metric in a benchmark store, missing
    input file.
    """

    exit_code = 3


class NumericalError(RobnasError, ArithmeticError):
    """
    Computation can't produce a meaningful number: non-finite matrices, kernel singular even
    after maximal jitter, activation growing too fast for a Gaussian expectation.
    """

    exit_code = 4


class AssumptionViolated(NumericalError):
    """
    The separation condition of the minimum-eigenvalue bound fails (``c >= 1``), so the bound is
    vacuous.
    """
