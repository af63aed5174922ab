"""Exception hierarchy.

Input problems derive from :class:`InputError` (CLI exit code 2); convergence
shortfalls derive from :class:`ConvergenceError` (exit code 3).
"""


class OGLError(Exception):
    pass


class InputError(OGLError, ValueError):
    pass


class IndexOutOfRange(InputError):
    pass


class EmptyGroup(InputError):
    pass


class DuplicateIndex(InputError):
    pass


class NonpositiveWeight(InputError):
    pass


class LengthMismatch(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class ParseError(InputError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


class RaggedRows(ParseError):
    pass


class EmptyFile(InputError):
    pass


class SpecInfeasible(InputError):
    pass


class SingleClassLabels(InputError):
    pass


class InfeasibleDual(OGLError, ArithmeticError):
    """A dual iterate violates a ball constraint by more than rounding."""


class ConvergenceError(OGLError, RuntimeError):
    pass


class MaxInnerIterationsExceeded(ConvergenceError):
    pass


class MaxOuterIterations(ConvergenceError):
    pass


class LineSearchOverflow(ConvergenceError):
    pass


class OracleNotConverged(ConvergenceError):
    pass
