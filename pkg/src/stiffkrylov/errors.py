"""Exception hierarchy shared by all modules."""


class StiffKrylovError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(StiffKrylovError, ValueError):
    """A system or netlist violates a structural assumption."""


class NumericalError(StiffKrylovError, ArithmeticError):
    """A numerical kernel failed (overflow, no convergence, loss of passivity)."""


class SingularMatrixError(NumericalError):
    """A sparse factorization hit a zero (or numerically zero) pivot."""

    def __init__(self, name, pivot, detail=""):
        self.name = name
        self.pivot = pivot
        msg = f"{name} is singular at pivot {pivot}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class NetlistError(StiffKrylovError, ValueError):
    """Parse error carrying the 1-based line and column of the offending token."""

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
