"""Exception hierarchy shared across the package."""


class MedaError(Exception):
    """Base class for all errors raised by this package."""


class ExprParseError(MedaError):
    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class UndeclaredSymbolError(ExprParseError):
    pass


class DerivativeError(MedaError):
    """Differentiation rule missing or not applicable."""


class EvalError(MedaError):
    """Numeric evaluation failed (unbound symbol, unexpanded marker, ...)."""


class PoleError(EvalError):
    """Evaluation point too close to a pole; grid samplers skip these."""


class NonPolynomialError(MedaError):
    """Expression is not polynomial in the requested main symbols."""


class ZeroDenominatorError(MedaError):
    """A denominator vanished identically while clearing fractions."""


class ProblemFileError(MedaError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        loc = ""
        if path is not None:
            loc = str(path)
            if line is not None:
                loc += f":{line}"
            loc += ": "
        super().__init__(loc + message)


class ReductionError(MedaError):
    pass


class IntegrationError(MedaError):
    pass


class EliminationError(MedaError):
    pass


class BalanceError(MedaError):
    pass


class TransformError(MedaError):
    pass


class AnsatzError(MedaError):
    pass


class CandidateError(MedaError):
    pass


class SolveError(MedaError):
    pass


class SolutionError(MedaError):
    pass


class ResidualError(MedaError):
    pass


class CrossCheckError(ResidualError):
    """Finite-difference cross-check disagreed with symbolic derivatives."""
