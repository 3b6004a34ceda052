from typing import Optional


class FreqLemmaError(Exception):
    """Root of every error raised by freqlemma."""


class InvalidInput(FreqLemmaError, ValueError):
    pass


class ConfigError(FreqLemmaError):
    pass


class EigenvalueHit(FreqLemmaError):
    """(zI - A) is singular at the requested complex frequency."""

    def __init__(self, z: complex, message: Optional[str] = None):
        self.z = z
        super().__init__(message or f"z = {z} coincides with an eigenvalue of A")


class IllPosedLoop(FreqLemmaError):
    pass


class DivergedLoop(FreqLemmaError):
    def __init__(self, step: int, magnitude: float):
        self.step = step
        self.magnitude = magnitude
        super().__init__(
            f"closed loop diverged at sample {step} (|y| = {magnitude:.3e})"
        )


class DegenerateBin(FreqLemmaError):
    def __init__(self, k: int, period: int):
        self.k = k
        self.period = period
        super().__init__(
            f"zero FRF denominator at excited bin k={k} in period {period}"
        )


class InconsistentPast(FreqLemmaError):
    def __init__(self, residual: float, tolerance: float):
        self.residual = residual
        self.tolerance = tolerance
        super().__init__(
            f"past trajectory is not explained by the data "
            f"(residual {residual:.3e} > {tolerance:.3e})"
        )


class EvaluationFailed(FreqLemmaError):
    pass


class Infeasible(FreqLemmaError):
    pass


class MaxIterations(FreqLemmaError):
    def __init__(self, iterations: int, message: Optional[str] = None):
        self.iterations = iterations
        super().__init__(message or f"no convergence within {iterations} iterations")


class NumericalFailure(FreqLemmaError):
    pass


class DegenerateData(FreqLemmaError):
    pass


class ControlFailure(FreqLemmaError):
    def __init__(self, step: int, cause: Exception):
        self.step = step
        self.cause = cause
        super().__init__(f"optimal control problem failed at step {step}: {cause}")


class WeakDataWarning(UserWarning):
    """Data matrix is row-rank deficient or a PE precondition does not hold."""


def error_payload(exc: Exception) -> dict:
    """JSON-ready description of an exception, used by the CLI and the API."""
    return {"error": type(exc).__name__, "message": str(exc)}
