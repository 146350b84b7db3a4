"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: InputError -> 2, ConvergenceError and
QuadratureError -> 3, OracleFitError -> 4.
"""


class DDNoiseError(Exception):
    """Base class for toolkit errors."""


class InputError(DDNoiseError, ValueError):
    """Malformed user input: files, sequence strings, parameter ranges."""


class ConvergenceError(DDNoiseError, RuntimeError):
    """An iterative procedure failed to converge to the requested quality."""


class QuadratureError(ConvergenceError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, achieved_tol=None):
        super().__init__(message)
        self.achieved_tol = achieved_tol


class OracleFitError(DDNoiseError, RuntimeError):
    """Coherence-trace post-processing failed (no usable decay to fit)."""
