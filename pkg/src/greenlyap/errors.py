"""Exception types shared across the package.

Every error raised on a mathematical precondition failure derives from
:class:`GreenLyapError`, so callers can distinguish "the computation is
telling you something about your orbit" from programming mistakes
(which surface as plain ``ValueError``/``TypeError``).
"""


class GreenLyapError(Exception):
    """Base class for all domain errors raised by this package."""


class ConjugatePointError(GreenLyapError):
    """A transported Lagrangian plane left the space of graphs.

    Raised when ``a + b S`` (or the corresponding denominator of a Riccati
    step) is singular beyond the configured condition-number cap.  Along a
    locally minimizing orbit this never happens; hitting it is strong
    evidence the orbit has a conjugate point.
    """


class NonPDDenominatorError(GreenLyapError):
    """A matrix that must be positive definite for a log-det is not."""


class MonotonicityViolationError(GreenLyapError):
    """The Green iteration moved the wrong way.

    ``S_k - S_{k+1}`` must be positive semidefinite along the forward
    sweep (and ``S_{-k-1} - S_{-k}`` along the backward one).  A negative
    eigenvalue beyond tolerance means the orbit is not locally minimizing
    over the window, or the generating function is invalid.
    """


class NonConvergenceError(GreenLyapError):
    """An iteration hit its step cap before meeting its tolerance.

    The partial result (best iterate plus diagnostics) is attached as
    ``partial`` so callers can inspect how far the computation got.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class NewtonDivergenceError(NonConvergenceError):
    """Damped Newton failed to reach its residual tolerance."""


class StepSizeUnderflowError(NewtonDivergenceError):
    """Backtracking line search shrank the step below representable use."""


class SaddleDetectedError(GreenLyapError):
    """A critical configuration failed the second-order minimality test."""


class NoPositiveEigenvalueError(GreenLyapError):
    """q_+ was requested for a matrix with no eigenvalue above tolerance."""


class NoPositiveExponentError(GreenLyapError):
    """smallest_positive was requested for a spectrum with no exponent
    above the zero threshold."""


class DegenerateCocycleError(GreenLyapError):
    """A QR step produced a numerically zero diagonal factor."""


class NoGapError(GreenLyapError):
    """Oseledets subspace estimate did not settle within tolerance."""
