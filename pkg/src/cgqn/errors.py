"""Exception hierarchy shared by every module."""


class CgqnError(Exception):
    """Base class for all errors raised by this package."""


class SingularMatrix(CgqnError):
    """A linear solve hit a pivot below working precision."""


class CurvatureBreakdown(CgqnError):
    """Exact line search along a direction with non-positive curvature."""


class BreakdownError(CgqnError):
    """The CG recurrence was asked to divide by a vanishing gradient norm."""


class InvalidScheme(CgqnError, ValueError):
    """An update scheme was built with parameters it cannot accept."""


class ProblemError(CgqnError, ValueError):
    """A quadratic problem violates H = H^T > 0, c != 0 or dimension rules."""


class SchemeBreakdown(CgqnError):
    """An update scheme could not produce B_k at iteration ``k``."""

    def __init__(self, message, k=None):
        super().__init__(message)
        self.k = k


class Sr1Degenerate(SchemeBreakdown):
    """SR1 denominator p^T (H - B) p vanished."""

    def __init__(self, message, theta_prev, k=None):
        super().__init__(message, k)
        self.theta_prev = theta_prev


class DegenerateDelta(SchemeBreakdown):
    """Target scaling coincides with the excluded value delta_hat."""

    def __init__(self, message, delta, delta_hat, k=None):
        super().__init__(message, k)
        self.delta = delta
        self.delta_hat = delta_hat


class DegeneratePhi(SchemeBreakdown):
    """Broyden parameter coincides with the degenerate value phi_hat."""

    def __init__(self, message, phi, phi_hat, k=None):
        super().__init__(message, k)
        self.phi = phi
        self.phi_hat = phi_hat
