"""Exception types raised by the physics modules."""


class YbQuditError(Exception):
    """Base class for physics-level failures (CLI exit code 3)."""


class SingularExcitedManifold(YbQuditError):
    """The laser sits within ``delta_floor`` of an excited-state eigenvalue."""


class DegenerateCoefficients(YbQuditError):
    """``delta s^x - delta s^z`` vanishes, so no polarization angle is selective."""


class TrackingError(YbQuditError):
    """Adiabatic level tracking lost a level between two grid points."""

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


class AmbiguousManifold(YbQuditError):
    """Excited levels cannot be assigned to a unique Zeeman manifold."""


class DistinctnessViolation(YbQuditError):
    """Phase-profile level gaps are not pairwise distinct."""


class InfeasiblePoint(YbQuditError):
    """Operating point fails a feasibility condition; ``reason`` names it."""

    def __init__(self, message, reason=None):
        super().__init__(message)
        self.reason = reason or message


class FitError(YbQuditError):
    """Oscillation frequency could not be extracted from a trace."""
