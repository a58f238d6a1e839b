"""Exception types shared across the package."""


class ServoError(Exception):
    """Base class for all package-specific errors."""


class DegenerateDirection(ServoError):
    """Direction undefined because the horizontal offset is (near) zero."""


class DegenerateSamples(ServoError):
    """Sample set does not span enough of the surface to constrain a fit."""


class DegenerateGeometry(ServoError):
    """Point set is rank-deficient (collinear or coincident)."""


class IKError(ServoError):
    """Base class for inverse-kinematics failures."""


class NoConvergence(IKError):
    """Iterative solve hit its iteration cap.

    Carries the best residual seen so the caller can report how close the
    solve got.
    """

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class OutOfWorkspace(IKError):
    """Requested pose violates the workspace constraint box."""


class NoValidDetections(ServoError):
    """Fusion was asked to run on an empty detection set."""


class InvalidDetection(ServoError):
    """A detection marked invalid was used where a valid one is required."""


class LimitViolation(ServoError):
    """A planned waystate exceeds a velocity or acceleration limit."""


class Timeout(ServoError):
    """A servo loop exceeded its time budget."""


class ConfigError(ServoError):
    """Malformed configuration text or unknown key."""


class ScenarioError(ServoError):
    """Malformed or inconsistent scenario definition."""
