"""Exception types shared across the package."""


class UEntropyError(Exception):
    """Base class for all package-specific errors."""


class NotHyperbolic(UEntropyError):
    """An eigenvalue of the integer matrix lies (numerically) on the unit circle."""


class NotUnimodular(UEntropyError):
    """The integer matrix does not have determinant +-1."""


class UnsupportedDimension(UEntropyError):
    """No Markov-partition construction is available in this dimension."""


class UnsupportedMatrix(UEntropyError):
    """The matrix is outside the supported conjugacy types."""


class ConstructionFailed(UEntropyError):
    """A geometric construction did not pass its own verification."""


class DomainEscape(UEntropyError):
    """A fiber map does not send the disk strictly into its interior."""


class NotExpanding(UEntropyError):
    """A circle map fails the required expansion bound."""


class MismatchedEndpoints(UEntropyError):
    """A fiber path does not close up with the prescribed endpoint map."""


class ConeCheckFailed(UEntropyError):
    """Cone-field invariance failed; carries the witnessing point/vector."""

    def __init__(self, message, point=None, vector=None):
        super().__init__(message)
        self.point = point
        self.vector = vector


class NoConvergence(UEntropyError):
    """An iterative construction has contraction-rate estimate >= 1."""


class NotOnAttractor(UEntropyError):
    """A backward orbit left the trapping region of an embedding."""


class InsufficientResolution(UEntropyError):
    """Too few samples requested to represent a geometric object."""


class DepthTooLarge(UEntropyError):
    """Cylinder depth exceeds the statistical floor of the particle cloud."""


class LostParticle(UEntropyError):
    """Too many particles could not be assigned to a partition cell."""


class InsufficientConditionals(UEntropyError):
    """Not enough particles per plaque to estimate conditional masses."""


class DegenerateFrame(UEntropyError):
    """Cocycle reorthogonalization broke down."""


class ConfigError(UEntropyError):
    """Malformed or inconsistent experiment configuration."""


class IncompatibleSystems(UEntropyError):
    """Two run directories cannot be compared."""
