"""Numerical laboratory for measures of maximal unstable entropy.

The package builds concrete partially hyperbolic maps (solenoid embeddings of
the solid torus, perturbed hyperbolic automorphisms of T^3, linear toral
automorphisms), equips them with semiconjugacies onto linear factors, and
estimates invariant measures, Lyapunov spectra, entropies and periodic-point
skeletons with particle methods.
"""

from .errors import (
    ConeCheckFailed,
    ConstructionFailed,
    DepthTooLarge,
    DomainEscape,
    InsufficientResolution,
    MismatchedEndpoints,
    NoConvergence,
    NotExpanding,
    NotHyperbolic,
    NotOnAttractor,
    NotUnimodular,
    UnsupportedDimension,
    UnsupportedMatrix,
)

__version__ = "0.1.0"

__all__ = [
    "ConeCheckFailed",
    "ConstructionFailed",
    "DepthTooLarge",
    "DomainEscape",
    "InsufficientResolution",
    "MismatchedEndpoints",
    "NoConvergence",
    "NotExpanding",
    "NotHyperbolic",
    "NotOnAttractor",
    "NotUnimodular",
    "UnsupportedDimension",
    "UnsupportedMatrix",
    "__version__",
]
