"""roacert: certified safe invariant subsets of regions of attraction.

Builds polynomial Lyapunov certificates through an iterative sum-of-squares
procedure, applies them to a seven-state vehicle-with-driver model, and
validates the certified sets against a simulation oracle on the full
nonlinear dynamics.
"""

__version__ = "0.1.0"

from .poly import (  # noqa: F401
    Polynomial,
    PolyVectorField,
    VarSet,
    lie_derivative,
    linear_part,
)
