"""Error types shared across the package.

Infeasible (infinite-energy) states are always signaled with exceptions,
never encoded as floating-point specials.
"""

from __future__ import annotations


class ViscoPTError(Exception):
    """Base class for all package errors."""


class InfeasibleState(ViscoPTError):
    """State outside the admissible set (nonpositive F_vi, viscous strain
    outside the constraint radius, malformed dof layout)."""


class ValidationError(ViscoPTError):
    """Bad parameter or configuration value; the message names the field."""


class ConfigParseError(ViscoPTError):
    """Malformed config text; the message names the offending key or line."""


class NonFiniteObjective(ViscoPTError):
    """Objective or gradient evaluated to NaN/inf at an accepted point."""


class NotSymmetricPositiveDefinite(ViscoPTError):
    """Quadratic solve received a matrix that is not SPD."""


class CurvatureNotConverged(ViscoPTError):
    """Finite-difference curvature estimates at h and h/2 disagree."""


class StepRejected(ViscoPTError):
    """Incremental step violated the stay-put minimality inequality."""

    def __init__(self, index: int, margin: float):
        self.index = index
        self.margin = margin
        super().__init__(
            f"step {index} rejected: stay-put inequality margin {margin:.3e} < -1e-8"
        )
