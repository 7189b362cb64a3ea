"""Bregman projections onto convex sets by accumulated cutting planes.

The library computes the Bregman projection of an anchor point onto a
closed convex set by intersecting ever-tighter halfspace cuts and
re-projecting the anchor, and drives the same scheme to the Bregman-nearest
fixed point of quasi Bregman nonexpansive operators such as subgradient
projectors.
"""

from .driver import (DriverConfig, IterationTrace, OracleMap, Outcome,
                     RunState, TraceRow, Violation, run, start, step,
                     verify_trace)
from .errors import (BregmanError, ConfigError, DomainError, FixtureError,
                     NonconvergenceError, NumericalDegeneracyError,
                     TraceFormatError, UsageError)
from .legendre import (EnergyFunction, ExpSumFunction, LegendreCheckReport,
                       LegendreFunction, as_point, bregman_distance,
                       check_legendre, make_legendre)
from .operators import (LevelSetProblem, ProxOracle, QbneViolation,
                        bregman_subgradient_projector,
                        classical_subgradient_projector,
                        distance_power_projector, level_cut, moreau_envelope,
                        moreau_projector, qbne_check)
from .oracle import GridSpec, fd_gradient, grid_projection
from .projection import (InfeasibilityReport, InnerSettings, ProjectionResult,
                         project_cutset, project_halfspace,
                         three_point_residual, variational_residual)
from .sets import (Cut, CutSet, Halfspace, box_halfspaces, build_cut,
                   cut_membership_equiv, universal_set)

__version__ = "0.1.0"

__all__ = [
    "BregmanError", "ConfigError", "Cut", "CutSet", "DomainError",
    "DriverConfig", "EnergyFunction", "ExpSumFunction", "FixtureError",
    "GridSpec", "Halfspace", "InfeasibilityReport", "InnerSettings",
    "IterationTrace", "LegendreCheckReport", "LegendreFunction",
    "LevelSetProblem", "NonconvergenceError", "NumericalDegeneracyError",
    "OracleMap", "Outcome", "ProjectionResult", "ProxOracle",
    "QbneViolation", "RunState", "TraceFormatError", "TraceRow",
    "UsageError", "Violation", "as_point", "box_halfspaces",
    "bregman_distance", "bregman_subgradient_projector", "build_cut",
    "check_legendre", "classical_subgradient_projector",
    "cut_membership_equiv", "distance_power_projector", "fd_gradient",
    "grid_projection", "level_cut", "make_legendre", "moreau_envelope",
    "moreau_projector", "project_cutset", "project_halfspace", "qbne_check",
    "run", "start", "step", "three_point_residual", "universal_set",
    "variational_residual", "verify_trace",
]
