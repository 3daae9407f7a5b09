"""Finite-element p-Laplace solutions on planar domains and quantitative symmetry deficits."""

from .deficits import (W_lower_bound, boundary_deficits, hoelder_deficit, identity_residual,
                       level_deficits, pohozaev_residual)
from .errors import (ConfigError, ConvergenceError, CurveSimplicityError, LevelSetError, MeshError,
                     OptimizationError, PlapsymError, PostProcessingError, SolverError)
from .estimators import PLaplaceSolver, SchwarzSymmetrizer, SymmetryAnalyzer
from .geometry import (BoundaryCurve, DomainSpec, GeometryReport, ball_match, build_boundary,
                       domain_eps, isoperimetric_deficit, normal_deficit)
from .levelsets import (DistributionTables, LevelSet, critical_measure, distribution_tables,
                        extract_level, l1_distance, schwarz_rearrangement)
from .mesh import Mesh, refine_around, triangulate, tube_volume
from .solver import (Field, Nonlinearity, SolverConfig, gradient_bound_check, radial_oracle,
                     solve)

__version__ = "0.1.0"
