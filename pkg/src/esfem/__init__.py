"""High-order evolving surface finite elements with BDF time stepping."""
from ._accel import get_backend, set_backend
from .analysis import ErrorRecord, eoc, error_norms, geometric_diagnostics, nodal_error_norms
from .assembly import assemble_load, assemble_mass, assemble_stiffness, assemble_system
from .exceptions import (
    DegenerateElementError,
    EocError,
    EsfemError,
    GeometryError,
    LiftError,
    SolverError,
    UnsupportedElementError,
)
from .geometry import LevelSetSurface, ManufacturedProblem, SurfaceKind
from .mesh import HighOrderMesh, build_mesh, promote_order, refine
from .refelem import QuadratureRule, ReferenceElement, dunavant_rule, gauss_rule
from .timestep import bdf_coefficients, run_simulation

__version__ = "0.1.0"
