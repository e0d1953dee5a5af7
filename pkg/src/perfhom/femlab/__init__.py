"""Two-dimensional P1 finite elements on the perforated unit square."""
from .assembly import (
    LoadError,
    Problem,
    SparseSystem,
    assemble,
    load_vector,
    local_robin_mass,
    local_stiffness,
    mass_matrix,
    robin_matrix,
    stiffness_matrix,
)
from .mesh import (
    OUTER,
    MeshAudit,
    PerforatedMesh,
    TilingError,
    TriMesh,
    build_mesh,
    build_mesh_radius,
    mesh_audit,
    read_mesh,
    structured_square,
    write_mesh,
)
from .norms import error_norms, l2_norm
from .quadrature import triangle_rule
from .solvers import (
    ConvergenceError,
    DiscreteSolution,
    low_eigenvalues,
    pcg,
    solve_cg,
    system_eigenvalues,
)

__all__ = [
    "LoadError", "Problem", "SparseSystem", "assemble", "load_vector",
    "local_robin_mass", "local_stiffness", "mass_matrix", "robin_matrix",
    "stiffness_matrix", "OUTER", "MeshAudit", "PerforatedMesh", "TilingError",
    "TriMesh", "build_mesh", "build_mesh_radius", "mesh_audit", "read_mesh",
    "structured_square", "write_mesh", "error_norms", "l2_norm", "triangle_rule",
    "ConvergenceError", "DiscreteSolution", "low_eigenvalues", "pcg", "solve_cg",
    "system_eigenvalues",
]
