"""Sub-Riemannian optimal transport at desk scale.

Solvers for the static (Kantorovich) and dynamic (Benamou-Brenier and its
relaxed Young-measure variant) quadratic transport problems on concrete
sub-Riemannian manifolds without abnormal geodesics, plus an end-to-end
verifier that checks the three optimal values coincide on discrete,
compactly supported measures.
"""

from srot.manifolds import (
    Covector,
    HorizontalVector,
    Manifold,
    Point,
    euclidean,
    hamiltonian,
    heisenberg,
)
from srot.geodesics import (
    ConnectionFailure,
    GeodesicPath,
    IntegrationBlowup,
    ShootingConfig,
    chow_connectivity_check,
    connect,
    distance,
    exp_map,
    geodesic_sup_distance,
)
from srot.measures import (
    DiscreteMeasure,
    GeneralizedCurve,
    Plan,
    TransportMeasure,
    averaged_field,
    marginal_path,
)
from srot.kantorovich import CostMatrix, KantorovichSolution, cost_matrix, solve_entropic, solve_exact
from srot.dynamical import (
    EquivalenceReport,
    TestFunction,
    build_from_plan,
    continuity_residual,
    default_test_basis,
    extract_plan,
    moment_bound,
    pair_cost,
    relaxed_cost,
    tighten,
    verify_equivalence,
)

__version__ = "0.1.0"

__all__ = [
    "Point", "Covector", "HorizontalVector", "Manifold",
    "heisenberg", "euclidean", "hamiltonian",
    "GeodesicPath", "ShootingConfig", "exp_map", "connect", "distance",
    "geodesic_sup_distance", "chow_connectivity_check",
    "ConnectionFailure", "IntegrationBlowup",
    "DiscreteMeasure", "Plan", "GeneralizedCurve", "TransportMeasure",
    "marginal_path", "averaged_field",
    "CostMatrix", "KantorovichSolution", "cost_matrix", "solve_exact", "solve_entropic",
    "TestFunction", "default_test_basis", "EquivalenceReport",
    "build_from_plan", "relaxed_cost", "pair_cost", "continuity_residual",
    "extract_plan", "tighten", "moment_bound", "verify_equivalence",
]
