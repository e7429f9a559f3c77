"""Maximum-entropy ensembles of subgraph configurations built from atomic subgraphs."""

from atomlab.atoms import (
    Atom,
    AtomSymmetry,
    AtomTooLargeError,
    canonical_key,
    catalogue_atom,
    compute_symmetry,
    count_placements,
    log_count_placements,
    mu,
)
from atomlab.configuration import (
    Configuration,
    DegreeSpec,
    Graph,
    OrbitGroup,
    Placement,
    atom_counts,
    check_graphicality,
    count_motif_in_graph,
    covers,
    enumerate_placements,
    orbit_degrees,
    project,
)
from atomlab.errors import (
    InfeasibleConstraintError,
    NonConvergenceError,
    NonGraphicalError,
    SamplerExhaustedError,
    SeriesDivergenceError,
    SpecError,
)

__all__ = [
    "Atom",
    "AtomSymmetry",
    "AtomTooLargeError",
    "Configuration",
    "DegreeSpec",
    "Graph",
    "InfeasibleConstraintError",
    "NonConvergenceError",
    "NonGraphicalError",
    "OrbitGroup",
    "Placement",
    "SamplerExhaustedError",
    "SeriesDivergenceError",
    "SpecError",
    "atom_counts",
    "canonical_key",
    "catalogue_atom",
    "check_graphicality",
    "compute_symmetry",
    "count_motif_in_graph",
    "count_placements",
    "covers",
    "enumerate_placements",
    "log_count_placements",
    "mu",
    "orbit_degrees",
    "project",
]
