"""latwalk: random walks on the space of unimodular lattices.

Simulates i.i.d. and Markov matrix walks, estimates Lyapunov spectra,
stress-tests uniform expansion on Grassmannians, runs equidistribution
diagnostics on SL_d(R)/SL_d(Z), and drives the graph-directed-fractal
Diophantine pipeline (natural measure, continued fraction statistics,
diagonal-flow trajectories).
"""

from ._jit import NUMBA_ENABLED
from .expansion import (
    ExpansionVerdict,
    LyapunovReport,
    grassmannian_expansion_check,
    lyapunov_spectrum,
    vector_growth_rate,
)
from .fractal import (
    GDIFS,
    DiophReport,
    Edge,
    cf_digits,
    dioph_report,
    direct_dioph_search,
    gauss_statistics,
    gdifs_from_json,
    hausdorff_dimension,
    magic_formula_check,
    natural_project,
    trajectory_report,
    wang_measure,
    wang_point_sample,
)
from .groups import (
    NotInP,
    PElement,
    Similarity,
    aku_compose,
    aku_decompose,
    make_block_element,
    similarity_action,
    similarity_to_group,
    sl3_paper_example,
)
from .lattice import (
    EmpiricalAccumulator,
    LatticePoint,
    WalkObservables,
    equidistribution_report,
    lattice_equal,
    reduce_basis,
    run_walk,
    shortest_vector,
    siegel_transform,
)
from .linalg import adjoint_matrix, norm_gauge, ortho_product_step, wedge_power
from .markov import (
    ChainSpec,
    Excursion,
    excursion_stats,
    renewal_t_identity,
    sample_excursion,
    stationary_distribution,
    validate_chain,
)
from .rng import Stream, stream

__version__ = "0.1.0"

__all__ = [
    "NUMBA_ENABLED",
    "ChainSpec",
    "DiophReport",
    "Edge",
    "EmpiricalAccumulator",
    "Excursion",
    "ExpansionVerdict",
    "GDIFS",
    "LatticePoint",
    "LyapunovReport",
    "NotInP",
    "PElement",
    "Similarity",
    "Stream",
    "WalkObservables",
    "adjoint_matrix",
    "aku_compose",
    "aku_decompose",
    "cf_digits",
    "dioph_report",
    "direct_dioph_search",
    "equidistribution_report",
    "excursion_stats",
    "gauss_statistics",
    "gdifs_from_json",
    "grassmannian_expansion_check",
    "hausdorff_dimension",
    "lattice_equal",
    "lyapunov_spectrum",
    "magic_formula_check",
    "make_block_element",
    "natural_project",
    "norm_gauge",
    "ortho_product_step",
    "reduce_basis",
    "renewal_t_identity",
    "run_walk",
    "sample_excursion",
    "shortest_vector",
    "siegel_transform",
    "similarity_action",
    "similarity_to_group",
    "sl3_paper_example",
    "stationary_distribution",
    "stream",
    "trajectory_report",
    "validate_chain",
    "vector_growth_rate",
    "wang_measure",
    "wang_point_sample",
    "wedge_power",
]
