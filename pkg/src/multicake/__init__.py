"""Envy-free division of multiple linked cakes.

Search for divisions of several cakes in which two (or more) players with
linked preferences take disjoint most-preferred piece selections, via
simplicial labeling of the polytope of divisions; certify every answer by
brute force, and certify the known impossibility configurations by
exhaustive grid sweeps.
"""

from .geometry import (
    CakeConfig,
    Division,
    PieceSelection,
    PolytopeDescriptor,
    center,
    conflicts,
    cover_map_image,
    is_disjoint,
    make_division,
    make_selection,
    midpoint_division,
    polytope_descriptor,
    pure_division,
)
from .triangulation import (
    LatticeVertex,
    OwnerLabeling,
    SimplexCell,
    Triangulation,
    assign_owners,
    barycentric_subdivide,
    build,
    cell_count_formula,
    facet_of,
    vertex_count_formula,
)
from .preferences import (
    EpsilonCategoryModel,
    LinkedBonusModel,
    LogUtilityModel,
    PokerModel,
    PreferenceModel,
    QueryRequired,
    ScriptedOracle,
    epsilon_category_prefer,
    human_oracle,
    linked_bonus_model,
    log_utility_model,
    model_from_spec,
    poker_model,
    scripted_oracle,
)
from .sperner import (
    FullCell,
    LabeledTriangulation,
    SolveReport,
    check_sperner,
    disjoint_owner_edge,
    full_cells,
    prism_full_cell_analysis,
    solve_different_selections,
    solve_envy_free,
    three_player_square,
)
from .grid_lemma import (
    DisjointnessGraph,
    WeightedLabelSet,
    check_component_bound,
    classify_profile,
    disjointness_graph,
    find_diagonal,
    plane_weights,
    solve_center_weights,
)
from .verifier import (
    CERTIFY_NONE,
    COLLECT,
    EnvyReport,
    SweepCertificate,
    envy_report,
    grid_sweep,
    preferred_set,
)

__version__ = "0.1.0"
