"""Marked Gibbs point processes: facet interactions and Laguerre tessellations.

Simulation and verification toolkit: configurations and tempered-set checks,
marked Poisson references, facet intersection energies with the attractive
counterexample apparatus, Laguerre diagram geometry with regularity checkers,
the vertex-count energy and its removal identity, and birth-death-translate
samplers with a statistical DLR consistency test.
"""

__version__ = "0.1.0"

from .config import (
    Ball,
    Box,
    Configuration,
    FacetMark,
    MarkedPoint,
    WeightMark,
    centered_box,
    configuration_from_json,
    configuration_to_json,
    max_mark_norm,
    origin_ball,
    weighted_point_count,
)
from .tempered import (
    DEFAULT_DELTA,
    check_clearance_property,
    clearance_radius,
    satisfies_ball_clearance,
    temperedness_level,
)
from .poisson import (
    AtomLaw,
    DirectionAtoms,
    FacetMarkLaw,
    HemisphereUniform,
    PoissonSpec,
    UniformLaw,
    WeightMarkLaw,
    check_mark_moment,
    sample_poisson,
)
from .facets import (
    CounterexampleSpec,
    Facet,
    FacetEnergyModel,
    facet_conditional_energy,
    facet_energy,
    facet_of,
    guaranteed_crossing_scale,
    make_crossing_family,
    pair_intersection,
    partition_lower_bound_log_term,
    sample_paired_caps,
    triple_intersection_count,
    truncation_radius,
)
from .laguerre import (
    HalfPlane,
    LaguerreDiagram,
    build_diagram,
    check_general_position,
    half_plane,
    is_normal,
    power_distance,
    vertex_count,
)
from .laguerre_energy import (
    AdmissibilityReport,
    VertexCountEnergy,
    check_shielding,
    is_admissible,
    laguerre_conditional_energy,
    removal_diff,
    vertex_count_energy,
)
from .mcmc import (
    ChainParams,
    CutoffSpec,
    FacetInteraction,
    GibbsSpec,
    LaguerreVertexInteraction,
    MoveMix,
    dlr_consistency_test,
    estimate_partition,
    run_chain,
    shift_average,
)
