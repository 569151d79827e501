"""dbarkit: construct and verify weighted solutions of the inhomogeneous
Cauchy-Riemann equation over a nested exhaustion of a planar domain."""

__version__ = "0.1.0"

from .domain import (
    DomainGeometry,
    Exhaustion,
    Grid,
    Rect,
    build_grid,
    distance_table,
    geometry_for,
    membership,
    x_region,
)
from .weights import (
    ConditionReport,
    IndexMaps,
    WeightFamily,
    check_ball_ratio,
    check_psi_domination,
    check_ratio_decay,
    check_subharmonic,
    eval_weight,
    neg_reciprocal,
    psi_weight,
)
from .calculus import (
    ScalarField,
    SeminormValue,
    dbar,
    dbar_noise_floor,
    equivalence_probe,
    fd_partial,
    hypoelliptic_probe,
    laplacian,
    lq_seminorm,
    sup_seminorm,
)
from .fundsol import (
    BoundReport,
    FundamentalSolution,
    check_derivative_bound,
    eval_E,
    kernel_moment_bound,
    weak_delta_residual,
    weighted_kernel_bound,
)
from .transform import (
    Cutoff,
    ParticularSolution,
    build_cutoff,
    cauchy_transform,
    cutoff_for_levels,
    lattice_riemann_sum,
    local_solve,
)
from .hormander import (
    MinimalNormSolution,
    WeightedL2Problem,
    hormander_inequality_check,
    minimal_norm_solve,
    psi_chain_check,
)
from .mittag_leffler import (
    CorrectionFailure,
    HoloCorrection,
    MLConfig,
    MLState,
    global_solve,
    holo_correct,
)
from .vecvalued import ComponentFailure, VectorField, solve_componentwise
from .config import PRESETS, ConfigError, RunConfig, config_hash, load_config, preset_config
