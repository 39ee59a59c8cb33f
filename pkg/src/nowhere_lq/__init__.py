"""Rigorous finite-truncation certificates for a complemented lattice of
everywhere-singular integrable functions.

Exact rational interval arithmetic (`exact`, `intervals`), the fat
stage-set construction and its hole-filling families (`cantor`,
`family`), masked power-law sums (`singular`), certified integration
(`integration`), end-to-end certificates (`certify`), and a deterministic
CLI (`config`, `report`, `cli`).
"""

from .cantor import (
    CantorStage,
    ComponentChain,
    StageImage,
    WitnessNotFound,
    a_set,
    chain_index,
    chains_almost_disjoint,
    enumerate_chains,
    find_component_in,
    hole_interval,
    left_tail_limit,
    left_tail_measure,
    levels_almost_disjoint,
    stage,
    stage_interval,
    t_right,
    tn_bounds,
    witness_chain,
)
from .certify import (
    FAILS,
    HOLDS,
    UNDECIDED,
    BudgetExceeded,
    Depths,
    DivergenceCertificate,
    IsometryReport,
    LemmaChainReport,
    MembershipCertificate,
    ProjectionReport,
    StepFunction,
    certify_divergence,
    certify_membership,
    compare_ge,
    compare_gt,
    compare_le,
    isometry_check,
    lemma_chain,
    projection_apply,
    projection_coeff,
    replay_divergence,
    smallest_valid_j0,
)
from .config import RunConfig, load_config
from .exact import DomainError, Enclosure, Rat, ln_rat, parse_rat, pow2, rat_pow
from .family import DEFAULT_FAMILY, SequenceFamily, seq_locate, seq_value
from .integration import (
    INFINITE,
    MaskedSeriesNorm,
    Quadrature,
    enclose_sum_q,
    integral_power_term,
    is_infinite,
    lower_bound_sum_q,
    norm_of_masked_series,
    stage_power_integral,
)
from .intervals import UNIT, QInterval, QIntervalSet
from .report import CERTIFICATE_SCHEMA, canonical_json, validate_document, write_lb_csv
from .singular import (
    CoeffExpr,
    ExponentSchedule,
    FunctionTerm,
    SingularFunction,
    block_pth_mass,
    build_block,
    build_level_sum,
    build_masked_series,
    build_row_sum,
    build_series,
    default_schedule,
    rescale_into,
)

__version__ = "0.1.0"
