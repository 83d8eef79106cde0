"""Certified Gibbs and Metropolis-Hastings sampling for discrete point processes ``mu(S) ~ exp(beta f(S))``."""

__version__ = "0.1.0"

from .core import (
    DppmixError,
    GroundSet,
    ModelError,
    PointProcess,
    SetFunction,
    Subset,
    TableFunction,
    TooLargeError,
    evaluate,
    hessian_entry,
    index_from_subset,
    marginal_gain,
    subset_from_index,
)
from .functions import (
    DecomposableFunction,
    FacilityLocation,
    GraphCut,
    Log1pConcave,
    LinearCapped,
    LogDetFunction,
    ModularFunction,
    PairTweakFunction,
    QuadraticConcave,
    SqrtConcave,
    TableConcave,
    mean_field_ising_preset,
    pair_tweak_preset,
)
from .samplers import (
    ChainConfig,
    InitialDistribution,
    Kernel,
    Scan,
    run_chain,
    run_replicas,
    sample_states,
    sweep_random,
    sweep_systematic,
)
from .certificates import (
    Certificate,
    Condition,
    DecayReport,
    DobrushinMatrix,
    FamilyMismatch,
    certify,
    certify_dobrushin,
    certify_family,
    certify_general,
    curvature,
    decay_check,
    default_certificate,
    dobrushin_gibbs_exact,
    dobrushin_mh_exact,
    hessian_bound_matrix,
)
from .oracle import (
    TestFunction,
    build_transition,
    delta_i,
    exact_distribution,
    exact_marginal,
    contraction_check,
    tv_distance,
)
from .estimation import EstimateReport, choose_m, estimate_marginal
