"""Conditioned pair ensembles: exact laws, samplers, and limit-theorem
verification for sums conditioned on a companion sum.

The package covers the chain from integer laws (Borel, Poisson,
geometric) through linear-probing hash tables and their block
decomposition, to conditional Berry-Esseen sweeps, local-limit
checks, and heavy-tailed large-deviation diagnostics, with a compiled
kernel core and a pure-Python fallback (set CONDLAW_BACKEND to force
one).
"""

from ._kernels import BACKEND
from .conditional import (
    ConditionalLaw,
    ConditionalMomentReport,
    ConditionedEnsemble,
    IndicatorAtZero,
    LocalLimitReport,
    MomentProfile,
    PairModel,
    RejectionFloorError,
    RejectionSample,
    TabularYGivenX,
    conditional_moment_report,
    exact_conditional_pmf,
    local_limit_report,
    mean_match_tilt,
    moment_profile,
    occupancy_model,
    prob_s_equals_k,
    rejection_sample_conditional,
)
from .distributions import (
    Family,
    FiniteLaw,
    IntegerLaw,
    RateCurve,
    TailBracket,
    TreeFunctionValue,
    borel,
    geometric,
    poisson,
    tail_bracket,
    tree_function,
    x_tail_rate_check,
)
from .hashing import (
    Block,
    BlockDecomposition,
    DisplacementCounts,
    DisplacementGivenLength,
    DisplacementProfile,
    HashSequence,
    InsertionResult,
    adversarial_sequence,
    block_decompose,
    block_statistics_law,
    block_weight,
    conditioned_block_pair_law,
    displacement_profile,
    displacement_via_profile,
    enumerate_all,
    hashing_pair_model,
    insert_all,
    n_y_threshold,
    permutation_count,
    sample_pair_xy,
)
from .limits import (
    AdversarialMassCheck,
    BerryEsseenReport,
    BerryEsseenRow,
    CfBoundAudit,
    ConstantsLedger,
    LdReport,
    LdRow,
    adversarial_mass_bound,
    bartlett_psi,
    berry_esseen_sweep,
    big_jump_diagnostic,
    cf_bound_audit,
    char_fn,
    conditional_ld_check,
    constants_ledger,
    dkw_band,
    empirical_vs_discrete_distance,
    enumerated_block_tail,
    exact_kolmogorov_to_normal,
    kolmogorov_distance,
    tail_log_bracket,
)
from .seeds import derive_seed

__version__ = "0.1.0"

__all__ = [
    "AdversarialMassCheck",
    "BACKEND",
    "BerryEsseenReport",
    "BerryEsseenRow",
    "Block",
    "BlockDecomposition",
    "CfBoundAudit",
    "ConditionalLaw",
    "ConditionalMomentReport",
    "ConditionedEnsemble",
    "ConstantsLedger",
    "DisplacementCounts",
    "DisplacementGivenLength",
    "DisplacementProfile",
    "Family",
    "FiniteLaw",
    "HashSequence",
    "IndicatorAtZero",
    "InsertionResult",
    "IntegerLaw",
    "LdReport",
    "LdRow",
    "LocalLimitReport",
    "MomentProfile",
    "PairModel",
    "RateCurve",
    "RejectionFloorError",
    "RejectionSample",
    "TabularYGivenX",
    "TailBracket",
    "TreeFunctionValue",
    "adversarial_mass_bound",
    "adversarial_sequence",
    "bartlett_psi",
    "berry_esseen_sweep",
    "big_jump_diagnostic",
    "block_decompose",
    "block_statistics_law",
    "block_weight",
    "borel",
    "cf_bound_audit",
    "char_fn",
    "conditional_ld_check",
    "conditional_moment_report",
    "conditioned_block_pair_law",
    "constants_ledger",
    "derive_seed",
    "displacement_profile",
    "displacement_via_profile",
    "dkw_band",
    "empirical_vs_discrete_distance",
    "enumerate_all",
    "enumerated_block_tail",
    "exact_conditional_pmf",
    "exact_kolmogorov_to_normal",
    "geometric",
    "hashing_pair_model",
    "insert_all",
    "kolmogorov_distance",
    "local_limit_report",
    "mean_match_tilt",
    "moment_profile",
    "n_y_threshold",
    "occupancy_model",
    "permutation_count",
    "poisson",
    "prob_s_equals_k",
    "rejection_sample_conditional",
    "sample_pair_xy",
    "tail_bracket",
    "tail_log_bracket",
    "tree_function",
    "x_tail_rate_check",
]
