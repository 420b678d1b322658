"""Species sampling models: partition algebra, Monte Carlo PPFs and Gibbs fitting."""

from .datasets import SARCOMA_SUBTYPES, load_grid, load_sarcoma
from .exceptions import (
    DegenerateWeights,
    EmptyChain,
    Exhausted,
    InsufficientPrefix,
    MissingEntry,
    PathDependent,
    SpeciesSamplingError,
    TruncationOverflow,
)
from .gibbs import (
    BinomialModelConfig,
    NormalModelConfig,
    PartitionChain,
    PartitionPriorSpec,
    PosteriorSummary,
    binomial_cluster_marginal,
    gibbs_sweep,
    normal_cluster_marginal,
    predictive_density,
    run_chain,
    summarize,
)
from .mixture import SpeciesSamplingMixture
from .partitions import (
    BalanceReport,
    Composition,
    EppfTable,
    PutativePpf,
    Violation,
    check_additivity,
    check_balance,
    check_label_symmetry,
    check_symmetry,
    compositions,
    compositions_up_to,
    dp_eppf,
    dp_eppf_table,
    dp_log_eppf,
    dp_ppf,
    eppf_from_ppf,
    linear_f_ppf,
    polynomial_f_ppf,
    ppf_from_eppf,
)
from .predictive import (
    EstimatedPpf,
    PpfEstimate,
    empirical_partition_distribution,
    estimate_ppf,
    partition_law_oracle,
    ppf_curve,
    simulate_sss,
)
from .weights import (
    CustomWeights,
    LogisticNormalWeights,
    SizeBiasedPrefix,
    StickBreakingWeights,
    WeightDraw,
    WeightModel,
    calibrate_b,
    fixed_weights,
    match_dp_mass,
    mean_weights,
    partial_probability,
    predictive_given_weights,
    prior_expected_clusters,
    sample_weights,
    size_biased_permutation,
    weight_model_from_dict,
)

__version__ = "0.1.0"
