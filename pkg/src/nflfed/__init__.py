"""Federated-learning protection mechanisms, Bayesian inference attacks, and
privacy/utility/efficiency trade-off verification."""

from __future__ import annotations

from . import errors
from .divergence import (
    LN2,
    BeliefDistribution,
    ClosedForm,
    CollapsedBox,
    ConditionalBelief,
    DiagonalGaussian,
    FiniteDiscrete,
    Grid,
    Mixture,
    ModelInfoDistribution,
    MonteCarlo,
    PointMass,
    QuadratureSpec,
    TVEstimate,
    UniformBox,
    bayesian_privacy_leakage,
    gaussian_tv_sandwich,
    js_discrete,
    kl_discrete,
    marginal_belief,
    product_belief,
    system_privacy_leakage,
    tv_discrete,
    tv_distance,
)

from .mechanisms import (
    Cipher,
    Compression,
    Identity,
    MechanismConfig,
    ModelInfo,
    Paillier,
    PaillierKeypair,
    Plain,
    Randomization,
    SecretSharing,
    Shares,
    compress,
    deserialize_sparse,
    fixed_point_decode,
    fixed_point_encode,
    message_bits,
    paillier_decrypt,
    paillier_encrypt,
    paillier_keygen,
    paillier_protect,
    protected_distribution,
    randomize,
    reconstruct,
    secret_share,
    serialize_model_info,
)

from .attacks import (
    AttackResult,
    AttackSpec,
    CosineGradientMatch,
    Flat,
    GaussianGradientMatch,
    LabelPrior,
    LinearRegressionModel,
    NormScoring,
    SignBased,
    SoftmaxLinearModel,
    TotalVariationPrior,
    bayesian_map_attack,
    direct_label_inference,
    dlg_gradient_match,
    empirical_posterior,
    norm_scoring_attack,
)

from .bounds import (
    NFL_SLACK,
    AssumptionFails,
    BoundCheck,
    CandidateEvaluation,
    DiscreteScenario,
    LowerBound,
    ModelDims,
    NflConstants,
    NotApplicable,
    OptimizeResult,
    ScenarioMetrics,
    TradeoffReport,
    c1_constant,
    delta_estimate,
    mechanism_efficiency_bound,
    mechanism_privacy_bound,
    mechanism_utility_bound,
    nfl_check,
    protector_optimize,
    scenario_evaluator,
    tradeoff_report,
    xi_constant,
    xi_gamma_estimate,
)

from .fedsim import (
    Dataset,
    FLScenario,
    GapEstimate,
    Hfl,
    LinearRegression,
    Message,
    RoundRecord,
    RoundTrace,
    SoftmaxLinear,
    SyntheticData,
    Vfl,
    label_recovery_rate,
    measure_efficiency_reduction,
    measure_utility_loss,
    norm_recovery_rate,
    partition_shards,
    replicate_scenarios,
    run_hfl,
    run_scenario,
    run_vfl,
    synth_data,
    vertical_split,
    vfl_cut_rows,
    vfl_labels,
)

__version__ = "0.1.0"
