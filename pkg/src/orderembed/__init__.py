"""Self-supervised embeddings of market-order sequences.

Pipeline: synthetic (or recorded) order tapes -> 50-order windows ->
feature matrices -> triplet-trained stacked-LSTM embeddings -> failure
rate evaluation, K-means clustering, and behavioral indicators.
"""

from .orders import (
    SESSION_SECONDS,
    WINDOW,
    MarketOrder,
    OrderLog,
    Sample,
    WindowSet,
    build_all_windows,
    build_windows,
)
from .features import (
    BASIC,
    BASIC_M,
    BASIC_M_QS,
    FeatureMatrix,
    FeatureSet,
    NormalizationStats,
    featurize,
    featurize_windows,
    fit_normalization,
)
from .synth import (
    AgentArchetype,
    MarketConfig,
    PassiveFills,
    default_archetypes,
    default_market_config,
    generate,
    generate_tape,
    select_active_agents,
)
from .encoder import (
    EncoderConfig,
    EncoderParams,
    encode,
    encode_batch,
    grad_check,
    init_params,
    triplet_backward,
    triplet_batch_grads,
    triplet_loss,
    zero_params,
)
from .optim import AdamConfig, AdamState, adam_step
from .triplets import (
    DaySplit,
    load_triplets,
    sample_triplets,
    save_triplets,
    split_days,
    validate_triplets,
)
from .training import Checkpoint, TrainConfig, save_loss_history, train
from .evaluation import (
    EvalReport,
    evaluate,
    evaluate_embeddings,
    failure_rate,
    failure_rate_per_agent,
    run_ablation,
)
from .clustering import (
    ClusterModel,
    ElbowResult,
    assign,
    elbow_select,
    kmeans,
    pca,
    read_assignments,
    write_assignments,
)
from .indicators import (
    INDICATOR_NAMES,
    IndicatorSet,
    agent_profile,
    cluster_summary,
    indicators_for_sample,
    indicators_for_windows,
    passive_aggressive_ratio,
)

__version__ = "0.1.0"
