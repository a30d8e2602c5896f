"""Hierarchical diffusion classifier engine.

Classifies inputs by pruning a label tree with cheap Monte Carlo
noise-prediction error estimates, then running the classical flat
diffusion-classifier refinement on the surviving classes. The noise
predictor itself is abstracted behind pluggable scorers.
"""

from .errors import (
    ConfigError,
    DatasetMismatchError,
    HdcError,
    PromptError,
    RemoteScorerError,
    ReplayKeyError,
    ScorerError,
    ScorerFailure,
    TreeError,
    TreeParseError,
    TreeStructureError,
    UnknownNodeError,
)
from .estimator import (
    NodeErrorAccumulator,
    Posterior,
    argmin_label,
    mc_mean,
    paired_posterior,
    rank_labels,
    softmax_posterior,
)
from .flat import FlatConfig, FlatResult, classify_flat
from .harness import (
    ExperimentSpec,
    build_scorer,
    compare_reports,
    dataset_hash,
    load_experiment_config,
    make_synthetic_dataset,
    resolve_experiment_config,
    run_experiment,
    spec_from_payload,
    write_run_outputs,
)
from .hierarchical import (
    DYNAMIC_SIGMA,
    FIXED_TOPK,
    FrontierState,
    HdcConfig,
    HdcResult,
    PruneStrategy,
    PruneTrace,
    classify_hdc,
    evaluate_frontier,
    prune,
)
from .metrics import (
    ConfusionMatrix,
    CountingScorer,
    EvalReport,
    RunMetrics,
    classwise_top1,
    confusion_subtree,
    overall_topk,
    speedup,
    top_k_hit,
)
from .scoring import (
    DEFAULT_T_MAX,
    DEFAULT_TEMPLATE,
    PROTOCOL_VERSION,
    GreedyProbe,
    ImageRef,
    Prompt,
    RemoteScorer,
    ReplayScorer,
    SamplePoint,
    SampleSet,
    ScoreRequest,
    SyntheticScorer,
    SyntheticScorerConfig,
    build_sample_set,
    derive_seed,
    render_prompt,
    synthetic_error_mean,
    write_replay_matrix,
)
from .tree import (
    LabelNode,
    LabelTree,
    descend_to_level,
    effective_children,
    insert_class,
    limit_depth,
    load_tree,
    read_tree,
    remove_class,
    tree_from_nested,
    write_tree,
)

__version__ = "0.1.0"
