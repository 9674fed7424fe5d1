"""Guided random forests: oblique tree ensembles whose random hyperplanes
extend globally across all impure partitions, with sensitivity-based data
approximation and a bias-variance / strength-correlation evaluation suite.
"""

from .dataset import Dataset, load_csv, load_features_csv, save_csv
from .datagen import GenSpec, boundary_distance, gen_pattern, gen_rbf, generate, near_boundary, rbf_params
from .engine import (
    Hyperplane,
    LeafRecord,
    Partition,
    SubspaceView,
    TreeInstance,
    assign_bit,
    draw_hyperplane,
    grow_tree,
    impurity,
    leaf_posteriors,
    partition_stats,
    traverse,
)
from .errors import DataError, GrafError, InternalError, UsageError
from .evalsuite import (
    BVResult,
    SCResult,
    bv_experiment,
    cv_protocol,
    kw_decompose,
    sc_experiment,
    strength_correlation,
    stratified_kfold,
)
from .forest import (
    Forest,
    ForestConfig,
    accuracy,
    margin,
    per_tree_predictions,
    predict,
    predict_scores,
    train_forest,
)
from .model_io import load_model, save_model
from .sensitivity import (
    SensitivityReport,
    class_normalized_sensitivity,
    compute_sensitivity,
    partition_weight_count,
    ranked_importance,
    subsample,
)

__version__ = "0.1.0"
