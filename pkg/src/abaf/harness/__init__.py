from abaf.harness.experiments import (
    aggregate_repeats,
    label_by_threshold,
    run_ablation,
    run_fusion_experiment,
    run_single_feature_experiment,
    run_subtype_tasks,
    run_threshold_sweep,
)
from abaf.harness.folds import (
    FoldPlan,
    downsample_balance,
    split_train_val,
    stratified_kfold,
)
from abaf.harness.metrics import compute_metrics, pr_curve_points, roc_curve_points
from abaf.harness.report import (
    ExperimentReport,
    FoldResult,
    metrics_to_dict,
    write_csv,
    write_json,
    write_plots,
)
from abaf.harness.training import (
    TrainConfig,
    TrainHistory,
    compute_embeddings,
    predict_scores,
    train_model,
)

__all__ = [
    "ExperimentReport",
    "FoldPlan",
    "FoldResult",
    "TrainConfig",
    "TrainHistory",
    "aggregate_repeats",
    "compute_embeddings",
    "compute_metrics",
    "downsample_balance",
    "label_by_threshold",
    "metrics_to_dict",
    "pr_curve_points",
    "predict_scores",
    "roc_curve_points",
    "run_ablation",
    "run_fusion_experiment",
    "run_single_feature_experiment",
    "run_subtype_tasks",
    "run_threshold_sweep",
    "split_train_val",
    "stratified_kfold",
    "train_model",
    "write_csv",
    "write_json",
    "write_plots",
]
