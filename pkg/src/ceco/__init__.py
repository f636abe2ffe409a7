"""Center-collapse regularization lab.

ETF frame construction and verification, neural-collapse metrics, the
two-branch loss with analytic gradients, a synthetic imbalanced
segmentation generator, a hand-backpropagated trainer, and an experiment
harness with a CLI.
"""

from .data import Scene, SceneConfig, gen_scene, scene_center_counts
from .estimator import CecoClassifier
from .etf import (
    EtfCheckReport,
    EtfFrame,
    OrthonormalBasis,
    load_frame,
    make_etf,
    make_rotation,
    max_pairwise_cosine,
    save_frame,
    verify_etf,
)
from .losses import (
    CenterBatch,
    LossBreakdown,
    center_pool,
    cr_grad_classifier,
    cr_grad_features,
    cr_loss,
    pr_loss_and_grad,
    softmax_probs,
    total_loss,
)
from .metrics import (
    ClassStats,
    FeatureBatch,
    NcReport,
    centered_normalized_means,
    class_stats,
    equiangularity_std,
    head_common_tail_split,
    imbalance_factor,
    max_angle_deviation,
    nc_report,
    pearson,
    self_duality_gap,
)
from .model import MlpParams, backward, forward, init_params, predict, sgd_step
from .training import TrainConfig, TrainLog, lambda_sweep, run_ablation_grid, train

__version__ = "0.1.0"

__all__ = [
    "CecoClassifier", "CenterBatch", "ClassStats", "EtfCheckReport", "EtfFrame",
    "FeatureBatch", "LossBreakdown", "MlpParams", "NcReport", "OrthonormalBasis",
    "Scene", "SceneConfig", "TrainConfig", "TrainLog", "backward",
    "center_pool", "centered_normalized_means", "class_stats", "cr_grad_classifier",
    "cr_grad_features", "cr_loss", "equiangularity_std", "forward", "gen_scene",
    "head_common_tail_split", "imbalance_factor", "init_params", "lambda_sweep",
    "load_frame", "make_etf", "make_rotation", "max_angle_deviation",
    "max_pairwise_cosine", "nc_report", "pearson", "pr_loss_and_grad", "predict",
    "run_ablation_grid", "save_frame", "scene_center_counts", "self_duality_gap",
    "sgd_step", "softmax_probs", "total_loss", "train", "verify_etf",
]
