"""Experiment harness: training loops, metric logging, ablation grids.

Every comparative operation (ablation grid, lambda sweep) runs its arms
under identical data and initialization seeds, so differences between
arms are attributable to the intervention alone. Evaluation uses logits
only; the center branch never influences predictions.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Scene, SceneConfig, gen_scene
from .etf import EtfFrame, make_etf
from .exceptions import DivergenceError, NumericError
from .losses import (
    _cr_grad_features_matrix,
    _cr_loss_matrix,
    center_pool,
    cr_grad_classifier,
    pr_loss_and_grad,
)
from .metrics import (
    FeatureBatch,
    centered_normalized_means,
    class_stats,
    equiangularity_std,
    head_common_tail_split,
    max_angle_deviation,
    self_duality_gap,
)
from .model import MlpParams, backward, forward, init_params, poly_lr, sgd_step

PR_MODES = ("learned", "fixed_etf")
CC_MODES = ("fixed_etf", "learned", "off")

# Table-style ablation variants: (pixel classifier, center classifier).
ABLATION_VARIANTS = (
    ("learned", "off"),
    ("fixed_etf", "fixed_etf"),
    ("fixed_etf", "learned"),
    ("learned", "fixed_etf"),
    ("learned", "learned"),
)

DEFAULT_LAMBDA_GRID = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6)


@dataclass(frozen=True)
class TrainConfig:
    scene: SceneConfig = field(default_factory=SceneConfig)
    hidden_dim: int = 32
    feature_dim: int = 16
    lam: float = 0.4
    alpha: float = 1.0
    pr_classifier_mode: str = "learned"
    center_classifier_mode: str = "fixed_etf"
    lr: float = 0.5
    weight_decay: float = 3e-3
    iterations: int = 1200
    eval_every: int = 300
    seed: int = 0
    n_train_scenes: int = 4
    n_eval_scenes: int = 2
    lr_schedule: str = "constant"
    poly_power: float = 0.9

    def __post_init__(self):
        if self.pr_classifier_mode not in PR_MODES:
            raise ValueError(f"pr_classifier_mode must be one of {PR_MODES}")
        if self.center_classifier_mode not in CC_MODES:
            raise ValueError(f"center_classifier_mode must be one of {CC_MODES}")
        if self.lam < 0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")
        if self.center_classifier_mode == "off" and self.lam != 0:
            raise ValueError("center_classifier_mode='off' requires lambda=0")
        if self.lam > 0 and self.center_classifier_mode == "off":
            raise ValueError("lambda>0 requires a center classifier")
        needs_etf = self.pr_classifier_mode == "fixed_etf" or self.center_classifier_mode == "fixed_etf"
        if needs_etf and self.feature_dim < self.scene.K:
            raise ValueError(
                f"fixed ETF classifiers need feature_dim >= K, got {self.feature_dim} < {self.scene.K}"
            )
        if self.iterations < 0 or self.eval_every < 1:
            raise ValueError("iterations must be >= 0 and eval_every >= 1")
        if self.lr_schedule not in ("constant", "poly"):
            raise ValueError("lr_schedule must be 'constant' or 'poly'")

    @property
    def K(self) -> int:
        return self.scene.K


@dataclass
class TrainLog:
    records: list
    head: list
    common: list
    tail: list
    diverged: bool = False

    @property
    def final(self) -> dict:
        return self.records[-1]


# Seed offsets deriving independent streams from one experiment seed.
_SEED_STRIDE = 100003
_EVAL_OFFSET = 50021
_INIT_OFFSET = 90001
_FRAME_OFFSET = 70007
_PR_FRAME_OFFSET = 80021
_PALETTE_OFFSET = 60013


def make_scenes(cfg: TrainConfig, count: int, offset: int) -> list:
    base = cfg.seed * _SEED_STRIDE + offset
    palette = cfg.seed * _SEED_STRIDE + _PALETTE_OFFSET
    return [gen_scene(replace(cfg.scene, seed=base + i, palette_seed=palette))
            for i in range(count)]


def _pool_scenes(scenes: list, K: int) -> FeatureBatch:
    inputs = np.concatenate([s.inputs for s in scenes], axis=0)
    labels = np.concatenate([s.labels for s in scenes], axis=0)
    return FeatureBatch(features=inputs, labels=labels, K=K)


@dataclass
class _TrainState:
    params: MlpParams
    frame: EtfFrame | None
    W_cc: np.ndarray | None  # learned center classifier, if any


def _init_state(cfg: TrainConfig) -> _TrainState:
    params = init_params(cfg.scene.input_dim, cfg.hidden_dim, cfg.feature_dim,
                         cfg.K, cfg.seed * _SEED_STRIDE + _INIT_OFFSET)
    if cfg.pr_classifier_mode == "fixed_etf":
        pr_frame = make_etf(cfg.feature_dim, cfg.K, cfg.alpha,
                            cfg.seed * _SEED_STRIDE + _PR_FRAME_OFFSET)
        params.W_pr = pr_frame.matrix.copy()
    frame = None
    W_cc = None
    if cfg.center_classifier_mode == "fixed_etf" and cfg.lam > 0:
        frame = make_etf(cfg.feature_dim, cfg.K, cfg.alpha,
                         cfg.seed * _SEED_STRIDE + _FRAME_OFFSET)
    elif cfg.center_classifier_mode == "learned" and cfg.lam > 0:
        rng = np.random.default_rng(cfg.seed * _SEED_STRIDE + _FRAME_OFFSET)
        W_cc = rng.standard_normal((cfg.feature_dim, cfg.K)) * np.sqrt(1.0 / cfg.feature_dim)
    return _TrainState(params=params, frame=frame, W_cc=W_cc)


def _loss_and_grads(cfg: TrainConfig, state: _TrainState, batch: FeatureBatch):
    """One full-batch loss evaluation with all gradients.

    Returns (pr, cr, total, feature_grads, wpr_grads, wcc_grads).
    """
    pr, d_feat, d_wpr = pr_loss_and_grad(batch, state.params.W_pr)
    cr = 0.0
    d_wcc = None
    if cfg.lam > 0:
        W_c = state.frame.matrix if state.frame is not None else state.W_cc
        cb = center_pool(batch)
        cr = _cr_loss_matrix(cb, W_c)
        d_feat = d_feat + cfg.lam * _cr_grad_features_matrix(cb, W_c)
        if state.W_cc is not None:
            d_wcc = cfg.lam * cr_grad_classifier(cb, state.W_cc)
    return pr, cr, pr + cfg.lam * cr, d_feat, d_wpr, d_wcc


def _evaluate(cfg: TrainConfig, state: _TrainState, iteration: int,
              train_batch: FeatureBatch, eval_batch: FeatureBatch,
              groups) -> dict:
    """One log record: losses and collapse statistics on the training
    features (where the regularizer acts), accuracy on held-out scenes
    from logits alone."""
    pr, cr, total, _, _, _ = _loss_and_grads(cfg, state, train_batch)
    _, logits, _ = forward(state.params, eval_batch.features)
    pred = np.argmax(logits, axis=1) + 1
    correct = pred == eval_batch.labels
    accuracy = float(correct.mean())
    per_class = []
    for k in range(1, cfg.K + 1):
        mask = eval_batch.labels == k
        if not mask.any():
            raise ValueError(f"evaluation set is missing class {k}")
        per_class.append(float(correct[mask].mean()))
    head, common, tail = groups
    stats = class_stats(train_batch)
    Zhat, zl, _ = centered_normalized_means(stats)
    record = {
        "iteration": iteration,
        "pr_loss": pr,
        "cr_loss": cr,
        "total": total,
        "equiang_std_centers": equiangularity_std(Zhat),
        "maxangle_avg_centers": max_angle_deviation(Zhat, Zhat.shape[0]),
        "self_duality_gap": self_duality_gap(state.params.W_pr, Zhat, zl),
        "accuracy": accuracy,
        "head_accuracy": float(np.mean([per_class[k - 1] for k in head])),
        "common_accuracy": float(np.mean([per_class[k - 1] for k in common])),
        "tail_accuracy": float(np.mean([per_class[k - 1] for k in tail])),
        "per_class_accuracy": per_class,
    }
    if state.frame is not None:
        record["frame_pairdist_sq_dev"] = _frame_pairdist_sq_dev(state.frame)
    for key, value in record.items():
        if key == "per_class_accuracy":
            bad = not all(np.isfinite(value))
        elif key == "iteration":
            bad = False
        else:
            bad = not np.isfinite(value)
        if bad:
            raise ValueError(f"non-finite metric {key} at iteration {iteration}")
    return record


def _frame_pairdist_sq_dev(frame: EtfFrame) -> float:
    """Worst deviation of squared pairwise column distances from the ETF
    constant alpha^2 * 2K/(K-1); 0 while the frame stays fixed."""
    W = frame.matrix
    K = frame.K
    sq = np.sum((W[:, :, None] - W[:, None, :]) ** 2, axis=0)
    target = frame.alpha ** 2 * 2 * K / (K - 1)
    iu = np.triu_indices(K, k=1)
    return float(np.abs(sq[iu] - target).max())


def train(cfg: TrainConfig) -> TrainLog:
    """Run the two-branch training loop and log metrics.

    Evaluates on freshly generated held-out scenes (disjoint seed range)
    at iteration 0, every eval_every iterations, and at the end.
    Divergence aborts with the last good records flagged.
    """
    train_scenes = make_scenes(cfg, cfg.n_train_scenes, 0)
    eval_scenes = make_scenes(cfg, cfg.n_eval_scenes, _EVAL_OFFSET)
    train_batch = _pool_scenes(train_scenes, cfg.K)
    eval_batch = _pool_scenes(eval_scenes, cfg.K)
    pixel_counts = np.sum([s.pixel_counts for s in train_scenes], axis=0)
    groups = head_common_tail_split(pixel_counts)

    state = _init_state(cfg)
    records = [
        _evaluate_with_features(cfg, state, 0, train_batch, eval_batch, groups)
    ]
    diverged = False
    for it in range(cfg.iterations):
        lr = cfg.lr if cfg.lr_schedule == "constant" else poly_lr(
            cfg.lr, it, cfg.iterations, cfg.poly_power)
        try:
            features, _, cache = forward(state.params, train_batch.features)
            fb = FeatureBatch(features=features, labels=train_batch.labels, K=cfg.K)
            pr, cr, total, d_feat, d_wpr, d_wcc = _loss_and_grads(cfg, state, fb)
            if not np.isfinite(total):
                raise DivergenceError(f"non-finite loss at iteration {it}")
            grads = backward(state.params, cache, d_feat, d_wpr)
            state.params = sgd_step(
                state.params, grads, lr, cfg.weight_decay,
                update_pr_classifier=cfg.pr_classifier_mode == "learned",
            )
            if d_wcc is not None:
                state.W_cc = state.W_cc - lr * d_wcc
        except (DivergenceError, NumericError):
            diverged = True
            break
        if (it + 1) % cfg.eval_every == 0 or it + 1 == cfg.iterations:
            records.append(
                _evaluate_with_features(cfg, state, it + 1, train_batch, eval_batch, groups)
            )
    head, common, tail = groups
    return TrainLog(records=records, head=list(head), common=list(common),
                    tail=list(tail), diverged=diverged)


def _evaluate_with_features(cfg, state, iteration, raw_train_batch, raw_eval_batch, groups):
    """Evaluation on raw batches: runs the extractor itself."""
    train_features, _, _ = forward(state.params, raw_train_batch.features)
    fb = FeatureBatch(features=train_features, labels=raw_train_batch.labels, K=cfg.K)
    return _evaluate(cfg, state, iteration, fb, raw_eval_batch, groups)


def _run_arm(arm_cfg: TrainConfig) -> TrainLog:
    return train(arm_cfg)


def _map_arms(configs, jobs: int):
    if jobs <= 1 or len(configs) <= 1:
        return [train(c) for c in configs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_arm, configs))


def run_ablation_grid(base: TrainConfig, jobs: int = 1):
    """Five paired-seed classifier variants: (PC, CC) in ABLATION_VARIANTS.

    Returns a list of row dicts with final accuracy and collapse metrics.
    """
    configs = []
    for pr_mode, cc_mode in ABLATION_VARIANTS:
        lam = 0.0 if cc_mode == "off" else base.lam
        configs.append(replace(base, pr_classifier_mode=pr_mode,
                               center_classifier_mode=cc_mode, lam=lam))
    logs = _map_arms(configs, jobs)
    rows = []
    for (pr_mode, cc_mode), cfg, log in zip(ABLATION_VARIANTS, configs, logs):
        rows.append(_summary_row(log, pr_mode=pr_mode, cc_mode=cc_mode, lam=cfg.lam))
    return rows


def lambda_sweep(base: TrainConfig, lambdas=None, jobs: int = 1):
    """Paired-seed sweep over the loss weight; defaults to 0.0 .. 0.6."""
    if lambdas is None:
        lambdas = DEFAULT_LAMBDA_GRID
    lambdas = [float(lv) for lv in lambdas]
    if any(lv < 0 for lv in lambdas):
        raise ValueError("all lambda values must be nonnegative")
    configs = [
        replace(base, lam=lv,
                center_classifier_mode="off" if lv == 0 else
                (base.center_classifier_mode if base.center_classifier_mode != "off"
                 else "fixed_etf"))
        for lv in lambdas
    ]
    logs = _map_arms(configs, jobs)
    return [_summary_row(log, lam=lv) for lv, log in zip(lambdas, logs)]


def _summary_row(log: TrainLog, **extra) -> dict:
    final = log.final
    row = dict(extra)
    row.update(
        accuracy=final["accuracy"],
        head_accuracy=final["head_accuracy"],
        common_accuracy=final["common_accuracy"],
        tail_accuracy=final["tail_accuracy"],
        equiang_std_centers=final["equiang_std_centers"],
        maxangle_avg_centers=final["maxangle_avg_centers"],
        self_duality_gap=final["self_duality_gap"],
        diverged=log.diverged,
    )
    return row
