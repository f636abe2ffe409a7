"""Two-branch loss: per-sample cross-entropy plus the center-collapse
regularizer against a fixed ETF classifier, with analytic gradients.

The regularizer pools features into per-class centers, scores each center
against the fixed frame with a softmax cross-entropy, and weights the
result by lambda in the total loss. No bias terms anywhere; all softmax
evaluations subtract the max logit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .etf import EtfFrame
from .exceptions import DimensionError, NumericError
from .metrics import FeatureBatch


@dataclass(frozen=True)
class CenterBatch:
    """Per-class feature centers of one batch.

    centers has one row per present class (ascending class order);
    center_labels are the matching 1-based labels; source_map[i] is the
    row of `centers` that input row i contributed to, used to scatter
    center gradients back to inputs.
    """

    centers: np.ndarray
    center_labels: np.ndarray
    counts: np.ndarray
    source_map: np.ndarray


@dataclass(frozen=True)
class LossBreakdown:
    pr_loss: float
    cr_loss: float
    total: float
    lam: float


def center_pool(batch: FeatureBatch) -> CenterBatch:
    """Average features per present class (fixed ascending class order)."""
    present = np.unique(batch.labels)
    centers = np.empty((present.size, batch.d))
    counts = np.empty(present.size, dtype=np.int64)
    source_map = np.empty(batch.N, dtype=np.int64)
    for row, lab in enumerate(present):
        mask = batch.labels == lab
        counts[row] = mask.sum()
        centers[row] = batch.features[mask].mean(axis=0)
        source_map[mask] = row
    return CenterBatch(centers=centers, center_labels=present, counts=counts, source_map=source_map)


def softmax_probs(z: np.ndarray, W: np.ndarray) -> np.ndarray:
    """p_k = exp(z.w_k) / sum_k' exp(z.w_k'), with max-logit subtraction."""
    z = np.asarray(z, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    logits = z @ W
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite logits in softmax")
    return _softmax_rows(np.atleast_2d(logits))[0] if logits.ndim == 1 else _softmax_rows(logits)


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _center_probs(cb: CenterBatch, W: np.ndarray) -> np.ndarray:
    """Softmax over all K classes for every center row."""
    logits = cb.centers @ W
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite center logits")
    return _softmax_rows(logits)


def _check_dims(feature_dim: int, W: np.ndarray) -> None:
    if W.ndim != 2 or W.shape[0] != feature_dim:
        raise DimensionError(f"classifier shape {W.shape} incompatible with feature dim {feature_dim}")


def cr_loss(cb: CenterBatch, frame: EtfFrame) -> float:
    """Center-collapse loss: -sum over present centers of log p_k(z_bar_k).

    A sum (not a mean) over centers, so each present class contributes one
    equally weighted cross-entropy term regardless of its sample count.
    """
    return _cr_loss_matrix(cb, frame.matrix)


def _cr_loss_matrix(cb: CenterBatch, W: np.ndarray) -> float:
    W = np.asarray(W, dtype=np.float64)
    _check_dims(cb.centers.shape[1], W)
    logits = cb.centers @ W
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    own = shifted[np.arange(cb.centers.shape[0]), cb.center_labels - 1]
    return float(np.sum(log_norm - own))


def cr_grad_classifier(cb: CenterBatch, W: np.ndarray) -> np.ndarray:
    """Gradient of the center loss w.r.t. a d x K classifier.

    Column k combines a within-class pull (p_k(z_bar_k) - 1) z_bar_k and a
    between-class push sum_{k' != k} p_k(z_bar_k') z_bar_k'. Columns of
    classes absent from the batch receive only the push terms.
    """
    W = np.asarray(W, dtype=np.float64)
    _check_dims(cb.centers.shape[1], W)
    P = _center_probs(cb, W)
    Y = np.zeros_like(P)
    Y[np.arange(cb.centers.shape[0]), cb.center_labels - 1] = 1.0
    return cb.centers.T @ (P - Y)


def cr_grad_features(cb: CenterBatch, frame: EtfFrame) -> np.ndarray:
    """Gradient of the center loss w.r.t. each raw input row.

    Row i of class k gets (1/n_k) sum_k' p_k'(z_bar_k) (w_k' - w_k); all
    rows of one class therefore receive identical gradients, scaled down
    by the class count.
    """
    return _cr_grad_features_matrix(cb, frame.matrix)


def _cr_grad_features_matrix(cb: CenterBatch, W: np.ndarray) -> np.ndarray:
    W = np.asarray(W, dtype=np.float64)
    _check_dims(cb.centers.shape[1], W)
    P = _center_probs(cb, W)
    # sum_k' p_k' w_k' - w_k  (probabilities sum to one)
    per_center = P @ W.T - W[:, cb.center_labels - 1].T
    per_center /= cb.counts[:, None]
    return per_center[cb.source_map]


def pr_loss_and_grad(batch: FeatureBatch, W_pr: np.ndarray):
    """Mean cross-entropy over all rows plus analytic gradients.

    Returns (loss, d_features: N x d, d_classifier: d x K).
    """
    W_pr = np.asarray(W_pr, dtype=np.float64)
    _check_dims(batch.d, W_pr)
    if W_pr.shape[1] != batch.K:
        raise DimensionError(f"classifier has {W_pr.shape[1]} columns, batch has K={batch.K}")
    with np.errstate(over="ignore"):
        logits = batch.features @ W_pr
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite logits")
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    P = e / e.sum(axis=1, keepdims=True)
    idx = np.arange(batch.N)
    own = shifted[idx, batch.labels - 1]
    loss = float(np.mean(np.log(e.sum(axis=1)) - own))
    delta = P.copy()
    delta[idx, batch.labels - 1] -= 1.0
    delta /= batch.N
    return loss, delta @ W_pr.T, batch.features.T @ delta


def total_loss(batch: FeatureBatch, W_pr: np.ndarray, frame: EtfFrame, lam: float):
    """Combined two-branch loss: total = pr + lambda * cr.

    Returns (LossBreakdown, combined feature gradients, pixel-classifier
    gradients). The frame itself is fixed and receives no gradient.
    """
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    pr, d_feat, d_wpr = pr_loss_and_grad(batch, W_pr)
    if lam == 0:
        return LossBreakdown(pr_loss=pr, cr_loss=0.0, total=pr, lam=0.0), d_feat, d_wpr
    cb = center_pool(batch)
    cr = cr_loss(cb, frame)
    d_feat = d_feat + lam * cr_grad_features(cb, frame)
    return LossBreakdown(pr_loss=pr, cr_loss=cr, total=pr + lam * cr, lam=float(lam)), d_feat, d_wpr
