"""Scikit-learn estimator wrapping the two-branch training loop.

CecoClassifier fits the small MLP extractor with per-sample cross-entropy
plus the center-collapse regularizer, and predicts from logits alone, so
it drops into sklearn pipelines, grid search, and cross-validation.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .etf import make_etf
from .losses import pr_loss_and_grad, total_loss
from .metrics import FeatureBatch
from .model import backward, forward, init_params, poly_lr, sgd_step


class CecoClassifier(BaseEstimator, ClassifierMixin):
    """MLP classifier trained with a center-collapse regularizer.

    Parameters
    ----------
    lam : weight of the center regularization branch (0 disables it).
    alpha : norm of the fixed ETF center-classifier columns.
    hidden_dim, feature_dim : extractor widths.
    lr, weight_decay, iterations : SGD settings (full batch).
    lr_schedule : "constant" or "poly" (power 0.9 decay).
    seed : controls initialization and the ETF rotation.
    """

    def __init__(self, lam=0.4, alpha=1.0, hidden_dim=32, feature_dim=16,
                 lr=0.5, weight_decay=0.0, iterations=400,
                 lr_schedule="constant", seed=0):
        self.lam = lam
        self.alpha = alpha
        self.hidden_dim = hidden_dim
        self.feature_dim = feature_dim
        self.lr = lr
        self.weight_decay = weight_decay
        self.iterations = iterations
        self.lr_schedule = lr_schedule
        self.seed = seed

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        K = self.classes_.size
        if K < 2:
            raise ValueError("need at least 2 classes")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.lam > 0 and self.feature_dim < K:
            raise ValueError(f"feature_dim must be >= n_classes for the ETF, got {self.feature_dim} < {K}")
        labels = encoded.astype(np.int64) + 1

        params = init_params(X.shape[1], self.hidden_dim, self.feature_dim, K, self.seed)
        frame = make_etf(self.feature_dim, K, self.alpha, self.seed + 1) if self.lam > 0 else None
        for it in range(self.iterations):
            lr = self.lr if self.lr_schedule == "constant" else poly_lr(
                self.lr, it, self.iterations)
            features, _, cache = forward(params, X)
            fb = FeatureBatch(features=features, labels=labels, K=K)
            if self.lam > 0:
                _, d_feat, d_wpr = total_loss(fb, params.W_pr, frame, self.lam)
            else:
                _, d_feat, d_wpr = pr_loss_and_grad(fb, params.W_pr)
            grads = backward(params, cache, d_feat, d_wpr)
            params = sgd_step(params, grads, lr, self.weight_decay)
        self.params_ = params
        # Kept for inspection only; prediction never reads it.
        self.frame_ = frame
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X)
        _, logits, _ = forward(self.params_, X)
        return logits

    def predict(self, X):
        logits = self.decision_function(X)
        return self.classes_[np.argmax(logits, axis=1)]

    def predict_proba(self, X):
        logits = self.decision_function(X)
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)
