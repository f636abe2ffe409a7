"""Finite-difference verification of every analytic gradient.

Central differences with step 1e-5 in float64; a suite passes when the
worst relative error over its random instances is at most TOL. The same
suites back the `grad-check` CLI subcommand and the test suite.
"""

from __future__ import annotations

import numpy as np

from . import losses
from .etf import make_etf
from .losses import (
    _cr_loss_matrix,
    center_pool,
    cr_grad_classifier,
    cr_loss,
    pr_loss_and_grad,
    total_loss,
)
from .metrics import FeatureBatch
from .model import backward, forward, init_params

STEP = 1e-5
TOL = 1e-6


def numeric_grad(f, x: np.ndarray, step: float = STEP) -> np.ndarray:
    """Central-difference gradient of scalar f at x, elementwise."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        fp = f(x)
        flat[i] = orig - step
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * step)
    return grad


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    diff = np.abs(analytic - numeric).max()
    scale = max(np.abs(analytic).max(), np.abs(numeric).max(), 1e-8)
    return float(diff / scale)


def _random_center_batch(rng, K: int, d: int):
    n = int(rng.integers(2 * K, 4 * K))
    labels = np.concatenate([np.arange(1, K + 1), rng.integers(1, K + 1, size=n - K)])
    features = rng.standard_normal((n, d))
    return FeatureBatch(features=features, labels=labels, K=K)


def classifier_grad_suite(trials: int = 20, seed: int = 0) -> float:
    """Analytic center-loss gradient w.r.t. an arbitrary classifier."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        K = int(rng.integers(2, 7))
        d = int(rng.integers(K, 2 * K + 3))
        cb = center_pool(_random_center_batch(rng, K, d))
        W = rng.standard_normal((d, K))
        analytic = cr_grad_classifier(cb, W)
        numeric = numeric_grad(lambda M: _cr_loss_matrix(cb, M), W)
        worst = max(worst, rel_error(analytic, numeric))
    return worst


def feature_grad_suite(trials: int = 20, seed: int = 0, grad_fn=None) -> float:
    """Center-loss gradient w.r.t. raw features, through the pooling.

    grad_fn defaults to the production implementation; tests may inject a
    corrupted one to confirm the check catches it.
    """
    if grad_fn is None:
        grad_fn = losses.cr_grad_features
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        K = int(rng.integers(2, 7))
        d = int(rng.integers(K, 2 * K + 3))
        batch = _random_center_batch(rng, K, d)
        frame = make_etf(d, K, float(rng.uniform(0.5, 2.0)), int(rng.integers(1 << 30)))
        analytic = grad_fn(center_pool(batch), frame)

        def loss_of_features(F, labels=batch.labels, K=K, frame=frame):
            fb = FeatureBatch(features=F, labels=labels, K=K)
            return cr_loss(center_pool(fb), frame)

        numeric = numeric_grad(loss_of_features, batch.features.copy())
        worst = max(worst, rel_error(analytic, numeric))
    return worst


def pr_grad_suite(trials: int = 20, seed: int = 0) -> float:
    """Per-sample cross-entropy gradients w.r.t. features and classifier."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        K = int(rng.integers(2, 7))
        d = int(rng.integers(2, 9))
        n = int(rng.integers(3, 20))
        batch = FeatureBatch(features=rng.standard_normal((n, d)),
                             labels=rng.integers(1, K + 1, size=n), K=K)
        W = rng.standard_normal((d, K))
        _, d_feat, d_w = pr_loss_and_grad(batch, W)

        def loss_f(F, labels=batch.labels, K=K, W=W):
            return pr_loss_and_grad(FeatureBatch(features=F, labels=labels, K=K), W)[0]

        def loss_w(M, batch=batch):
            return pr_loss_and_grad(batch, M)[0]

        worst = max(worst, rel_error(d_feat, numeric_grad(loss_f, batch.features.copy())))
        worst = max(worst, rel_error(d_w, numeric_grad(loss_w, W.copy())))
    return worst


def end_to_end_suite(trials: int = 5, seed: int = 0, lams=(0.0, 0.4, 1.0)) -> float:
    """Full parameter gradients of the total loss through the MLP."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        K, s, h, d, n = 3, 4, 5, 4, 12
        labels = np.concatenate([np.arange(1, K + 1), rng.integers(1, K + 1, size=n - K)])
        inputs = rng.standard_normal((n, s))
        frame = make_etf(d, K, 1.0, int(rng.integers(1 << 30)))
        params = init_params(s, h, d, K, int(rng.integers(1 << 30)))
        for lam in lams:
            features, _, cache = forward(params, inputs)
            fb = FeatureBatch(features=features, labels=labels, K=K)
            if lam > 0:
                _, d_feat, d_wpr = total_loss(fb, params.W_pr, frame, lam)
            else:
                _, d_feat, d_wpr = pr_loss_and_grad(fb, params.W_pr)
            grads = backward(params, cache, d_feat, d_wpr)
            for name in grads.blocks():
                def scalar_loss(block, name=name, lam=lam):
                    trial = params.copy()
                    setattr(trial, name, block)
                    F, _, _ = forward(trial, inputs)
                    fb2 = FeatureBatch(features=F, labels=labels, K=K)
                    if lam > 0:
                        breakdown, _, _ = total_loss(fb2, trial.W_pr, frame, lam)
                        return breakdown.total
                    return pr_loss_and_grad(fb2, trial.W_pr)[0]

                numeric = numeric_grad(scalar_loss, getattr(params, name).copy())
                worst = max(worst, rel_error(grads.blocks()[name], numeric))
    return worst


def run_all(trials: int = 20, seed: int = 0, feature_grad_fn=None) -> dict:
    """All suites; returns {suite name: worst relative error}."""
    return {
        "center_classifier": classifier_grad_suite(trials, seed),
        "center_features": feature_grad_suite(trials, seed, feature_grad_fn),
        "pixel_ce": pr_grad_suite(trials, seed),
        "end_to_end": end_to_end_suite(max(2, trials // 4), seed),
    }
