"""Two-layer perceptron feature extractor with hand-derived backprop.

Maps raw per-pixel inputs (N x s) through a ReLU hidden layer to last-layer
features Z (N x d), then to logits via the pixel classifier W_pr (d x K).
Gradients are exact and checked against finite differences in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, DivergenceError, StaleCacheError


@dataclass
class MlpParams:
    W1: np.ndarray  # s x h
    b1: np.ndarray  # h
    W2: np.ndarray  # h x d
    b2: np.ndarray  # d
    W_pr: np.ndarray  # d x K

    def check_finite(self) -> None:
        for name, arr in self.blocks().items():
            if not np.all(np.isfinite(arr)):
                raise DivergenceError(f"non-finite values in parameter block {name}")

    def blocks(self) -> dict:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2, "W_pr": self.W_pr}

    def copy(self) -> "MlpParams":
        return MlpParams(*(v.copy() for v in self.blocks().values()))


@dataclass
class ForwardCache:
    """Activations saved by forward() for the matching backward()."""

    params: MlpParams
    inputs: np.ndarray
    pre1: np.ndarray
    hidden: np.ndarray


@dataclass
class MlpGrads:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    W_pr: np.ndarray

    def blocks(self) -> dict:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2, "W_pr": self.W_pr}


def init_params(input_dim: int, hidden_dim: int, feature_dim: int, K: int, seed: int) -> MlpParams:
    """He-scaled Gaussian weights, zero biases, deterministic per seed."""
    rng = np.random.default_rng(seed)
    return MlpParams(
        W1=rng.standard_normal((input_dim, hidden_dim)) * np.sqrt(2.0 / input_dim),
        b1=np.zeros(hidden_dim),
        W2=rng.standard_normal((hidden_dim, feature_dim)) * np.sqrt(2.0 / hidden_dim),
        b2=np.zeros(feature_dim),
        W_pr=rng.standard_normal((feature_dim, K)) * np.sqrt(1.0 / feature_dim),
    )


def forward(params: MlpParams, inputs: np.ndarray):
    """Returns (features Z: N x d, logits: N x K, cache for backward)."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[1] != params.W1.shape[0]:
        raise DimensionError(f"inputs shape {inputs.shape} incompatible with W1 {params.W1.shape}")
    # overflow surfaces as non-finite values downstream, where the loss
    # kernels raise NumericError; no need for a warning here
    with np.errstate(over="ignore"):
        pre1 = inputs @ params.W1 + params.b1
        hidden = np.maximum(pre1, 0.0)
        features = hidden @ params.W2 + params.b2
        logits = features @ params.W_pr
    cache = ForwardCache(params=params, inputs=inputs, pre1=pre1, hidden=hidden)
    return features, logits, cache


def backward(params: MlpParams, cache: ForwardCache, feature_grads: np.ndarray,
             classifier_grads: np.ndarray) -> MlpGrads:
    """Chain-rule transport of dL/dZ and dL/dW_pr into parameter space.

    feature_grads is N x d (gradient of the scalar loss w.r.t. Z);
    classifier_grads is d x K (already computed by the loss).
    """
    if cache.params is not params:
        raise StaleCacheError("cache was produced by a different parameter set")
    g = np.asarray(feature_grads, dtype=np.float64)
    if g.shape != (cache.inputs.shape[0], params.W2.shape[1]):
        raise DimensionError(f"feature_grads shape {g.shape} does not match the forward pass")
    dW2 = cache.hidden.T @ g
    db2 = g.sum(axis=0)
    dh = g @ params.W2.T
    dh[cache.pre1 <= 0] = 0.0
    dW1 = cache.inputs.T @ dh
    db1 = dh.sum(axis=0)
    return MlpGrads(W1=dW1, b1=db1, W2=dW2, b2=db2, W_pr=np.asarray(classifier_grads, dtype=np.float64))


def sgd_step(params: MlpParams, grads: MlpGrads, lr: float, weight_decay: float = 0.0,
             update_pr_classifier: bool = True) -> MlpParams:
    """p <- p - lr * (grad + weight_decay * p) on the learnable blocks.

    With update_pr_classifier=False the pixel classifier is left untouched
    (the fixed-classifier ablation). The ETF frame is not a parameter and
    is never updated by any step.
    """
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    if weight_decay < 0:
        raise ValueError(f"weight decay must be nonnegative, got {weight_decay}")
    new = {}
    for name, p in params.blocks().items():
        g = grads.blocks()[name]
        if not np.all(np.isfinite(g)):
            raise DivergenceError(f"non-finite gradient in block {name}")
        if name == "W_pr" and not update_pr_classifier:
            new[name] = p.copy()
        else:
            new[name] = p - lr * (g + weight_decay * p)
    return MlpParams(**new)


def poly_lr(base_lr: float, iteration: int, total_iterations: int, power: float = 0.9) -> float:
    """Polynomial decay schedule: base * (1 - it/total)^power."""
    frac = min(iteration, total_iterations) / max(total_iterations, 1)
    return base_lr * (1.0 - frac) ** power if frac < 1.0 else 0.0


def predict(params: MlpParams, inputs: np.ndarray) -> np.ndarray:
    """1-based argmax class labels from logits only; the center branch
    plays no part in evaluation."""
    _, logits, _ = forward(params, inputs)
    return np.argmax(logits, axis=1) + 1
