"""Neural-collapse statistics and imbalance diagnostics.

Works on batches of last-layer features Z (N x d) with 1-based labels in
{1..K}. Class k corresponds to array index k-1 throughout. Metrics are
computed over the classes actually present in a batch; absent classes are
skipped and the effective class count is reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DegenerateColumnError,
    ExcludedClassError,
    InsufficientClassesError,
    NormalizationError,
    UndefinedCorrelationError,
)


@dataclass(frozen=True)
class FeatureBatch:
    """N feature vectors with integer labels in {1..K}."""

    features: np.ndarray
    labels: np.ndarray
    K: int

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
            raise ValueError(f"features must be N x d with N,d >= 1, got shape {features.shape}")
        if labels.shape != (features.shape[0],):
            raise ValueError("labels must be a length-N vector")
        if labels.min() < 1 or labels.max() > self.K:
            raise ValueError(f"labels must lie in 1..{self.K}")

    @property
    def N(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class ClassStats:
    """Per-class counts and means plus the global feature mean.

    class_means[k-1] is defined only where present[k-1] is True.
    """

    counts: np.ndarray
    class_means: np.ndarray
    global_mean: np.ndarray
    present: np.ndarray


@dataclass(frozen=True)
class NcReport:
    equiang_std_centers: float
    maxangle_avg_centers: float
    equiang_std_classifier: float | None
    maxangle_avg_classifier: float | None
    self_duality_gap: float | None
    n_classes_used: int
    excluded_classes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "equiang_std_centers": self.equiang_std_centers,
            "maxangle_avg_centers": self.maxangle_avg_centers,
            "equiang_std_classifier": self.equiang_std_classifier,
            "maxangle_avg_classifier": self.maxangle_avg_classifier,
            "self_duality_gap": self.self_duality_gap,
            "n_classes_used": self.n_classes_used,
            "excluded_classes": list(self.excluded_classes),
        }


def class_stats(batch: FeatureBatch) -> ClassStats:
    """Per-class means, counts, and the global mean of a feature batch.

    Accumulation is in ascending row order within each class, so results
    are bit-deterministic.
    """
    K, d = batch.K, batch.d
    counts = np.bincount(batch.labels - 1, minlength=K)
    means = np.zeros((K, d))
    present = counts > 0
    for k in np.nonzero(present)[0]:
        means[k] = batch.features[batch.labels == k + 1].mean(axis=0)
    return ClassStats(
        counts=counts,
        class_means=means,
        global_mean=batch.features.mean(axis=0),
        present=present,
    )


def centered_normalized_means(stats: ClassStats, eps: float = 1e-12):
    """Unit-normalized centered class means (z_bar_k - z_G) / ||.||.

    Returns (Zhat, class_labels, excluded_labels): Zhat holds one unit row
    per usable class; classes absent from the batch or whose centered mean
    has norm < eps are excluded and reported (1-based labels throughout).
    """
    present = np.nonzero(stats.present)[0]
    if present.size < 2:
        raise InsufficientClassesError(f"need >= 2 present classes, got {present.size}")
    centered = stats.class_means[present] - stats.global_mean
    norms = np.linalg.norm(centered, axis=1)
    usable = norms >= eps
    absent = [int(k + 1) for k in np.nonzero(~stats.present)[0]]
    excluded = sorted(absent + [int(k + 1) for k in present[~usable]])
    if usable.sum() < 2:
        raise InsufficientClassesError(
            f"fewer than 2 usable classes after excluding zero-norm means {excluded}"
        )
    Zhat = centered[usable] / norms[usable, None]
    labels = [int(k + 1) for k in present[usable]]
    return Zhat, labels, excluded


def _check_unit_rows(V: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2 or V.shape[0] < 2:
        raise ValueError(f"expected >= 2 row vectors, got shape {V.shape}")
    norms = np.linalg.norm(V, axis=1)
    bad = np.abs(norms - 1.0) > tol
    if np.any(bad):
        raise NormalizationError(f"rows {np.nonzero(bad)[0].tolist()} are not unit norm")
    return V


def _pair_cosines(V: np.ndarray) -> np.ndarray:
    G = V @ V.T
    iu = np.triu_indices(V.shape[0], k=1)
    return G[iu]


def equiangularity_std(V: np.ndarray) -> float:
    """Population std of pairwise cosines over all distinct row pairs.

    Zero exactly when the rows are equiangular (e.g. an ETF or an
    orthonormal set).
    """
    cos = _pair_cosines(_check_unit_rows(V))
    return float(np.std(cos))


def max_angle_deviation(V: np.ndarray, K_effective: int) -> float:
    """Mean over distinct pairs of |cos + 1/(K_effective - 1)|.

    Zero exactly at the maximal-angle configuration for K_effective
    directions. K_effective must equal the number of rows.
    """
    V = _check_unit_rows(V)
    if K_effective != V.shape[0]:
        raise ValueError(f"K_effective={K_effective} must equal the row count {V.shape[0]}")
    cos = _pair_cosines(V)
    return float(np.mean(np.abs(cos + 1.0 / (K_effective - 1))))


def self_duality_gap(W: np.ndarray, Zhat: np.ndarray, class_labels=None) -> float:
    """Average over classes of 1 - cos(w_k / ||w_k||, zhat_k).

    W is d x K with columns indexed by class; Zhat holds unit rows for the
    classes in `class_labels` (1-based; defaults to 1..rows). Zero iff the
    normalized classifier columns coincide with the centered class means.
    """
    W = np.asarray(W, dtype=np.float64)
    Zhat = np.asarray(Zhat, dtype=np.float64)
    if class_labels is None:
        class_labels = list(range(1, Zhat.shape[0] + 1))
    cols = W[:, np.asarray(class_labels, dtype=np.int64) - 1]
    norms = np.linalg.norm(cols, axis=0)
    if np.any(norms == 0):
        raise DegenerateColumnError("classifier has a zero-norm column")
    cos = np.sum((cols / norms).T * Zhat, axis=1)
    return float(np.mean(1.0 - cos))


def imbalance_factor(counts) -> float:
    """n_max / n_min over classes; callers must filter zero-count classes."""
    counts = np.asarray(counts)
    if counts.size == 0:
        raise ValueError("counts is empty")
    if np.any(counts <= 0):
        raise ExcludedClassError(
            "zero-count class in counts; exclude absent classes before computing the factor"
        )
    return float(counts.max() / counts.min())


def pearson(a, f) -> float:
    """Pearson correlation coefficient Cov(a,f) / (sigma(a) sigma(f))."""
    a = np.asarray(a, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    if a.shape != f.shape or a.ndim != 1 or a.size < 2:
        raise ValueError("pearson expects two equal-length vectors with K >= 2")
    da, df = a - a.mean(), f - f.mean()
    sa, sf = np.sqrt(np.sum(da * da)), np.sqrt(np.sum(df * df))
    if sa == 0 or sf == 0:
        raise UndefinedCorrelationError("correlation undefined for a constant argument")
    r = float(np.sum(da * df) / (sa * sf))
    return max(-1.0, min(1.0, r))


def head_common_tail_split(counts):
    """Partition classes into (head, common, tail) by descending count.

    Outer groups get floor(K/3) classes each and the middle group takes
    the remainder (200 -> 66/68/66). Ties are broken by ascending class
    index. Returns 1-based label lists.
    """
    counts = np.asarray(counts)
    K = counts.size
    if K < 3:
        raise ValueError(f"need K >= 3 classes to split, got {K}")
    if np.any(counts <= 0):
        raise ExcludedClassError("zero-count class; exclude absent classes before splitting")
    order = np.lexsort((np.arange(K), -counts))
    outer = K // 3
    head = order[:outer]
    common = order[outer : K - outer]
    tail = order[K - outer :]
    return (
        sorted(int(k + 1) for k in head),
        sorted(int(k + 1) for k in common),
        sorted(int(k + 1) for k in tail),
    )


def nc_report(batch: FeatureBatch, classifier: np.ndarray | None = None, eps: float = 1e-12) -> NcReport:
    """Full collapse report for a feature batch, optionally with classifier
    geometry and the self-duality gap against it."""
    stats = class_stats(batch)
    Zhat, labels, excluded = centered_normalized_means(stats, eps)
    n_used = Zhat.shape[0]
    report = {
        "equiang_std_centers": equiangularity_std(Zhat),
        "maxangle_avg_centers": max_angle_deviation(Zhat, n_used),
        "equiang_std_classifier": None,
        "maxangle_avg_classifier": None,
        "self_duality_gap": None,
    }
    if classifier is not None:
        W = np.asarray(classifier, dtype=np.float64)
        cols = W[:, np.asarray(labels, dtype=np.int64) - 1]
        norms = np.linalg.norm(cols, axis=0)
        if np.any(norms == 0):
            raise DegenerateColumnError("classifier has a zero-norm column")
        What = (cols / norms).T
        report["equiang_std_classifier"] = equiangularity_std(What)
        report["maxangle_avg_classifier"] = max_angle_deviation(What, n_used)
        report["self_duality_gap"] = self_duality_gap(W, Zhat, labels)
    return NcReport(n_classes_used=n_used, excluded_classes=excluded, **report)
