"""Synthetic imbalanced-segmentation scenes.

Each scene is an H x W grid of pixels. Class pixel frequencies follow a
geometric profile whose head-to-tail ratio is the target imbalance factor
beta. Labels form spatially contiguous blobs (quota-constrained
nearest-seed regions) and per-pixel inputs are class-dependent Gaussians
box-averaged over a neighborhood, so neighboring pixels are correlated.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from .exceptions import GenerationError


@dataclass(frozen=True)
class SceneConfig:
    height: int = 32
    width: int = 32
    K: int = 10
    beta: float = 100.0
    input_dim: int = 8
    blob_count: int = 30
    noise_sigma: float = 1.5
    smooth_radius: int = 1
    seed: int = 0
    # Scenes sharing a palette_seed share the per-class appearance means,
    # so models generalize across scenes; `seed` varies layout and noise.
    palette_seed: int = 0

    def __post_init__(self):
        if self.K < 3:
            raise ValueError(f"K must be >= 3, got {self.K}")
        if self.beta < 1:
            raise ValueError(f"beta must be >= 1, got {self.beta}")
        if self.height < 1 or self.width < 1 or self.height * self.width < self.K:
            raise ValueError("grid must hold at least one pixel per class")
        if self.input_dim < 1:
            raise ValueError("input_dim must be positive")
        if self.blob_count < self.K:
            raise ValueError(f"blob_count {self.blob_count} < K={self.K}: every class needs a seed")
        if self.smooth_radius < 0:
            raise ValueError("smooth_radius must be nonnegative")

    def to_mapping(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Scene:
    """Realized scene: raw per-pixel inputs, 1-based labels, class counts."""

    inputs: np.ndarray
    labels: np.ndarray
    pixel_counts: np.ndarray
    height: int
    width: int
    K: int


def target_pixel_counts(cfg: SceneConfig) -> np.ndarray:
    """Geometric class-frequency profile scaled to the pixel budget.

    Class k gets a share proportional to r^(k-1) with r = beta^(-1/(K-1)),
    so class 1 is beta times as frequent as class K. Rounded by largest
    remainder to sum exactly to H*W.
    """
    N = cfg.height * cfg.width
    ratio = cfg.beta ** (-1.0 / (cfg.K - 1))
    weights = ratio ** np.arange(cfg.K)
    ideal = N * weights / weights.sum()
    counts = _largest_remainder(ideal, N)
    if counts.min() < 1:
        raise GenerationError(
            f"profile infeasible: beta={cfg.beta} with {N} pixels leaves a class with 0 pixels"
        )
    return counts


def _largest_remainder(ideal: np.ndarray, total: int) -> np.ndarray:
    base = np.floor(ideal).astype(np.int64)
    short = total - int(base.sum())
    order = np.argsort(-(ideal - base), kind="stable")
    base[order[:short]] += 1
    return base


def _seed_allocation(cfg: SceneConfig, counts: np.ndarray) -> np.ndarray:
    """Blob seeds per class: one guaranteed each, the rest by frequency."""
    extra = cfg.blob_count - cfg.K
    ideal = extra * counts / counts.sum()
    return 1 + _largest_remainder(ideal, extra)


def gen_scene(cfg: SceneConfig) -> Scene:
    """Generate one scene, deterministically per cfg.seed."""
    counts = target_pixel_counts(cfg)
    seeds_per_class = _seed_allocation(cfg, counts)
    rng = np.random.default_rng(cfg.seed)

    H, W, K = cfg.height, cfg.width, cfg.K
    N = H * W
    seed_pos = rng.uniform(low=(0, 0), high=(H, W), size=(cfg.blob_count, 2))
    seed_class = np.repeat(np.arange(K), seeds_per_class)

    ys, xs = np.meshgrid(np.arange(H) + 0.5, np.arange(W) + 0.5, indexing="ij")
    pixels = np.column_stack([ys.ravel(), xs.ravel()])
    # Distance from every pixel to the nearest seed of each class.
    d2 = ((pixels[:, None, :] - seed_pos[None, :, :]) ** 2).sum(axis=2)
    dist = np.full((N, K), np.inf)
    for k in range(K):
        dist[:, k] = d2[:, seed_class == k].min(axis=1)

    labels = _quota_assignment(dist, counts)

    palette_rng = np.random.default_rng(cfg.palette_seed)
    class_means = palette_rng.standard_normal((K, cfg.input_dim))
    inputs = class_means[labels] + cfg.noise_sigma * rng.standard_normal((N, cfg.input_dim))
    if cfg.smooth_radius > 0:
        size = 2 * cfg.smooth_radius + 1
        grid = inputs.reshape(H, W, cfg.input_dim)
        for c in range(cfg.input_dim):
            grid[:, :, c] = ndimage.uniform_filter(grid[:, :, c], size=size, mode="nearest")
        inputs = grid.reshape(N, cfg.input_dim)

    return Scene(
        inputs=inputs,
        labels=(labels + 1).astype(np.int64),
        pixel_counts=np.bincount(labels, minlength=K),
        height=H,
        width=W,
        K=K,
    )


def _quota_assignment(dist: np.ndarray, quota: np.ndarray) -> np.ndarray:
    """Assign each pixel to a class, nearest-seed first, respecting exact
    per-class pixel quotas. Returns 0-based labels."""
    N, K = dist.shape
    order = np.argsort(dist, axis=None, kind="stable")
    labels = np.full(N, -1, dtype=np.int64)
    remaining = quota.astype(np.int64).copy()
    unassigned = N
    for flat in order:
        pixel, k = divmod(int(flat), K)
        if labels[pixel] >= 0 or remaining[k] == 0:
            continue
        labels[pixel] = k
        remaining[k] -= 1
        unassigned -= 1
        if unassigned == 0:
            break
    return labels


def scene_center_counts(scenes) -> np.ndarray:
    """Per-class count of scenes in which the class appears.

    One center per (scene, present class): this is the sample count seen
    by the center branch, to compare against raw pixel counts.
    """
    scenes = list(scenes)
    if not scenes:
        raise ValueError("need at least one scene")
    K = scenes[0].K
    counts = np.zeros(K, dtype=np.int64)
    for scene in scenes:
        counts += (scene.pixel_counts > 0).astype(np.int64)
    return counts
