"""Simplex equiangular tight frames (ETFs).

A simplex ETF is a set of K equal-norm vectors in R^d (d >= K) whose
pairwise cosines all equal -1/(K-1), the maximal equiangular separation.
This module constructs such frames from a seeded random rotation,
verifies candidate matrices against the defining Gram identity, and
exposes the separation functional max_{k != k'} cos(w_k, w_k').
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateColumnError, DimensionError

DEFAULT_TOL = 1e-8

# Columns with norm below this are treated as directionless.
_ZERO_NORM = 1e-300


@dataclass(frozen=True)
class OrthonormalBasis:
    """d x K matrix U with orthonormal columns (U^T U = I_K)."""

    columns: np.ndarray
    d: int
    K: int


@dataclass(frozen=True)
class EtfFrame:
    """A scaled simplex ETF: columns of `matrix` have norm `alpha` and
    pairwise inner products alpha^2 * (-1/(K-1))."""

    matrix: np.ndarray
    d: int
    K: int
    alpha: float


@dataclass(frozen=True)
class EtfCheckReport:
    """Worst-case deviations of a candidate matrix from the ETF identity."""

    max_norm_deviation: float
    max_offdiag_deviation: float
    max_pairwise_cosine: float
    is_etf: bool


def make_rotation(d: int, K: int, seed: int) -> OrthonormalBasis:
    """Deterministic seeded orthonormal d x K basis.

    Orthonormalizes a standard-Gaussian matrix via QR with a sign
    convention on the diagonal of R, so the result is unique and
    bit-reproducible for a given (d, K, seed).
    """
    if d < 1 or K < 1:
        raise DimensionError(f"d and K must be positive, got d={d}, K={K}")
    if d < K:
        raise DimensionError(f"need d >= K for an orthonormal basis, got d={d} < K={K}")
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((d, K))
    Q, R = np.linalg.qr(G)
    # Fix the sign ambiguity of QR so the basis is deterministic.
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    Q = Q * signs
    return OrthonormalBasis(columns=Q, d=d, K=K)


def make_etf(d: int, K: int, alpha: float, seed: int) -> EtfFrame:
    """Construct a scaled simplex ETF.

    matrix = alpha * sqrt(K/(K-1)) * U * (I_K - (1/K) 1 1^T)
    with U a seeded random rotation. Columns have norm alpha and pairwise
    inner products alpha^2 * (-1/(K-1)).
    """
    if K < 2:
        raise ValueError(f"K must be >= 2 (pairwise angle undefined for K={K})")
    if d < K:
        raise DimensionError(f"need d >= K, got d={d} < K={K}")
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    U = make_rotation(d, K, seed).columns
    centering = np.eye(K) - np.full((K, K), 1.0 / K)
    M = np.sqrt(K / (K - 1)) * U @ centering
    return EtfFrame(matrix=alpha * M, d=d, K=K, alpha=float(alpha))


def _column_norms(W: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(W, axis=0)
    if np.any(norms <= _ZERO_NORM):
        bad = int(np.argmin(norms))
        raise DegenerateColumnError(f"column {bad} has zero norm")
    return norms


def verify_etf(W: np.ndarray, tol: float = DEFAULT_TOL) -> EtfCheckReport:
    """Check a d x K matrix against the ETF Gram identity.

    Norms are compared to their common (mean) value; off-diagonal entries
    of the normalized Gram matrix are compared to -1/(K-1), so the check
    is scale-independent and serves any alpha.
    """
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[1] < 2:
        raise DimensionError(f"expected a d x K matrix with K >= 2, got shape {W.shape}")
    K = W.shape[1]
    norms = _column_norms(W)
    common = norms.mean()
    max_norm_dev = float(np.abs(norms - common).max())

    cosines = _pairwise_cosines(W, norms)
    target = -1.0 / (K - 1)
    off = np.abs(cosines - target)
    max_offdiag_dev = float(off.max())
    return EtfCheckReport(
        max_norm_deviation=max_norm_dev,
        max_offdiag_deviation=max_offdiag_dev,
        max_pairwise_cosine=float(cosines.max()),
        is_etf=bool(max_norm_dev <= tol and max_offdiag_dev <= tol),
    )


def _pairwise_cosines(W: np.ndarray, norms: np.ndarray) -> np.ndarray:
    """Off-diagonal cosines of the columns of W, as a flat array."""
    Wn = W / norms
    G = Wn.T @ Wn
    K = G.shape[0]
    iu = np.triu_indices(K, k=1)
    return G[iu]


def max_pairwise_cosine(W: np.ndarray) -> float:
    """max over k != k' of cos(w_k, w_k').

    For any matrix with K equal-norm columns this is >= -1/(K-1), with
    equality exactly when the columns form a simplex ETF.
    """
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[1] < 2:
        raise DimensionError(f"expected a d x K matrix with K >= 2, got shape {W.shape}")
    norms = _column_norms(W)
    return float(_pairwise_cosines(W, norms).max())


def save_frame(frame: EtfFrame, path) -> None:
    """Write a frame in the plain-text format: `d K alpha` then d rows of
    K values at full float64 precision."""
    lines = [f"{frame.d} {frame.K} {frame.alpha:.17g}"]
    for row in frame.matrix:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    from .io import atomic_write_text

    atomic_write_text(path, "\n".join(lines) + "\n")


def load_frame(path) -> EtfFrame:
    """Read a frame written by :func:`save_frame`."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise ValueError(f"{path}: malformed frame header {header!r}")
        d, K = int(header[0]), int(header[1])
        alpha = float(header[2])
        rows = []
        for i in range(d):
            parts = fh.readline().split()
            if len(parts) != K:
                raise ValueError(f"{path}: row {i + 1} has {len(parts)} values, expected {K}")
            rows.append([float(p) for p in parts])
    return EtfFrame(matrix=np.array(rows, dtype=np.float64), d=d, K=K, alpha=alpha)
