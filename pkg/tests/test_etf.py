import numpy as np
import pytest

from ceco.etf import (
    load_frame,
    make_etf,
    make_rotation,
    max_pairwise_cosine,
    save_frame,
    verify_etf,
)
from ceco.exceptions import DegenerateColumnError, DimensionError


class TestMakeRotation:
    def test_square_orthonormal(self):
        U = make_rotation(4, 4, 7).columns
        assert np.abs(U.T @ U - np.eye(4)).max() < 1e-10

    def test_tall_orthonormal(self):
        U = make_rotation(3, 2, 0).columns
        assert U.shape == (3, 2)
        assert np.abs(U.T @ U - np.eye(2)).max() < 1e-10

    def test_d_less_than_K_rejected(self):
        with pytest.raises(DimensionError, match="2.*3|3.*2"):
            make_rotation(2, 3, 0)

    def test_deterministic(self):
        a = make_rotation(6, 4, 123).columns
        b = make_rotation(6, 4, 123).columns
        assert np.array_equal(a, b)

    def test_seed_changes_result(self):
        a = make_rotation(6, 4, 1).columns
        b = make_rotation(6, 4, 2).columns
        assert not np.allclose(a, b)


class TestMakeEtf:
    def test_gram_k3(self):
        M = make_etf(3, 3, 1.0, 0).matrix
        G = M.T @ M
        assert np.abs(np.diag(G) - 1.0).max() < 1e-10
        off = G[~np.eye(3, dtype=bool)]
        assert np.abs(off + 0.5).max() < 1e-10

    def test_k2_antipodal(self):
        M = make_etf(2, 2, 1.0, 0).matrix
        c0, c1 = M[:, 0], M[:, 1]
        cos = c0 @ c1 / (np.linalg.norm(c0) * np.linalg.norm(c1))
        assert abs(cos + 1.0) < 1e-10

    def test_scaled_frame(self):
        M = make_etf(5, 4, 2.0, 3).matrix
        norms = np.linalg.norm(M, axis=0)
        assert np.abs(norms - 2.0).max() < 1e-8
        G = M.T @ M
        off = G[~np.eye(4, dtype=bool)]
        assert np.abs(off - 4 * (-1 / 3)).max() < 1e-8

    @pytest.mark.parametrize("d,K,alpha", [(1, 1, 1.0), (3, 1, 1.0)])
    def test_k_below_two_rejected(self, d, K, alpha):
        with pytest.raises(ValueError):
            make_etf(d, K, alpha, 0)

    def test_d_below_k_rejected(self):
        with pytest.raises(DimensionError):
            make_etf(3, 5, 1.0, 0)

    def test_nonpositive_alpha_rejected(self):
        with pytest.raises(ValueError):
            make_etf(4, 3, 0.0, 0)


class TestVerifyEtf:
    def test_roundtrip(self):
        frame = make_etf(4, 3, 1.0, 11)
        report = verify_etf(frame.matrix, 1e-8)
        assert report.is_etf
        assert report.max_norm_deviation <= 1e-10
        assert report.max_offdiag_deviation <= 1e-10

    def test_identity_is_not_etf(self):
        report = verify_etf(np.eye(3), 1e-8)
        assert report.max_pairwise_cosine == 0.0
        assert not report.is_etf

    def test_zero_column_rejected(self):
        W = np.eye(3)
        W[:, 1] = 0.0
        with pytest.raises(DegenerateColumnError):
            verify_etf(W)

    @pytest.mark.parametrize("d,K,alpha,seed", [
        (2, 2, 1.0, 0), (5, 3, 0.5, 1), (10, 10, 3.0, 2), (16, 10, 1.0, 3),
        (7, 4, 2.5, 99),
    ])
    def test_roundtrip_property(self, d, K, alpha, seed):
        assert verify_etf(make_etf(d, K, alpha, seed).matrix, 1e-8).is_etf

    def test_rotation_invariance(self):
        rng = np.random.default_rng(5)
        W = make_etf(6, 4, 1.5, 0).matrix
        R, _ = np.linalg.qr(rng.standard_normal((6, 6)))
        a = verify_etf(W)
        b = verify_etf(R @ W)
        assert abs(a.max_norm_deviation - b.max_norm_deviation) < 1e-10
        assert abs(a.max_offdiag_deviation - b.max_offdiag_deviation) < 1e-10
        assert abs(a.max_pairwise_cosine - b.max_pairwise_cosine) < 1e-10


class TestMaxPairwiseCosine:
    def test_etf_attains_bound(self):
        W = make_etf(8, 5, 1.0, 0).matrix
        assert abs(max_pairwise_cosine(W) + 0.25) < 1e-10

    def test_lemma_bound_random_sampling(self):
        # Brute-force oracle: no unit-column matrix beats -1/(K-1).
        rng = np.random.default_rng(0)
        K, d = 4, 6
        for _ in range(1000):
            W = rng.standard_normal((d, K))
            W /= np.linalg.norm(W, axis=0)
            assert max_pairwise_cosine(W) >= -1 / 3 - 1e-12

    def test_lemma_bound_local_search(self):
        # Gradient-free local search trying to push the max cosine below
        # the bound; it must stall at -1/(K-1).
        rng = np.random.default_rng(1)
        K, d = 4, 6
        W = rng.standard_normal((d, K))
        W /= np.linalg.norm(W, axis=0)
        best = max_pairwise_cosine(W)
        for step in range(2000):
            cand = W + 0.05 * rng.standard_normal((d, K))
            cand /= np.linalg.norm(cand, axis=0)
            value = max_pairwise_cosine(cand)
            if value < best:
                best, W = value, cand
        assert best >= -1 / (K - 1) - 1e-12

    def test_rigidity_perturb_and_project(self):
        # Near-attainment of the bound forces the whole ETF structure.
        rng = np.random.default_rng(2)
        for K, d in [(3, 4), (5, 8), (8, 8)]:
            M = make_etf(d, K, 1.0, 7).matrix
            for scale in (1e-9, 1e-8):
                W = M + scale * rng.standard_normal((d, K))
                W /= np.linalg.norm(W, axis=0)
                if max_pairwise_cosine(W) <= -1 / (K - 1) + 1e-6:
                    assert verify_etf(W, 1e-4).is_etf

    def test_identical_columns(self):
        W = np.ones((3, 2))
        assert max_pairwise_cosine(W) == pytest.approx(1.0)

    def test_zero_column_rejected(self):
        with pytest.raises(DegenerateColumnError):
            max_pairwise_cosine(np.array([[1.0, 0.0], [0.0, 0.0]]))


class TestSerialization:
    def test_roundtrip_exact(self, tmp_path):
        frame = make_etf(6, 4, 1.7, 42)
        path = tmp_path / "frame.txt"
        save_frame(frame, path)
        loaded = load_frame(path)
        assert loaded.d == 6 and loaded.K == 4 and loaded.alpha == 1.7
        assert np.array_equal(loaded.matrix, frame.matrix)

    def test_byte_identical_writes(self, tmp_path):
        frame = make_etf(5, 3, 1.0, 9)
        p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
        save_frame(frame, p1)
        save_frame(frame, p2)
        assert p1.read_bytes() == p2.read_bytes()
