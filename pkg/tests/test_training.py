import numpy as np
import pytest
from dataclasses import replace

from ceco.data import SceneConfig
from ceco.training import (
    ABLATION_VARIANTS,
    DEFAULT_LAMBDA_GRID,
    TrainConfig,
    lambda_sweep,
    run_ablation_grid,
    train,
)

REQUIRED_FIELDS = (
    "iteration", "pr_loss", "cr_loss", "total", "equiang_std_centers",
    "maxangle_avg_centers", "self_duality_gap", "accuracy",
    "head_accuracy", "common_accuracy", "tail_accuracy", "per_class_accuracy",
)


def tiny_config(**overrides):
    scene = SceneConfig(height=12, width=12, K=4, beta=5.0, input_dim=4,
                        blob_count=8, noise_sigma=1.0, smooth_radius=1)
    base = dict(scene=scene, hidden_dim=8, feature_dim=6, lr=0.3,
                iterations=30, eval_every=10, seed=0,
                n_train_scenes=2, n_eval_scenes=1)
    base.update(overrides)
    return TrainConfig(**base)


class TestTrainConfig:
    def test_off_requires_lambda_zero(self):
        with pytest.raises(ValueError):
            tiny_config(center_classifier_mode="off", lam=0.4)

    def test_fixed_etf_needs_wide_features(self):
        with pytest.raises(ValueError):
            tiny_config(feature_dim=3)

    def test_default_lambda(self):
        assert TrainConfig().lam == 0.4


class TestTrain:
    def test_zero_iterations_single_record(self):
        log = train(tiny_config(iterations=0))
        assert len(log.records) == 1
        assert log.records[0]["iteration"] == 0
        assert not log.diverged

    def test_deterministic(self):
        cfg = tiny_config()
        a, b = train(cfg), train(cfg)
        assert a.records == b.records
        assert (a.head, a.common, a.tail) == (b.head, b.common, b.tail)

    def test_records_monotone_and_complete(self):
        log = train(tiny_config(iterations=25, eval_every=10))
        iters = [r["iteration"] for r in log.records]
        assert iters == [0, 10, 20, 25]
        for record in log.records:
            for field in REQUIRED_FIELDS:
                assert field in record
                value = record[field]
                if field == "per_class_accuracy":
                    assert len(value) == 4 and np.isfinite(value).all()
                else:
                    assert np.isfinite(value)

    def test_groups_partition_classes(self):
        log = train(tiny_config(iterations=0))
        assert sorted(log.head + log.common + log.tail) == [1, 2, 3, 4]

    def test_frame_geometry_constant_during_training(self):
        log = train(tiny_config())
        for record in log.records:
            assert record["frame_pairdist_sq_dev"] <= 1e-10

    def test_no_frame_metric_when_center_branch_off(self):
        log = train(tiny_config(lam=0.0, center_classifier_mode="off"))
        assert "frame_pairdist_sq_dev" not in log.records[0]
        assert all(r["cr_loss"] == 0.0 for r in log.records)

    def test_divergence_aborts_with_partial_log(self):
        log = train(tiny_config(lr=1e18, iterations=50, eval_every=5))
        assert log.diverged
        assert len(log.records) >= 1
        iters = [r["iteration"] for r in log.records]
        assert iters == sorted(set(iters))

    def test_learned_center_classifier_mode_runs(self):
        log = train(tiny_config(center_classifier_mode="learned"))
        assert not log.diverged
        assert log.final["cr_loss"] > 0

    def test_fixed_pr_mode_runs(self):
        log = train(tiny_config(pr_classifier_mode="fixed_etf"))
        assert not log.diverged

    def test_poly_schedule_runs(self):
        log = train(tiny_config(lr_schedule="poly"))
        assert not log.diverged


class TestAblationGrid:
    def test_five_rows_matching_variants(self):
        rows = run_ablation_grid(tiny_config())
        assert len(rows) == 5
        assert [(r["pr_mode"], r["cc_mode"]) for r in rows] == list(ABLATION_VARIANTS)
        assert rows[0]["lam"] == 0.0  # the baseline arm has no center branch

    def test_deterministic(self):
        cfg = tiny_config()
        assert run_ablation_grid(cfg) == run_ablation_grid(cfg)


class TestLambdaSweep:
    def test_default_grid_has_seven_points(self):
        assert DEFAULT_LAMBDA_GRID == (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6)
        rows = lambda_sweep(tiny_config(), lambdas=DEFAULT_LAMBDA_GRID)
        assert [r["lam"] for r in rows] == list(DEFAULT_LAMBDA_GRID)

    def test_lambda_zero_row_equals_baseline(self):
        cfg = tiny_config()
        rows = lambda_sweep(cfg, lambdas=[0.0, 0.4])
        baseline = train(replace(cfg, lam=0.0, center_classifier_mode="off"))
        zero_row = rows[0]
        final = baseline.final
        for key in ("accuracy", "head_accuracy", "common_accuracy",
                    "tail_accuracy", "equiang_std_centers",
                    "maxangle_avg_centers", "self_duality_gap"):
            assert zero_row[key] == final[key]

    def test_negative_lambda_rejected(self):
        with pytest.raises(ValueError):
            lambda_sweep(tiny_config(), lambdas=[-0.1])

    def test_one_row_per_lambda(self):
        rows = lambda_sweep(tiny_config(), lambdas=[0.0, 0.2, 0.5])
        assert len(rows) == 3
