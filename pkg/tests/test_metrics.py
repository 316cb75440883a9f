"""Accuracy, macro-F1 and confusion matrix against independent oracles."""

import numpy as np
import pytest

from sleepssl.errors import ShapeError
from sleepssl.metrics import (
    NUM_STAGES,
    STAGE_NAMES,
    compute_metrics,
    confusion_matrix,
)


def confusion_oracle(truth, preds):
    cm = np.zeros((NUM_STAGES, NUM_STAGES), dtype=np.int64)
    for t, p in zip(truth, preds):
        cm[t][p] += 1
    return cm


def f1_oracle(truth, preds, cls):
    tp = sum(1 for t, p in zip(truth, preds) if t == cls and p == cls)
    fp = sum(1 for t, p in zip(truth, preds) if t != cls and p == cls)
    fn = sum(1 for t, p in zip(truth, preds) if t == cls and p != cls)
    if 2 * tp + fp + fn == 0:
        return 0.0
    return 2 * tp / (2 * tp + fp + fn)


class TestConfusion:
    def test_random_sets_match_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            n = int(rng.integers(1, 60))
            truth = rng.integers(0, NUM_STAGES, size=n)
            preds = rng.integers(0, NUM_STAGES, size=n)
            np.testing.assert_array_equal(
                confusion_matrix(truth, preds), confusion_oracle(truth, preds)
            )

    def test_rows_are_truth(self):
        cm = confusion_matrix(np.array([1, 1, 1]), np.array([2, 2, 1]))
        assert cm[1, 2] == 2
        assert cm[1, 1] == 1
        assert cm.sum() == 3


class TestComputeMetrics:
    def test_hand_case(self):
        # 6 epochs: classes 0 and 1 only.
        truth = np.array([0, 0, 0, 1, 1, 4])
        preds = np.array([0, 0, 1, 1, 0, 4])
        report = compute_metrics(preds, truth)
        assert report.accuracy == pytest.approx(4 / 6)
        # class 0: tp=2 fp=1 fn=1 -> f1 = 4/6; class 1: tp=1 fp=1 fn=1 -> 0.5
        assert report.per_class_f1[0] == pytest.approx(2 / 3)
        assert report.per_class_f1[1] == pytest.approx(0.5)
        assert report.per_class_f1[4] == pytest.approx(1.0)
        # absent classes contribute zero to the macro average
        assert 2 in report.absent_classes and 3 in report.absent_classes
        assert report.macro_f1 == pytest.approx((2 / 3 + 0.5 + 0 + 0 + 1) / 5)

    def test_perfect_prediction(self):
        truth = np.array([0, 1, 2, 3, 4] * 3)
        report = compute_metrics(truth.copy(), truth)
        assert report.accuracy == 1.0
        assert report.macro_f1 == 1.0
        assert report.absent_classes == []

    def test_against_oracle_randomised(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            n = int(rng.integers(1, 80))
            truth = rng.integers(0, NUM_STAGES, size=n)
            preds = rng.integers(0, NUM_STAGES, size=n)
            report = compute_metrics(preds, truth)
            assert report.accuracy == pytest.approx(np.mean(preds == truth))
            f1s = [f1_oracle(truth, preds, c) for c in range(NUM_STAGES)]
            # absent-class policy: truth-absent and never-predicted -> 0
            np.testing.assert_allclose(report.per_class_f1, f1s, atol=1e-12)
            assert report.macro_f1 == pytest.approx(np.mean(f1s))

    def test_to_dict_round_trip(self):
        report = compute_metrics(np.array([0, 1]), np.array([0, 2]))
        d = report.to_dict()
        assert set(d) >= {"accuracy", "macro_f1", "per_class_f1", "confusion"}
        assert len(d["per_class_f1"]) == NUM_STAGES

    def test_shape_validation(self):
        with pytest.raises(ShapeError):
            compute_metrics(np.array([0, 1]), np.array([0]))
        with pytest.raises(ShapeError):
            compute_metrics(np.array([0, 9]), np.array([0, 1]))

    def test_stage_names(self):
        assert list(STAGE_NAMES) == ["Wake", "N1", "N2", "N3", "REM"]
