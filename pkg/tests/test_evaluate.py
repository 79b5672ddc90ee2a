import numpy as np
import pytest

from sermix import (
    ConfusionMatrix,
    ModelConfig,
    SynthSpec,
    TrainConfig,
    ValidationError,
    generate_synthetic,
    make_loso_folds,
    run_loso,
    unweighted_accuracy,
    weighted_accuracy,
)
from tests.conftest import make_sample


class TestMetrics:
    def test_perfect_diagonal(self):
        cm = ConfusionMatrix(np.diag([3, 5, 2]))
        assert weighted_accuracy(cm) == 1.0
        assert unweighted_accuracy(cm) == 1.0

    def test_hand_counts(self):
        cm = ConfusionMatrix(np.array([[6, 2], [0, 2]]))
        assert weighted_accuracy(cm) == 0.8
        assert unweighted_accuracy(cm) == 0.875

    def test_all_wrong(self):
        cm = ConfusionMatrix(np.array([[0, 4], [3, 0]]))
        assert weighted_accuracy(cm) == 0.0
        assert unweighted_accuracy(cm) == 0.0

    def test_balanced_classes_wa_equals_ua(self, rng):
        for _ in range(30):
            counts = rng.integers(0, 10, size=(3, 3))
            counts += np.diag(rng.integers(1, 10, size=3))
            row = counts.sum(axis=1).max()
            # pad the diagonal so every row has the same total
            for c in range(3):
                counts[c, c] += row - counts[c].sum()
            cm = ConfusionMatrix(counts)
            assert abs(weighted_accuracy(cm) - unweighted_accuracy(cm)) < 1e-12

    def test_absent_class_excluded_with_warning(self):
        cm = ConfusionMatrix(np.array([[4, 0, 0], [1, 3, 0], [0, 0, 0]]))
        with pytest.warns(UserWarning, match="absent"):
            ua = unweighted_accuracy(cm)
        assert abs(ua - (1.0 + 0.75) / 2) < 1e-12

    def test_empty_matrix_rejected(self):
        cm = ConfusionMatrix(np.zeros((3, 3), dtype=np.int64))
        with pytest.raises(ValidationError):
            weighted_accuracy(cm)
        with pytest.raises(ValidationError):
            unweighted_accuracy(cm)

    def test_from_predictions(self):
        cm = ConfusionMatrix.from_predictions([0, 1, 1, 2], [0, 1, 0, 2], 3)
        np.testing.assert_array_equal(cm.counts, [[1, 0, 0], [1, 1, 0], [0, 0, 1]])

    def test_bounds_randomized(self, rng):
        for _ in range(50):
            y_true = rng.integers(0, 4, size=30)
            y_pred = rng.integers(0, 4, size=30)
            cm = ConfusionMatrix.from_predictions(y_true, y_pred, 4)
            assert 0.0 <= weighted_accuracy(cm) <= 1.0

    def test_non_square_rejected(self):
        with pytest.raises(ValidationError):
            ConfusionMatrix(np.zeros((2, 3), dtype=np.int64))


class TestLosoFolds:
    def test_five_sessions_five_folds(self):
        samples = generate_synthetic(SynthSpec(n_per_class=10, seed=0))
        folds = make_loso_folds(samples)
        assert len(folds) == 5
        tested = {f.test_session for f in folds}
        assert tested == {s.session_id for s in samples}
        for f in folds:
            assert f.test_session not in f.train_sessions
            assert len(f.train_sessions) == 4

    def test_two_sessions_two_folds(self):
        samples = generate_synthetic(SynthSpec(n_per_class=4, n_speakers=4, n_sessions=2, seed=0))
        assert len(make_loso_folds(samples)) == 2

    def test_straddling_speaker_named(self, rng):
        samples = [
            make_sample(rng, label=0, speaker="spkA", session="sess0"),
            make_sample(rng, label=1, speaker="spkA", session="sess1"),
        ]
        with pytest.raises(ValidationError, match="spkA"):
            make_loso_folds(samples)

    def test_single_session_rejected(self, rng):
        samples = [make_sample(rng, label=0, session="sess0") for _ in range(4)]
        with pytest.raises(ValidationError, match="2 distinct sessions"):
            make_loso_folds(samples)


class TestRunLoso:
    def test_structure_and_mean(self):
        samples = generate_synthetic(
            SynthSpec(n_per_class=8, d_in=4, length_range=(3, 6), n_speakers=4, n_sessions=2,
                      class_separation=2.0, noise_scale=0.3, seed=1)
        )
        model_config = ModelConfig(d_in=4, d_model=8, n_layers=1, n_heads=2, d_ff=8, d_proj=4,
                                   projection_dropout=0.0, max_len=8)
        train_config = TrainConfig(max_epochs=2, seed=0, batch_size=8)
        result = run_loso(samples, model_config, train_config)
        assert len(result.folds) == 2
        assert {f.test_session for f in result.folds} == {"sess0", "sess1"}
        assert sum(f.n_test for f in result.folds) == len(samples)
        assert abs(result.mean_wa - np.mean([f.wa for f in result.folds])) < 1e-12
        assert abs(result.mean_ua - np.mean([f.ua for f in result.folds])) < 1e-12
        for f in result.folds:
            assert 0.0 <= f.wa <= 1.0 and 0.0 <= f.ua <= 1.0
