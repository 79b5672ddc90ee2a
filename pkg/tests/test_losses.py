import math

import numpy as np
import pytest

from sermix import (
    CenterBank,
    LossConfig,
    ValidationError,
    center_loss,
    joint_loss,
    one_hot,
    recognition_loss,
    update_centers,
)


def softmax(logits):
    e = np.exp(logits - logits.max())
    return e / e.sum()


class TestRecognitionLoss:
    def test_perfect_one_hot(self):
        loss, grad = recognition_loss(one_hot(0), np.array([1.0, 0, 0, 0]))
        assert loss == 0.0
        np.testing.assert_allclose(grad, 0.0, atol=1e-15)

    def test_uniform_prediction_hand_value(self):
        loss, _ = recognition_loss(np.array([1.0, 0, 0, 0]), np.full(4, 0.25))
        assert abs(loss - math.log(4)) < 1e-9

    def test_soft_target_self_match(self):
        target = np.array([0.75, 0.25, 0.0, 0.0])
        loss, grad = recognition_loss(target, target.copy())
        assert abs(loss) < 1e-15
        np.testing.assert_allclose(grad, 0.0, atol=1e-15)

    def test_gradient_is_prediction_minus_target(self, rng):
        for _ in range(20):
            target = rng.dirichlet(np.ones(4))
            predicted = softmax(rng.uniform(-2, 2, 4))
            _, grad = recognition_loss(target, predicted)
            np.testing.assert_allclose(grad, predicted - target, atol=1e-15)

    def test_gradient_sums_to_zero(self, rng):
        for _ in range(100):
            target = rng.dirichlet(np.ones(5))
            predicted = softmax(rng.uniform(-3, 3, 5))
            _, grad = recognition_loss(target, predicted)
            assert abs(grad.sum()) < 1e-12

    def test_nonnegative_randomized(self, rng):
        for _ in range(200):
            target = rng.dirichlet(np.ones(4))
            predicted = softmax(rng.uniform(-4, 4, 4))
            loss, _ = recognition_loss(target, predicted)
            assert loss >= 0.0

    def test_zero_iff_equal(self, rng):
        target = rng.dirichlet(np.ones(4))
        other = rng.dirichlet(np.ones(4))
        loss_same, _ = recognition_loss(target, target.copy())
        loss_other, _ = recognition_loss(target, other)
        assert loss_same < 1e-12 < loss_other

    def test_validates_target(self):
        with pytest.raises(ValidationError):
            recognition_loss(np.array([-0.1, 1.1, 0.0, 0.0]), np.full(4, 0.25))
        with pytest.raises(ValidationError):
            recognition_loss(np.array([0.5, 0.6, 0.0, 0.0]), np.full(4, 0.25))

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            recognition_loss(np.array([1.0, 0.0]), np.full(4, 0.25))

    def test_floor_keeps_loss_finite(self):
        loss, _ = recognition_loss(np.array([1.0, 0, 0, 0]), np.array([0.0, 1.0, 0.0, 0.0]))
        assert np.isfinite(loss) and loss > 0


class TestCenterLoss:
    def test_zero_distance(self):
        bank = CenterBank(np.array([[1.0, 2.0], [0.0, 0.0]]))
        loss, grad = center_loss(np.array([1.0, 2.0]), np.array([1.0, 0.0]), bank)
        assert loss == 0.0
        np.testing.assert_array_equal(grad, [[0.0, 0.0]])

    def test_hand_value(self):
        bank = CenterBank(np.array([[0.0, 1.0], [5.0, 5.0]]))
        loss, grad = center_loss(np.array([1.0, 2.0]), np.array([1.0, 0.0]), bank)
        assert loss == 2.0
        np.testing.assert_array_equal(grad, [[2.0, 2.0]])

    def test_argmax_gating_invariance_is_exact(self):
        bank = CenterBank(np.array([[0.5, -1.0], [2.0, 0.3], [0.0, 0.0], [1.0, 1.0]]))
        feats = np.array([[0.7, 0.2]])
        a, _ = center_loss(feats, np.array([[0.75, 0.25, 0.0, 0.0]]), bank)
        b, _ = center_loss(feats, np.array([[0.6, 0.4, 0.0, 0.0]]), bank)
        assert a == b

    def test_argmax_tie_breaks_to_lowest_index(self):
        bank = CenterBank(np.array([[0.0, 0.0], [10.0, 10.0]]))
        loss, _ = center_loss(np.array([1.0, 0.0]), np.array([0.5, 0.5]), bank)
        assert loss == 1.0  # distance to class 0, not class 1

    def test_batch_mean(self, rng):
        bank = CenterBank(rng.standard_normal((4, 3)))
        feats = rng.standard_normal((5, 3))
        targets = rng.dirichlet(np.ones(4), size=5)
        loss, grad = center_loss(feats, targets, bank)
        classes = targets.argmax(1)
        expected = np.mean([np.sum((feats[i] - bank.centers[classes[i]]) ** 2) for i in range(5)])
        assert abs(loss - expected) < 1e-12
        np.testing.assert_allclose(grad, 2.0 / 5 * (feats - bank.centers[classes]), atol=1e-15)

    def test_does_not_modify_bank(self, rng):
        centers = rng.standard_normal((4, 3))
        bank = CenterBank(centers.copy())
        center_loss(rng.standard_normal((2, 3)), rng.dirichlet(np.ones(4), 2), bank)
        np.testing.assert_array_equal(bank.centers, centers)

    def test_dimension_mismatch(self, rng):
        bank = CenterBank(np.zeros((4, 3)))
        with pytest.raises(ValidationError):
            center_loss(rng.standard_normal((2, 5)), rng.dirichlet(np.ones(4), 2), bank)
        with pytest.raises(ValidationError):
            center_loss(rng.standard_normal((2, 3)), rng.dirichlet(np.ones(5), 2), bank)


class TestUpdateCenters:
    def test_absent_class_unchanged(self, rng):
        centers = rng.standard_normal((4, 2))
        bank = CenterBank(centers.copy())
        updated = update_centers(np.array([[1.0, 1.0]]), np.array([[1.0, 0, 0, 0]]), bank)
        np.testing.assert_array_equal(updated.centers[1:], centers[1:])
        assert not np.array_equal(updated.centers[0], centers[0])

    def test_fixed_point(self):
        bank = CenterBank(np.array([[2.0, -1.0], [0.0, 0.0]]))
        updated = update_centers(np.array([[2.0, -1.0]]), np.array([[1.0, 0.0]]), bank)
        np.testing.assert_array_equal(updated.centers, bank.centers)

    def test_hand_value(self):
        bank = CenterBank(np.array([[0.0, 0.0], [7.0, 7.0]]), center_lr=0.5)
        updated = update_centers(np.array([[2.0, 0.0]]), np.array([[1.0, 0.0]]), bank)
        np.testing.assert_allclose(updated.centers[0], [0.5, 0.0], atol=1e-15)

    def test_zero_lr_is_identity(self, rng):
        bank = CenterBank(rng.standard_normal((4, 3)))
        updated = update_centers(rng.standard_normal((6, 3)), rng.dirichlet(np.ones(4), 6), bank, lr=0.0)
        np.testing.assert_array_equal(updated.centers, bank.centers)

    def test_count_normalization(self):
        bank = CenterBank(np.array([[0.0], [9.0]]), center_lr=1.0)
        feats = np.array([[3.0], [6.0], [3.0]])
        targets = np.tile([1.0, 0.0], (3, 1))
        updated = update_centers(feats, targets, bank)
        # delta = ((0-3) + (0-6) + (0-3)) / (1+3) = -3
        np.testing.assert_allclose(updated.centers[0], [3.0], atol=1e-15)

    def test_input_bank_not_mutated(self, rng):
        centers = rng.standard_normal((4, 2))
        bank = CenterBank(centers.copy())
        update_centers(rng.standard_normal((3, 2)), rng.dirichlet(np.ones(4), 3), bank)
        np.testing.assert_array_equal(bank.centers, centers)


class TestJointLoss:
    def test_zero_weight_is_recognition_only(self, rng):
        target = rng.dirichlet(np.ones(4))
        predicted = softmax(rng.uniform(-2, 2, 4))
        bank = CenterBank(rng.standard_normal((4, 3)))
        feats = rng.standard_normal(3)
        loss, (loss_r, _) = joint_loss(target, predicted, feats, bank, LossConfig(lambda_center=0.0))
        assert loss == loss_r

    def test_hand_arithmetic(self):
        # recognition ln4 with centre loss 2 at weight 0.002
        target = np.array([1.0, 0, 0, 0])
        predicted = np.full(4, 0.25)
        bank = CenterBank(np.array([[0.0, 1.0], [0, 0], [0, 0], [0, 0]]))
        feats = np.array([1.0, 2.0])
        loss, (loss_r, loss_c) = joint_loss(target, predicted, feats, bank, LossConfig(lambda_center=0.002))
        assert abs(loss_r - math.log(4)) < 1e-9
        assert loss_c == 2.0
        assert abs(loss - (loss_r + 0.002 * 2.0)) < 1e-15

    def test_weighted_sum_shape(self):
        loss, (loss_r, loss_c) = joint_loss(
            np.array([1.0, 0, 0, 0]), np.array([1.0, 0, 0, 0]),
            np.zeros(2), CenterBank(np.zeros((4, 2))), LossConfig(lambda_center=0.002),
        )
        assert loss == 0.0 and loss_r == 0.0 and loss_c == 0.0

    def test_batch_recognition_mean(self, rng):
        targets = rng.dirichlet(np.ones(4), size=3)
        preds = np.stack([softmax(rng.uniform(-2, 2, 4)) for _ in range(3)])
        feats = rng.standard_normal((3, 2))
        bank = CenterBank(rng.standard_normal((4, 2)))
        loss, (loss_r, loss_c) = joint_loss(targets, preds, feats, bank, LossConfig())
        expected_r = np.mean([recognition_loss(t, p)[0] for t, p in zip(targets, preds)])
        assert abs(loss_r - expected_r) < 1e-12
        assert abs(loss - (loss_r + 0.002 * loss_c)) < 1e-12


class TestConfigValidation:
    def test_loss_config(self):
        with pytest.raises(ValidationError):
            LossConfig(lambda_center=-0.1)
        with pytest.raises(ValidationError):
            LossConfig(epsilon=0.0)

    def test_center_bank(self):
        with pytest.raises(ValidationError):
            CenterBank(np.zeros(3))
        with pytest.raises(ValidationError):
            CenterBank(np.zeros((2, 2)), center_lr=0.0)
