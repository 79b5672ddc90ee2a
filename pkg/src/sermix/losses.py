"""Learning objectives: soft-label KL recognition loss, argmax-gated center
loss with per-minibatch centroid updates, and their weighted sum.

All gradients here are analytic and verified against finite differences by
the gradcheck harness. The center loss reads only the argmax of each soft
target, which is what makes it compatible with mixed labels: any
probability perturbation that preserves the argmax leaves it bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import probs_of
from .errors import ValidationError


@dataclass(frozen=True, eq=False)
class CenterBank:
    """Per-class feature centroids plus their own update rate."""

    centers: np.ndarray
    center_lr: float = 1e-3

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=np.float64)
        if c.ndim != 2:
            raise ValidationError(f"centers must be a (n_classes, d_proj) matrix, got shape {c.shape}")
        if not np.isfinite(c).all():
            raise ValidationError("centers contain non-finite values")
        if not self.center_lr > 0:
            raise ValidationError(f"center_lr must be > 0, got {self.center_lr!r}")
        c = np.ascontiguousarray(c)
        c.flags.writeable = False
        object.__setattr__(self, "centers", c)

    @classmethod
    def zeros(cls, n_classes: int, d_proj: int, center_lr: float = 1e-3) -> "CenterBank":
        """All-zero centroids: the symmetric starting point."""
        return cls(np.zeros((n_classes, d_proj)), center_lr)


@dataclass(frozen=True)
class LossConfig:
    """Trade-off weight on the center loss and the log floor."""

    lambda_center: float = 0.002
    epsilon: float = 1e-12

    def __post_init__(self):
        if self.lambda_center < 0:
            raise ValidationError(f"lambda_center must be >= 0, got {self.lambda_center!r}")
        if not self.epsilon > 0:
            raise ValidationError(f"epsilon must be > 0, got {self.epsilon!r}")


def _validate_target(z: np.ndarray) -> None:
    if (z < 0).any():
        raise ValidationError(f"target probabilities must be non-negative, got {z}")
    total = float(z.sum())
    if abs(total - 1.0) > 1e-9:
        raise ValidationError(f"target probabilities must sum to 1, got {total!r}")


def recognition_loss(target, predicted, epsilon: float = 1e-12):
    """KL divergence sum_k z_k * log(z_k / zhat_k) and its gradient at the
    logits the prediction was softmaxed from.

    Zero target entries contribute exactly 0; predicted entries are floored
    at ``epsilon`` inside the log. The gradient is ``predicted - target``
    (the softmax-KL composition), which sums to 0.
    """
    z = probs_of(target)
    zhat = probs_of(predicted)
    if z.shape != zhat.shape:
        raise ValidationError(f"target and prediction shapes differ: {z.shape} vs {zhat.shape}")
    _validate_target(z)
    support = z > 0.0
    loss = float(np.sum(z[support] * (np.log(z[support]) - np.log(np.maximum(zhat[support], epsilon)))))
    return loss, zhat - z


def _target_matrix(targets) -> np.ndarray:
    if isinstance(targets, np.ndarray) and targets.ndim == 2:
        return targets
    rows = [probs_of(t) for t in (targets if isinstance(targets, (list, tuple)) else [targets])]
    return np.atleast_2d(np.stack(rows))


def _feature_matrix(features) -> np.ndarray:
    feats = np.asarray(features, dtype=np.float64)
    return np.atleast_2d(feats)


def center_loss(features, targets, bank: CenterBank):
    """Mean squared distance of each feature to the centroid of its target's
    argmax class (ties to the lowest index); returns the loss and its
    gradient with respect to the features. The bank is not modified."""
    feats = _feature_matrix(features)
    tmat = _target_matrix(targets)
    if feats.shape[0] == 0:
        raise ValidationError("center_loss needs a non-empty batch")
    if feats.shape[0] != tmat.shape[0]:
        raise ValidationError(f"batch sizes differ: {feats.shape[0]} features vs {tmat.shape[0]} targets")
    if feats.shape[1] != bank.centers.shape[1]:
        raise ValidationError(
            f"feature dim {feats.shape[1]} != center dim {bank.centers.shape[1]}"
        )
    if tmat.shape[1] != bank.centers.shape[0]:
        raise ValidationError(
            f"target has {tmat.shape[1]} classes but bank holds {bank.centers.shape[0]} centroids"
        )
    classes = np.argmax(tmat, axis=1)
    diffs = feats - bank.centers[classes]
    n = feats.shape[0]
    loss = float(np.sum(diffs * diffs) / n)
    return loss, (2.0 / n) * diffs


def update_centers(features, targets, bank: CenterBank, lr: float | None = None) -> CenterBank:
    """Count-normalized delta update of the centroids from one mini-batch.

    For each class c present in the batch, delta_c = sum_i (mu_c - f_i) /
    (1 + n_c) over its members, and mu_c moves by -lr * delta_c. Absent
    classes are untouched. Returns a new bank; the input is not mutated.
    """
    feats = _feature_matrix(features)
    tmat = _target_matrix(targets)
    if feats.shape[0] != tmat.shape[0]:
        raise ValidationError(f"batch sizes differ: {feats.shape[0]} features vs {tmat.shape[0]} targets")
    if feats.shape[1] != bank.centers.shape[1]:
        raise ValidationError(f"feature dim {feats.shape[1]} != center dim {bank.centers.shape[1]}")
    if lr is None:
        lr = bank.center_lr
    classes = np.argmax(tmat, axis=1)
    new_centers = bank.centers.copy()
    for c in range(bank.centers.shape[0]):
        members = classes == c
        n_c = int(members.sum())
        if n_c == 0:
            continue
        delta = (bank.centers[c] - feats[members]).sum(axis=0) / (1.0 + n_c)
        new_centers[c] = bank.centers[c] - lr * delta
    return CenterBank(new_centers, bank.center_lr)


def joint_loss(target, predicted, features, bank: CenterBank, config: LossConfig):
    """Recognition loss (batch mean) plus lambda_center times the center
    loss; returns ``(loss, (recognition, center))``."""
    tmat = _target_matrix(target)
    pmat = _target_matrix(predicted) if not (isinstance(predicted, np.ndarray) and predicted.ndim == 2) else predicted
    if tmat.shape != pmat.shape:
        raise ValidationError(f"target and prediction shapes differ: {tmat.shape} vs {pmat.shape}")
    total_r = 0.0
    for row_z, row_p in zip(tmat, pmat):
        loss_r, _ = recognition_loss(row_z, row_p, config.epsilon)
        total_r += loss_r
    mean_r = total_r / tmat.shape[0]
    loss_c, _ = center_loss(features, tmat, bank)
    return mean_r + config.lambda_center * loss_c, (mean_r, loss_c)
