"""Adam training with an epoch-decaying learning-rate schedule, stratified
validation split, and early stopping on validation weighted accuracy.

Each optimization step runs: augment, mix the batch per policy, forward every
mixed sample, joint loss, one Adam step on the model parameters, then one
delta update of the class centroids. The center update rate follows the same
decay schedule as the model rate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import augment as augment_mod
from . import model as model_mod
from .augment import AugmentChain
from .data import DEFAULT_EMOTIONS, EmotionSet, SpeechSample
from .errors import NumericError, ValidationError
from .evaluate import evaluate_model
from .losses import CenterBank, LossConfig, center_loss, recognition_loss, update_centers
from .mixup import MixupPolicy, mix_batch


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    lr_model: float = 1e-4
    lr_center: float = 1e-3
    lr_decay_factor: float = 1.25
    lr_decay_until_epoch: int = 20
    max_epochs: int = 50
    early_stop_patience: int = 10
    val_fraction: float = 0.1
    seed: int = 0
    mixup: MixupPolicy = MixupPolicy()
    augment: AugmentChain = AugmentChain()
    loss: LossConfig = LossConfig()

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr_model <= 0 or self.lr_center <= 0 or self.lr_decay_factor <= 0:
            raise ValidationError("learning rates and decay factor must be > 0")
        if self.lr_decay_until_epoch < 0:
            raise ValidationError("lr_decay_until_epoch must be >= 0")
        if self.max_epochs < 1:
            raise ValidationError("max_epochs must be >= 1")
        if self.early_stop_patience < 1:
            raise ValidationError("early_stop_patience must be >= 1")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValidationError(f"val_fraction must lie in (0, 1), got {self.val_fraction!r}")
        if self.seed < 0:
            raise ValidationError("seed must be >= 0")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    lr_model: float
    train_loss: float
    train_loss_recognition: float
    train_loss_center: float
    val_wa: float
    val_ua: float


@dataclass
class TrainReport:
    records: list[EpochRecord]
    best_epoch: int
    checkpoint: str | None = None


@dataclass
class TrainResult:
    report: TrainReport
    params: dict[str, np.ndarray]
    centers: CenterBank
    val_indices: list[int] = field(default_factory=list)


def lr_at_epoch(lr0: float, epoch: int, factor: float = 1.25, until: int = 20) -> float:
    """Learning rate at an epoch: lr0 / factor^min(epoch, until).

    The first decay applies entering epoch 1; the schedule freezes after
    ``until``.
    """
    if factor <= 0:
        raise ValidationError(f"decay factor must be > 0, got {factor!r}")
    if epoch < 0:
        raise ValidationError(f"epoch must be >= 0, got {epoch!r}")
    return lr0 / factor ** min(epoch, until)


class Adam:
    """Adam with bias correction; one slot pair per named parameter."""

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(p) for name, p in params.items()}
        self.v = {name: np.zeros_like(p) for name, p in params.items()}

    def step(self, params, grads, lr):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, p in params.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def split_train_val(samples, val_fraction: float, n_classes: int, rng: np.random.Generator):
    """Seeded stratified split; every class keeps at least one training
    sample and, when it has two or more, contributes at least one to
    validation. Returns (train_indices, val_indices)."""
    by_class: dict[int, list[int]] = {}
    for i, s in enumerate(samples):
        if s.label >= n_classes:
            raise ValidationError(f"sample label {s.label} out of range for {n_classes} classes")
        by_class.setdefault(s.label, []).append(i)
    train_idx: list[int] = []
    val_idx: list[int] = []
    for c in sorted(by_class):
        idx = np.array(by_class[c])
        idx = idx[rng.permutation(len(idx))]
        n_c = len(idx)
        n_val = 0 if n_c < 2 else min(max(int(round(val_fraction * n_c)), 1), n_c - 1)
        val_idx.extend(int(i) for i in idx[:n_val])
        train_idx.extend(int(i) for i in idx[n_val:])
    if not val_idx:
        raise ValidationError("cannot build a validation split: every class has a single sample")
    present = {samples[i].label for i in train_idx}
    missing = sorted(set(range(n_classes)) - present)
    if missing:
        raise ValidationError(f"classes {missing} have no samples in the training portion")
    return train_idx, val_idx


def _batches(order: np.ndarray, batch_size: int, mixing: bool) -> list[list[int]]:
    chunks = [list(order[i : i + batch_size]) for i in range(0, len(order), batch_size)]
    # A trailing singleton cannot be mixed pairwise; fold it into the previous batch.
    if mixing and len(chunks) > 1 and len(chunks[-1]) == 1:
        chunks[-2].extend(chunks.pop())
    return chunks


def train(
    params: dict[str, np.ndarray],
    samples: list[SpeechSample],
    model_config: model_mod.ModelConfig,
    config: TrainConfig,
    emotions: EmotionSet = DEFAULT_EMOTIONS,
) -> TrainResult:
    """Train a model on the given samples; returns the best-epoch parameters.

    The input parameter dict is not mutated. Deterministic for a fixed
    (config, data) pair. Raises NumericError with epoch/step context when the
    loss diverges.
    """
    if not samples:
        raise ValidationError("training data is empty")
    n_classes = len(emotions)
    if model_config.n_classes != n_classes:
        raise ValidationError(
            f"model has {model_config.n_classes} classes but the emotion set has {n_classes}"
        )
    params = {name: p.copy() for name, p in params.items()}

    split_rng = np.random.default_rng([config.seed, 0])
    train_idx, val_idx = split_train_val(samples, config.val_fraction, n_classes, split_rng)
    train_samples = [samples[i] for i in train_idx]
    val_samples = [samples[i] for i in val_idx]

    bank = CenterBank.zeros(n_classes, model_config.d_proj, config.lr_center)
    optimizer = Adam(params)
    mixing = config.mixup.mode != "off"
    lambda_center = config.loss.lambda_center

    records: list[EpochRecord] = []
    best: tuple[float, float] | None = None
    best_epoch = -1
    best_params: dict[str, np.ndarray] = params
    best_bank = bank

    for epoch in range(config.max_epochs):
        lr_m = lr_at_epoch(config.lr_model, epoch, config.lr_decay_factor, config.lr_decay_until_epoch)
        lr_c = lr_at_epoch(config.lr_center, epoch, config.lr_decay_factor, config.lr_decay_until_epoch)
        shuffle_rng = np.random.default_rng([config.seed, 1, epoch])
        augment_rng = np.random.default_rng([config.seed, 2, epoch])
        mix_rng = np.random.default_rng([config.seed, 3, epoch])
        dropout_rng = np.random.default_rng([config.seed, 4, epoch])

        order = shuffle_rng.permutation(len(train_samples))
        sum_loss = sum_r = sum_c = 0.0
        n_seen = 0
        for step_idx, batch_ids in enumerate(_batches(order, config.batch_size, mixing)):
            batch = [train_samples[i] for i in batch_ids]
            if config.augment.steps:
                batch = [augment_mod.apply(config.augment, s, augment_rng) for s in batch]
            mixed = mix_batch(batch, config.mixup, mix_rng, n_classes)
            n = len(mixed)

            caches = []
            grad_logits = []
            vecs = np.empty((n, model_config.d_proj))
            targets = np.empty((n, n_classes))
            batch_r = 0.0
            for i, ms in enumerate(mixed):
                try:
                    cache = model_mod._forward(model_config, params, ms.signal, True, dropout_rng)
                except NumericError as exc:
                    raise NumericError(f"epoch {epoch}, step {step_idx}: {exc}") from exc
                loss_i, g_logits = recognition_loss(ms.label.probs, cache["probs"], config.loss.epsilon)
                batch_r += loss_i
                caches.append(cache)
                grad_logits.append(g_logits)
                vecs[i] = cache["vec"]
                targets[i] = ms.label.probs
            mean_r = batch_r / n
            loss_c, d_feats = center_loss(vecs, targets, bank)
            batch_loss = mean_r + lambda_center * loss_c
            if not np.isfinite(batch_loss):
                raise NumericError(f"non-finite loss at epoch {epoch}, step {step_idx}")

            grads: dict[str, np.ndarray] | None = None
            for i in range(n):
                g = model_mod.backward(
                    model_config, params, caches[i],
                    d_logits=grad_logits[i] / n,
                    d_vec=lambda_center * d_feats[i],
                )
                if grads is None:
                    grads = g
                else:
                    for name in grads:
                        grads[name] += g[name]
            optimizer.step(params, grads, lr_m)
            bank = update_centers(vecs, targets, bank, lr=lr_c)

            sum_loss += batch_loss * n
            sum_r += mean_r * n
            sum_c += loss_c * n
            n_seen += n

        _, val_wa, val_ua = evaluate_model(model_config, params, val_samples, n_classes)
        records.append(
            EpochRecord(
                epoch=epoch,
                lr_model=lr_m,
                train_loss=sum_loss / n_seen,
                train_loss_recognition=sum_r / n_seen,
                train_loss_center=sum_c / n_seen,
                val_wa=val_wa,
                val_ua=val_ua,
            )
        )
        if best is None or (val_wa, val_ua) > best:
            best = (val_wa, val_ua)
            best_epoch = epoch
            best_params = {name: p.copy() for name, p in params.items()}
            best_bank = bank
        elif epoch - best_epoch >= config.early_stop_patience:
            break

    report = TrainReport(records=records, best_epoch=best_epoch)
    return TrainResult(report=report, params=best_params, centers=best_bank, val_indices=list(val_idx))
