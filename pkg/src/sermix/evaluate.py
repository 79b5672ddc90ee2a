"""Accuracy metrics, confusion matrices, and the leave-one-session-out
cross-validation harness.

Weighted accuracy is the overall fraction of correct predictions (micro
accuracy); unweighted accuracy is the mean of per-class recalls (macro
recall). Folds hold out one full session, so its speakers never appear on
the training side.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import model as model_mod
from .data import DEFAULT_EMOTIONS, EmotionSet, SpeechSample
from .errors import ValidationError


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Counts indexed [true class, predicted class]."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValidationError(f"confusion matrix must be square, got shape {c.shape}")
        if (c < 0).any() or not np.issubdtype(c.dtype, np.integer):
            raise ValidationError("confusion matrix entries must be non-negative integers")
        c = np.ascontiguousarray(c, dtype=np.int64)
        c.flags.writeable = False
        object.__setattr__(self, "counts", c)

    @classmethod
    def from_predictions(cls, y_true, y_pred, n_classes: int) -> "ConfusionMatrix":
        y_true = np.asarray(y_true, dtype=np.int64)
        y_pred = np.asarray(y_pred, dtype=np.int64)
        if y_true.shape != y_pred.shape:
            raise ValidationError(f"shape mismatch: {y_true.shape} vs {y_pred.shape}")
        counts = np.zeros((n_classes, n_classes), dtype=np.int64)
        for t, p in zip(y_true, y_pred):
            counts[t, p] += 1
        return cls(counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def weighted_accuracy(cm: ConfusionMatrix) -> float:
    """Overall fraction of correctly classified samples."""
    total = cm.total
    if total < 1:
        raise ValidationError("confusion matrix is empty")
    return float(np.trace(cm.counts) / total)


def unweighted_accuracy(cm: ConfusionMatrix) -> float:
    """Mean per-class recall; classes absent from the evaluation set are
    excluded from the mean with a warning."""
    row_sums = cm.counts.sum(axis=1)
    present = row_sums > 0
    if not present.any():
        raise ValidationError("confusion matrix is empty")
    if not present.all():
        absent = np.flatnonzero(~present).tolist()
        warnings.warn(f"classes {absent} absent from the evaluation set; excluded from UA", stacklevel=2)
    recalls = np.diag(cm.counts)[present] / row_sums[present]
    return float(recalls.mean())


def predict(model_config, params, samples) -> np.ndarray:
    """Predicted class index per sample, deterministic (no dropout)."""
    preds = np.empty(len(samples), dtype=np.int64)
    for i, s in enumerate(samples):
        cache = model_mod._forward(model_config, params, s.signal, False, None)
        preds[i] = int(np.argmax(cache["probs"]))
    return preds


def evaluate_model(model_config, params, samples, n_classes: int):
    """Returns ``(confusion_matrix, wa, ua)`` over the given samples."""
    if not samples:
        raise ValidationError("evaluation set is empty")
    y_true = np.array([s.label for s in samples], dtype=np.int64)
    y_pred = predict(model_config, params, samples)
    cm = ConfusionMatrix.from_predictions(y_true, y_pred, n_classes)
    return cm, weighted_accuracy(cm), unweighted_accuracy(cm)


@dataclass(frozen=True)
class FoldPlan:
    fold_id: int
    train_sessions: frozenset
    test_session: str

    def __post_init__(self):
        if self.test_session in self.train_sessions:
            raise ValidationError(f"test session {self.test_session!r} also listed for training")


def make_loso_folds(samples) -> list[FoldPlan]:
    """One fold per session; validates that no speaker straddles sessions."""
    speaker_sessions: dict[str, set] = {}
    for s in samples:
        speaker_sessions.setdefault(s.speaker_id, set()).add(s.session_id)
    for speaker, sessions in sorted(speaker_sessions.items()):
        if len(sessions) > 1:
            raise ValidationError(
                f"speaker {speaker!r} appears in multiple sessions {sorted(sessions)}; "
                "folds would not be speaker-independent"
            )
    sessions = sorted({s.session_id for s in samples})
    if len(sessions) < 2:
        raise ValidationError(f"need at least 2 distinct sessions, got {len(sessions)}")
    return [
        FoldPlan(fold_id=i, train_sessions=frozenset(sessions) - {sess}, test_session=sess)
        for i, sess in enumerate(sessions)
    ]


@dataclass(frozen=True)
class FoldResult:
    fold_id: int
    test_session: str
    n_test: int
    wa: float
    ua: float


@dataclass(frozen=True)
class LosoResult:
    folds: tuple[FoldResult, ...]
    mean_wa: float
    mean_ua: float


def run_loso(
    samples: list[SpeechSample],
    model_config,
    train_config,
    emotions: EmotionSet = DEFAULT_EMOTIONS,
) -> LosoResult:
    """Train a fresh model per fold (seed = base seed + fold id) and report
    per-fold metrics plus their unweighted means."""
    from .training import train  # avoids a circular import at module load

    folds = make_loso_folds(samples)
    results = []
    for fold in folds:
        train_set = [s for s in samples if s.session_id != fold.test_session]
        test_set = [s for s in samples if s.session_id == fold.test_session]
        overlap = {s.speaker_id for s in train_set} & {s.speaker_id for s in test_set}
        if overlap:
            raise ValidationError(f"speakers {sorted(overlap)} appear in both sides of fold {fold.fold_id}")
        fold_seed = train_config.seed + fold.fold_id
        fold_config = replace(train_config, seed=fold_seed)
        params = model_mod.init_params(model_config, fold_seed)
        trained = train(params, train_set, model_config, fold_config, emotions)
        _, wa, ua = evaluate_model(model_config, trained.params, test_set, len(emotions))
        results.append(
            FoldResult(fold_id=fold.fold_id, test_session=fold.test_session, n_test=len(test_set), wa=wa, ua=ua)
        )
    mean_wa = float(np.mean([r.wa for r in results]))
    mean_ua = float(np.mean([r.ua for r in results]))
    return LosoResult(folds=tuple(results), mean_wa=mean_wa, mean_ua=mean_ua)
