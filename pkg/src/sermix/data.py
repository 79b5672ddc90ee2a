"""Core data model, manifest and binary-signal I/O, and the synthetic
emotional-sequence generator.

Signals are frame sequences of shape (length, d_in); d_in=1 recovers raw
waveform semantics. On disk a signal is two little-endian uint32 (n_frames,
d_in) followed by n_frames * d_in little-endian float32, row-major by frame.
The manifest is a UTF-8 CSV with header ``path,label,speaker,session``.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError

DEFAULT_EMOTION_NAMES = ("angry", "happy", "sad", "neutral")

MANIFEST_FIELDS = ("path", "label", "speaker", "session")


@dataclass(frozen=True)
class EmotionSet:
    """Ordered, fixed set of emotion category names; index is the class id."""

    labels: tuple[str, ...] = DEFAULT_EMOTION_NAMES

    def __post_init__(self):
        labels = tuple(self.labels)
        if not labels:
            raise ValidationError("emotion set must not be empty")
        if len(set(labels)) != len(labels):
            raise ValidationError(f"emotion names must be unique, got {labels}")
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, name: str) -> int:
        try:
            return self.labels.index(name)
        except ValueError:
            raise ValidationError(f"unknown emotion label {name!r}") from None


DEFAULT_EMOTIONS = EmotionSet()


def _frozen_signal(signal) -> np.ndarray:
    sig = np.asarray(signal, dtype=np.float64)
    if sig.ndim == 1:
        sig = sig[:, None]
    if sig.ndim != 2 or sig.shape[0] < 1 or sig.shape[1] < 1:
        raise ValidationError(f"signal must be a non-empty (length, d_in) array, got shape {sig.shape}")
    if not np.isfinite(sig).all():
        raise ValidationError("signal contains non-finite values")
    sig = np.ascontiguousarray(sig)
    sig.flags.writeable = False
    return sig


@dataclass(frozen=True, eq=False)
class SpeechSample:
    """One variable-length utterance: frames, class id, speaker and session."""

    signal: np.ndarray
    label: int
    speaker_id: str
    session_id: str
    length: int | None = None

    def __post_init__(self):
        sig = _frozen_signal(self.signal)
        object.__setattr__(self, "signal", sig)
        n = sig.shape[0]
        if self.length is None:
            object.__setattr__(self, "length", n)
        elif self.length != n:
            raise ValidationError(f"declared length {self.length} != frame count {n}")
        if int(self.label) != self.label or self.label < 0:
            raise ValidationError(f"label must be a non-negative class index, got {self.label!r}")
        object.__setattr__(self, "label", int(self.label))

    @property
    def d_in(self) -> int:
        return self.signal.shape[1]


@dataclass(frozen=True, eq=False)
class SoftLabel:
    """Probability vector over the emotion set: entries in [0, 1], sum 1."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 1 or p.size < 1:
            raise ValidationError(f"probs must be a non-empty 1-D vector, got shape {p.shape}")
        if not np.isfinite(p).all():
            raise ValidationError("probs contains non-finite values")
        if (p < 0.0).any() or (p > 1.0).any():
            raise ValidationError(f"probs entries must lie in [0, 1], got {p}")
        total = float(p.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"probs must sum to 1 within 1e-9, got {total!r}")
        p = np.ascontiguousarray(p)
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    def argmax(self) -> int:
        return int(np.argmax(self.probs))

    def __len__(self) -> int:
        return self.probs.size


def probs_of(label) -> np.ndarray:
    """Accept a SoftLabel or a raw probability vector; return the vector."""
    if isinstance(label, SoftLabel):
        return label.probs
    return np.asarray(label, dtype=np.float64)


def one_hot(label: int, emotions: EmotionSet = DEFAULT_EMOTIONS) -> SoftLabel:
    """One-hot soft label for a class index."""
    n = len(emotions)
    if int(label) != label or not 0 <= label < n:
        raise ValidationError(f"label must be an index in [0, {n}), got {label!r}")
    vec = np.zeros(n)
    vec[int(label)] = 1.0
    return SoftLabel(vec)


@dataclass(frozen=True)
class ManifestEntry:
    signal_path: str
    label_name: str
    speaker_id: str
    session_id: str


@dataclass(frozen=True)
class Manifest:
    entries: tuple[ManifestEntry, ...]

    def __post_init__(self):
        if not self.entries:
            raise ValidationError("empty manifest")
        for i, e in enumerate(self.entries):
            if not e.signal_path:
                raise ValidationError(f"manifest entry {i}: empty signal path")


def write_signal(path, signal) -> None:
    """Write a frame sequence in the binary signal format (float32)."""
    arr = np.asarray(signal, dtype=np.float32)
    if arr.ndim == 1:
        arr = arr[:, None]
    header = struct.pack("<II", arr.shape[0], arr.shape[1])
    Path(path).write_bytes(header + np.ascontiguousarray(arr).tobytes())


def read_signal(path) -> np.ndarray:
    """Read a binary signal file into a float64 (length, d_in) array."""
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise ValidationError(f"{path}: truncated signal header")
    n_frames, d_in = struct.unpack("<II", raw[:8])
    if n_frames < 1 or d_in < 1:
        raise ValidationError(f"{path}: invalid header (n_frames={n_frames}, d_in={d_in})")
    expected = 8 + 4 * n_frames * d_in
    if len(raw) != expected:
        raise ValidationError(f"{path}: expected {expected} bytes, found {len(raw)}")
    flat = np.frombuffer(raw, dtype="<f4", offset=8)
    return flat.reshape(n_frames, d_in).astype(np.float64)


def read_manifest(path) -> Manifest:
    """Parse a manifest CSV; raises with a line number on malformed rows."""
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [(i + 1, row) for i, row in enumerate(rows) if row]
    if not rows:
        raise ValidationError(f"{path}: empty manifest")
    header_line, header = rows[0]
    if tuple(h.strip() for h in header) != MANIFEST_FIELDS:
        raise ValidationError(
            f"{path}: line {header_line}: expected header {','.join(MANIFEST_FIELDS)}, got {','.join(header)}"
        )
    if len(rows) == 1:
        raise ValidationError(f"{path}: empty manifest (header only)")
    entries = []
    for lineno, row in rows[1:]:
        if len(row) != len(MANIFEST_FIELDS):
            raise ValidationError(f"{path}: line {lineno}: expected {len(MANIFEST_FIELDS)} fields, got {len(row)}")
        entries.append(ManifestEntry(*(field.strip() for field in row)))
    return Manifest(tuple(entries))


def write_manifest(path, manifest: Manifest) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_FIELDS)
        for e in manifest.entries:
            writer.writerow([e.signal_path, e.label_name, e.speaker_id, e.session_id])


def load_manifest(path, emotions: EmotionSet = DEFAULT_EMOTIONS) -> list[SpeechSample]:
    """Load every sample referenced by a manifest CSV.

    Relative signal paths are resolved against the manifest's directory.
    """
    path = Path(path)
    manifest = read_manifest(path)
    base = path.parent
    samples = []
    for lineno, entry in enumerate(manifest.entries, start=2):
        if entry.label_name not in emotions.labels:
            raise ValidationError(f"{path}: line {lineno}: unknown label {entry.label_name!r}")
        sig_path = Path(entry.signal_path)
        if not sig_path.is_absolute():
            sig_path = base / sig_path
        signal = read_signal(sig_path)
        samples.append(
            SpeechSample(signal, emotions.index(entry.label_name), entry.speaker_id, entry.session_id)
        )
    return samples


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic dataset generator.

    Classes are separated by orthogonal unit mean directions (the standard
    basis) scaled by ``class_separation``, with isotropic Gaussian noise of
    ``noise_scale`` added per frame; this yields a task whose difficulty is
    just the separation-to-noise ratio. Speakers are assigned round-robin and
    each speaker belongs to exactly one session.
    """

    n_per_class: int
    d_in: int = 8
    length_range: tuple[int, int] = (20, 60)
    n_speakers: int = 10
    n_sessions: int = 5
    class_separation: float = 2.0
    noise_scale: float = 0.5
    seed: int = 0

    def __post_init__(self):
        min_len, max_len = self.length_range
        if self.n_per_class < 1:
            raise ValidationError("n_per_class must be >= 1")
        if self.d_in < 1:
            raise ValidationError("d_in must be >= 1")
        if min_len < 1 or max_len < min_len:
            raise ValidationError(f"invalid length_range {self.length_range}")
        if self.n_speakers < 1 or self.n_sessions < 1:
            raise ValidationError("need at least one speaker and one session")
        if self.n_speakers % self.n_sessions != 0:
            raise ValidationError(
                f"n_sessions ({self.n_sessions}) must divide n_speakers ({self.n_speakers}) evenly"
            )
        if self.class_separation <= 0:
            raise ValidationError("class_separation must be > 0")
        if self.noise_scale < 0:
            raise ValidationError("noise_scale must be >= 0")
        if self.seed < 0:
            raise ValidationError("seed must be >= 0")


def generate_synthetic(spec: SynthSpec, emotions: EmotionSet = DEFAULT_EMOTIONS) -> list[SpeechSample]:
    """Generate ``len(emotions) * n_per_class`` samples, reproducibly per seed."""
    n_classes = len(emotions)
    if spec.d_in < n_classes:
        raise ValidationError(
            f"d_in ({spec.d_in}) must be >= number of classes ({n_classes}) "
            "so class mean directions can be orthogonal"
        )
    rng = np.random.default_rng(spec.seed)
    per_session = spec.n_speakers // spec.n_sessions
    min_len, max_len = spec.length_range
    samples: list[SpeechSample] = []
    idx = 0
    for c in range(n_classes):
        mean = np.zeros(spec.d_in)
        mean[c] = spec.class_separation
        for _ in range(spec.n_per_class):
            length = int(rng.integers(min_len, max_len + 1))
            frames = mean + rng.normal(0.0, spec.noise_scale, size=(length, spec.d_in))
            speaker = idx % spec.n_speakers
            samples.append(
                SpeechSample(frames, c, f"spk{speaker:02d}", f"sess{speaker // per_session}")
            )
            idx += 1
    return samples
