"""Run configuration: a single JSON file merged over defaults, plus dotted
key=value overrides from the command line.

Every default matches the documented training recipe: projection dropout
0.4, center-loss weight 0.002, learning rates 1e-4 (model) and 1e-3
(centers) decayed by 1.25 per epoch until epoch 20, 10-epoch early-stopping
patience, 10% validation split, fixed mixing coefficient 0.5.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .augment import STEP_TYPES, AugmentChain
from .data import EmotionSet, SynthSpec
from .errors import ValidationError
from .losses import LossConfig
from .mixup import MixupPolicy
from .model import ModelConfig, StridedFrontend

DEFAULT_CONFIG = {
    "output_dir": "runs/default",
    "seed": 0,
    "emotions": ["angry", "happy", "sad", "neutral"],
    "data": {
        "manifest": None,
        "synth": None,
    },
    "model": {
        "d_in": 8,
        "d_model": 32,
        "n_layers": 2,
        "n_heads": 4,
        "d_ff": 64,
        "d_proj": 16,
        "projection_dropout": 0.4,
        "reduction": "first_vector",
        "conv_frontend": None,
        "max_len": 512,
    },
    "train": {
        "batch_size": 16,
        "lr_model": 1e-4,
        "lr_center": 1e-3,
        "lr_decay_factor": 1.25,
        "lr_decay_until_epoch": 20,
        "max_epochs": 50,
        "early_stop_patience": 10,
        "val_fraction": 0.1,
        "mixup": {"mode": "label_adaptive", "alpha": 1.0, "lambda_fixed": 0.5},
        "augment": {"steps": [], "seed": 0},
        "loss": {"lambda_center": 0.002, "epsilon": 1e-12},
    },
}

SYNTH_DEFAULTS = {
    "n_per_class": 50,
    "d_in": 8,
    "length_range": [20, 60],
    "n_speakers": 10,
    "n_sessions": 5,
    "class_separation": 2.0,
    "noise_scale": 0.5,
    "seed": 0,
}


@dataclass(frozen=True)
class RunConfig:
    raw: dict
    output_dir: Path
    seed: int
    emotions: EmotionSet
    manifest: Path | None
    synth: SynthSpec | None
    model: ModelConfig
    train: "TrainConfig"  # noqa: F821 - imported lazily to avoid a cycle


def _deep_merge(base: dict, override: dict, path: str = "") -> dict:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key in merged and isinstance(merged[key], dict) and isinstance(value, dict):
            merged[key] = _deep_merge(merged[key], value, where)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def parse_override(text: str):
    """Parse one ``dotted.key=value`` override; values are JSON when they
    parse, raw strings otherwise."""
    if "=" not in text:
        raise ValidationError(f"override {text!r} must look like dotted.key=value")
    key, _, raw_value = text.partition("=")
    key = key.strip()
    if not key:
        raise ValidationError(f"override {text!r} has an empty key")
    try:
        value = json.loads(raw_value)
    except json.JSONDecodeError:
        value = raw_value
    return key.split("."), value


def _apply_override(config: dict, keys: list[str], value) -> None:
    node = config
    for key in keys[:-1]:
        if not isinstance(node.get(key), dict):
            node[key] = {}
        node = node[key]
    node[keys[-1]] = value


def _build_augment(section: dict) -> AugmentChain:
    steps = []
    for i, raw_step in enumerate(section.get("steps", [])):
        raw_step = dict(raw_step)
        kind = raw_step.pop("kind", None)
        if kind not in STEP_TYPES:
            raise ValidationError(
                f"augment step {i}: unknown kind {kind!r}; expected one of {sorted(STEP_TYPES)}"
            )
        try:
            steps.append(STEP_TYPES[kind](**raw_step))
        except TypeError as exc:
            raise ValidationError(f"augment step {i} ({kind}): {exc}") from None
    return AugmentChain(steps=tuple(steps), seed=int(section.get("seed", 0)))


def load_run_config(path=None, overrides=()) -> RunConfig:
    """Resolve defaults <- config file <- overrides into a RunConfig."""
    from .training import TrainConfig  # local to avoid import cycle

    merged = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        path = Path(path)
        try:
            loaded = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(loaded, dict):
            raise ValidationError(f"{path}: config root must be a JSON object")
        merged = _deep_merge(merged, loaded)
    for text in overrides:
        keys, value = parse_override(text)
        _apply_override(merged, keys, value)

    data = merged.get("data", {})
    manifest = data.get("manifest")
    synth_section = data.get("synth")
    if (manifest is None) == (synth_section is None):
        raise ValidationError("exactly one data source is required: data.manifest or data.synth")

    synth = None
    if synth_section is not None:
        synth_merged = _deep_merge(SYNTH_DEFAULTS, dict(synth_section))
        synth_merged["length_range"] = tuple(synth_merged["length_range"])
        synth = SynthSpec(**synth_merged)
        merged["data"]["synth"] = {**synth_merged, "length_range": list(synth_merged["length_range"])}

    emotions = EmotionSet(tuple(merged["emotions"]))

    model_section = dict(merged["model"])
    frontend = model_section.get("conv_frontend")
    if frontend is not None:
        frontend = StridedFrontend(**frontend)
    model_section["conv_frontend"] = frontend
    if synth is not None:
        model_section["d_in"] = synth.d_in
        merged["model"]["d_in"] = synth.d_in
    model_config = ModelConfig(n_classes=len(emotions), **model_section)

    train_section = dict(merged["train"])
    mixup = MixupPolicy(**train_section.pop("mixup"))
    augment_chain = _build_augment(train_section.pop("augment"))
    loss = LossConfig(**train_section.pop("loss"))
    train_config = TrainConfig(
        mixup=mixup, augment=augment_chain, loss=loss, seed=int(merged["seed"]), **train_section
    )

    return RunConfig(
        raw=merged,
        output_dir=Path(merged["output_dir"]),
        seed=int(merged["seed"]),
        emotions=emotions,
        manifest=None if manifest is None else Path(manifest),
        synth=synth,
        model=model_config,
        train=train_config,
    )


def config_fingerprint(raw: dict) -> str:
    """Stable hash of the resolved configuration, ignoring where outputs go."""
    fingerprinted = {k: v for k, v in raw.items() if k != "output_dir"}
    canonical = json.dumps(fingerprinted, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
