"""Command-line entry point: synth, train, loso, eval, gradcheck.

Every command is deterministic under a fixed config and seed, and writes only
under the configured output directory. Exit codes: 0 success, 1 validation or
I/O error, 2 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import kernels
from .config import config_fingerprint, load_run_config
from .data import Manifest, ManifestEntry, generate_synthetic, load_manifest, write_manifest, write_signal
from .errors import NumericError, ValidationError
from .evaluate import evaluate_model, run_loso
from .gradcheck import run_gradcheck
from .model import init_params, load_params, save_params
from .training import train


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _load_samples(cfg):
    if cfg.manifest is not None:
        return load_manifest(cfg.manifest, cfg.emotions)
    return generate_synthetic(cfg.synth, cfg.emotions)


def cmd_synth(cfg) -> int:
    if cfg.synth is None:
        raise ValidationError("synth command needs a data.synth section in the config")
    samples = generate_synthetic(cfg.synth, cfg.emotions)
    dataset_dir = cfg.output_dir / "dataset"
    dataset_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, sample in enumerate(samples):
        name = f"{i:05d}_{cfg.emotions.labels[sample.label]}.bin"
        write_signal(dataset_dir / name, sample.signal)
        entries.append(ManifestEntry(name, cfg.emotions.labels[sample.label], sample.speaker_id, sample.session_id))
    write_manifest(dataset_dir / "manifest.csv", Manifest(tuple(entries)))
    print(f"wrote {len(samples)} signals + manifest.csv to {dataset_dir}")
    return 0


def cmd_train(cfg) -> int:
    samples = _load_samples(cfg)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    params = init_params(cfg.model, cfg.seed)
    result = train(params, samples, cfg.model, cfg.train, cfg.emotions)

    checkpoint_path = cfg.output_dir / "checkpoint.bin"
    save_params(checkpoint_path, result.params)
    result.report.checkpoint = checkpoint_path.name

    report_path = cfg.output_dir / "train_report.jsonl"
    with report_path.open("w", encoding="utf-8") as fh:
        for r in result.report.records:
            fh.write(json.dumps({
                "epoch": r.epoch,
                "lr_model": r.lr_model,
                "train_loss": r.train_loss,
                "train_loss_recognition": r.train_loss_recognition,
                "train_loss_center": r.train_loss_center,
                "val_wa": r.val_wa,
                "val_ua": r.val_ua,
            }, sort_keys=True) + "\n")
        fh.write(json.dumps({
            "summary": {
                "best_epoch": result.report.best_epoch,
                "checkpoint": result.report.checkpoint,
                "config_fingerprint": config_fingerprint(cfg.raw),
                "epochs_run": len(result.report.records),
                "kernel_backend": kernels.active_backend(),
            }
        }, sort_keys=True) + "\n")
    best = result.report.records[result.report.best_epoch]
    print(f"trained {len(result.report.records)} epochs; best epoch {best.epoch}: "
          f"val WA {best.val_wa:.4f}, val UA {best.val_ua:.4f}")
    print(f"report: {report_path}")
    print(f"checkpoint: {checkpoint_path}")
    return 0


def cmd_loso(cfg) -> int:
    samples = _load_samples(cfg)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    result = run_loso(samples, cfg.model, cfg.train, cfg.emotions)

    csv_path = cfg.output_dir / "loso.csv"
    lines = ["fold,wa,ua"]
    for fold in result.folds:
        lines.append(f"{fold.fold_id},{fold.wa:.6f},{fold.ua:.6f}")
    lines.append(f"mean,{result.mean_wa:.6f},{result.mean_ua:.6f}")
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    _write_json(cfg.output_dir / "loso_summary.json", {
        "config_fingerprint": config_fingerprint(cfg.raw),
        "kernel_backend": kernels.active_backend(),
        "folds": [
            {"fold": f.fold_id, "test_session": f.test_session, "n_test": f.n_test, "wa": f.wa, "ua": f.ua}
            for f in result.folds
        ],
        "mean_wa": result.mean_wa,
        "mean_ua": result.mean_ua,
    })
    for fold in result.folds:
        print(f"fold {fold.fold_id} ({fold.test_session}): WA {fold.wa:.4f}, UA {fold.ua:.4f}")
    print(f"mean over {len(result.folds)} folds: WA {result.mean_wa:.4f}, UA {result.mean_ua:.4f}")
    return 0


def cmd_eval(cfg, checkpoint: str) -> int:
    samples = _load_samples(cfg)
    params = load_params(checkpoint)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    cm, wa, ua = evaluate_model(cfg.model, params, samples, len(cfg.emotions))

    _write_json(cfg.output_dir / "eval_metrics.json", {
        "config_fingerprint": config_fingerprint(cfg.raw),
        "n_samples": cm.total,
        "wa": wa,
        "ua": ua,
        "confusion": cm.counts.tolist(),
        "labels": list(cfg.emotions.labels),
    })
    print(f"evaluated {cm.total} samples: WA {wa:.4f}, UA {ua:.4f}")
    return 0


def cmd_gradcheck(output_dir: Path, seed: int, cases: int, model_cases: int,
                  step: float, tolerance: float, inject_fault: bool) -> int:
    report = run_gradcheck(
        seed=seed, cases=cases, step=step, tolerance=tolerance,
        model_cases=model_cases, inject_fault=inject_fault,
    )
    output_dir.mkdir(parents=True, exist_ok=True)
    _write_json(output_dir / "gradcheck.json", report.as_dict())
    for c in report.components:
        status = "PASS" if c.passed else "FAIL"
        print(f"{c.name}: max relative error {c.max_rel_error:.3e} over {c.n_cases} cases "
              f"(tolerance {c.tolerance:.0e}) {status}")
    if not report.passed:
        print("gradient check FAILED", file=sys.stderr)
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sermix", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", type=Path, default=None, help="JSON run config")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config entry (dotted keys, JSON values)")
        p.add_argument("--output-dir", type=Path, default=None, help="override output_dir")

    for name, help_text in (
        ("synth", "generate a synthetic dataset and manifest"),
        ("train", "train a model and write report + checkpoint"),
        ("loso", "leave-one-session-out cross-validation"),
        ("eval", "evaluate a checkpoint"),
    ):
        p = sub.add_parser(name, help=help_text)
        add_common(p)
        if name == "eval":
            p.add_argument("--checkpoint", required=True, help="parameter checkpoint to evaluate")

    g = sub.add_parser("gradcheck", help="verify analytic gradients against finite differences")
    g.add_argument("--output-dir", type=Path, default=Path("runs/gradcheck"))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--cases", type=int, default=100, help="random cases per loss component")
    g.add_argument("--model-cases", type=int, default=100, help="random cases for the full-model sweep")
    g.add_argument("--step", type=float, default=1e-5)
    g.add_argument("--tolerance", type=float, default=1e-4)
    g.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gradcheck":
            return cmd_gradcheck(args.output_dir, args.seed, args.cases, args.model_cases,
                                 args.step, args.tolerance, args.inject_fault)
        cfg = load_run_config(args.config, args.overrides)
        if args.output_dir is not None:
            cfg = replace(cfg, output_dir=args.output_dir,
                          raw={**cfg.raw, "output_dir": str(args.output_dir)})
        if args.command == "synth":
            return cmd_synth(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "loso":
            return cmd_loso(cfg)
        if args.command == "eval":
            return cmd_eval(cfg, args.checkpoint)
        raise ValidationError(f"unknown command {args.command!r}")
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
