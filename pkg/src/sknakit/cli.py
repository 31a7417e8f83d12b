"""Command-line interface: reproducible batch commands over the library.

Every command writes a RunManifest JSON next to its outputs; re-running
the same command with the same seeds reproduces output bytes. Errors go
to stderr as one JSON object {code, message, context} with distinct exit
codes: 2 missing input, 3 bad flag value, 4 artifact version mismatch.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__, analysis, dsp
from .dataset import (
    LabelRules,
    SegmentLabel,
    build_dataset,
    extract_labeled_segments,
    label_timeline_rows,
    load_dataset,
    save_dataset,
)
from .errors import BadVersionError, InvalidConfigError, SknaError
from .nn import load_checkpoint, predict, save_checkpoint
from .recording import Recording, load_recording, save_recording
from .synth import SynthConfig, corpus_configs, synth_recording
from .trainer import TrainConfig, cross_validate, evaluate_with_stats

EXIT_MISSING_INPUT = 2
EXIT_BAD_VALUE = 3
EXIT_VERSION_MISMATCH = 4


class CliError(Exception):
    def __init__(self, code: int, message: str, context: dict | None = None):
        super().__init__(message)
        self.code = code
        self.context = context or {}


@dataclass
class RunManifest:
    command: str
    config: dict
    seeds: dict
    inputs: list[str]
    outputs: list[str]
    tool_version: str = __version__
    wall_time_s: float = 0.0
    started_at: str = ""

    def write(self, out_dir: Path, name: str = "manifest.json") -> Path:
        path = out_dir / name
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        return path


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 for every usage problem; route them through the
    # JSON error channel with the bad-flag-value code instead.
    def error(self, message):
        raise CliError(EXIT_BAD_VALUE, message)


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise CliError(EXIT_MISSING_INPUT, f"input not found: {p}", {"path": str(p)})
    return p


def _require_dir(path: str) -> Path:
    p = _require_file(path)
    if not p.is_dir():
        raise CliError(EXIT_MISSING_INPUT, f"not a directory: {p}", {"path": str(p)})
    return p


def _out_dir(path: str) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _load_recordings(dir_path: Path) -> list[Recording]:
    files = sorted(dir_path.glob("*.skna"))
    if not files:
        raise CliError(EXIT_MISSING_INPUT, f"no .skna files in {dir_path}", {"dir": str(dir_path)})
    return [load_recording(f) for f in files]


def _synth_config_from_file(path: str | None) -> SynthConfig:
    if path is None:
        return SynthConfig()
    data = json.loads(_require_file(path).read_text())
    try:
        return SynthConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in data.items()})
    except (TypeError, InvalidConfigError) as exc:
        raise CliError(EXIT_BAD_VALUE, f"bad synth config: {exc}", {"file": path})


def _label_rules_from_file(path: str | None) -> LabelRules:
    if path is None:
        return LabelRules()
    data = json.loads(_require_file(path).read_text())
    try:
        return LabelRules(**data)
    except (TypeError, InvalidConfigError) as exc:
        raise CliError(EXIT_BAD_VALUE, f"bad label rules: {exc}", {"file": path})


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> None:
    t0 = time.time()
    out = _out_dir(args.out)
    base = _synth_config_from_file(args.config)
    configs = corpus_configs(args.subjects, args.seed, base)
    outputs = []
    for cfg in configs:
        rec = synth_recording(cfg)
        path = out / f"{cfg.subject_id}.skna"
        save_recording(rec, path)
        outputs.append(str(path))
    RunManifest(
        command="synth",
        config={"subjects": args.subjects, "base": asdict(base)},
        seeds={"seed": args.seed, "subject_seeds": [c.seed for c in configs]},
        inputs=[args.config] if args.config else [],
        outputs=outputs,
        wall_time_s=time.time() - t0,
        started_at=time.strftime("%Y-%m-%dT%H:%M:%S"),
    ).write(out)


def cmd_preprocess(args) -> None:
    t0 = time.time()
    in_dir = _require_dir(getattr(args, "in"))
    out_path = Path(args.out)
    _out_dir(out_path.parent)
    rules = _label_rules_from_file(args.rules)
    recordings = _load_recordings(in_dir)
    ds = build_dataset(recordings, rules=rules, k_folds=args.folds, seed=args.seed)
    save_dataset(ds, out_path)
    timeline_path = out_path.with_suffix(".labels.csv")
    rows = []
    for rec in sorted(recordings, key=lambda r: r.subject_id):
        labeled, _ = extract_labeled_segments(rec, rules)
        rows.extend(label_timeline_rows(labeled))
    _write_csv(timeline_path, ["subject_id", "channel", "t_start_s", "label"], rows)
    RunManifest(
        command="preprocess",
        config={"rules": asdict(rules), "folds": args.folds, "class_counts": {k.name: v for k, v in ds.class_counts().items()}},
        seeds={"seed": args.seed},
        inputs=[str(in_dir)],
        outputs=[str(out_path), str(timeline_path)],
        wall_time_s=time.time() - t0,
        started_at=time.strftime("%Y-%m-%dT%H:%M:%S"),
    ).write(out_path.parent, name=out_path.stem + ".manifest.json")


def _write_psd_csv(path: Path, psd: dsp.Psd) -> None:
    _write_csv(
        path,
        ["freq_hz", "power_density_v2_per_hz"],
        zip(psd.freq_axis_hz, psd.power_density),
    )


def cmd_psd(args) -> None:
    t0 = time.time()
    in_dir = _require_dir(getattr(args, "in"))
    out = _out_dir(args.out)
    recordings = _load_recordings(in_dir)
    report = analysis.interference_report(recordings)
    _write_psd_csv(out / "psd_signal.csv", report.psd_signal)
    _write_psd_csv(out / "psd_noise.csv", report.psd_noise)
    band_report = out / "band_report.json"
    band_report.write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
    RunManifest(
        command="psd",
        config={},
        seeds={},
        inputs=[str(in_dir)],
        outputs=[str(out / "psd_signal.csv"), str(out / "psd_noise.csv"), str(band_report)],
        wall_time_s=time.time() - t0,
        started_at=time.strftime("%Y-%m-%dT%H:%M:%S"),
    ).write(out)


def cmd_smir(args) -> None:
    t0 = time.time()
    in_dir = _require_dir(getattr(args, "in"))
    out_path = Path(args.out)
    _out_dir(out_path.parent)
    recordings = _load_recordings(in_dir)
    report = analysis.interference_report(recordings)
    _write_csv(
        out_path,
        ["freq_hz", "smir_db"],
        (
            (f, s if v else "")
            for f, s, v in zip(report.smir.freq_axis_hz, report.smir.smir_db, report.smir.valid)
        ),
    )
    RunManifest(
        command="smir",
        config={},
        seeds={},
        inputs=[str(in_dir)],
        outputs=[str(out_path)],
        wall_time_s=time.time() - t0,
        started_at=time.strftime("%Y-%m-%dT%H:%M:%S"),
    ).write(out_path.parent, name=out_path.stem + ".manifest.json")


def cmd_train(args) -> None:
    t0 = time.time()
    data_path = _require_file(args.data)
    out = _out_dir(args.out)
    ds = load_dataset(data_path)
    if args.subject not in ds.subjects:
        raise CliError(
            EXIT_BAD_VALUE,
            f"subject {args.subject!r} not in dataset",
            {"subjects": list(ds.subjects)},
        )
    sub_ds = ds.select(ds.subject_indices(args.subject))
    cfg = TrainConfig(
        epochs=args.epochs,
        k_folds=args.folds,
        seed=args.seed,
        early_stop_patience=args.patience,
    )
    result = cross_validate(sub_ds, cfg)
    outputs = []
    for fr in result.folds:
        ckpt = out / f"{args.subject}_fold{fr.fold}.sknamodel"
        save_checkpoint(
            fr.params,
            ckpt,
            extra={
                "subject_id": args.subject,
                "fold": fr.fold,
                "norm_stats": fr.norm_stats,
                "classes": [l.name for l in (SegmentLabel.BASELINE, SegmentLabel.STROOP, SegmentLabel.STROOP_FLEX)],
                "best_epoch": fr.best_epoch,
                "best_val_loss": fr.best_val_loss,
            },
        )
        outputs.append(str(ckpt))
    history_path = out / f"{args.subject}_history.json"
    history_path.write_text(
        json.dumps(
            {
                "subject_id": args.subject,
                "mean_accuracy": result.mean_accuracy,
                "folds": [
                    {
                        "fold": fr.fold,
                        "best_epoch": fr.best_epoch,
                        "stopped_epoch": fr.stopped_epoch,
                        "best_val_loss": fr.best_val_loss,
                        "test_accuracy": fr.metrics.accuracy,
                        "history": fr.history,
                    }
                    for fr in result.folds
                ],
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    outputs.append(str(history_path))
    RunManifest(
        command="train",
        config={"subject": args.subject, "epochs": args.epochs, "folds": args.folds, "patience": args.patience},
        seeds={"seed": args.seed},
        inputs=[str(data_path)],
        outputs=outputs,
        wall_time_s=time.time() - t0,
        started_at=time.strftime("%Y-%m-%dT%H:%M:%S"),
    ).write(out, name=f"{args.subject}_train.manifest.json")


def cmd_eval(args) -> None:
    t0 = time.time()
    models_dir = _require_dir(args.models)
    data_path = _require_file(args.data)
    out = _out_dir(args.out)
    ds = load_dataset(data_path)
    ckpts = sorted(models_dir.glob("*.sknamodel"))
    if not ckpts:
        raise CliError(EXIT_MISSING_INPUT, f"no .sknamodel files in {models_dir}", {"dir": str(models_dir)})

    per_subject: dict[str, list] = {}
    pooled = None
    for ckpt in ckpts:
        params, extra = load_checkpoint(ckpt)
        subject = extra.get("subject_id")
        fold = extra.get("fold")
        if subject not in ds.subjects:
            raise CliError(EXIT_BAD_VALUE, f"{ckpt.name}: subject {subject!r} not in dataset", {})
        sub_idx = ds.subject_indices(subject)
        if fold is not None:
            test_idx = sub_idx[ds.fold_ids[sub_idx] == fold]
        else:
            test_idx = sub_idx
        stats = {k: tuple(v) for k, v in extra.get("norm_stats", {}).items()}
        if not stats:
            stats = {subject: (0.0, 1.0)}
        metrics = evaluate_with_stats(params, ds, stats, test_idx)
        per_subject.setdefault(subject, []).append(metrics)
        pooled = metrics.confusion if pooled is None else pooled + metrics.confusion

    from .trainer import _metrics_from_confusion

    pooled_metrics = _metrics_from_confusion(pooled)
    subject_means = {s: float(np.mean([m.accuracy for m in ms])) for s, ms in per_subject.items()}
    summary = {
        "per_subject_accuracy": subject_means,
        "mean_of_subject_means": float(np.mean(list(subject_means.values()))),
        "pooled_accuracy": pooled_metrics.accuracy,
        "pooled_confusion": pooled.tolist(),
        "pooled_confusion_normalized": pooled_metrics.confusion_normalized.tolist(),
    }
    metrics_path = out / "metrics.json"
    metrics_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    confusion_path = out / "pooled_confusion_normalized.csv"
    _write_csv(
        confusion_path,
        ["true_class"] + [l.name for l in (SegmentLabel.BASELINE, SegmentLabel.STROOP, SegmentLabel.STROOP_FLEX)],
        (
            [SegmentLabel(i).name] + [f"{v:.6f}" for v in row]
            for i, row in enumerate(pooled_metrics.confusion_normalized)
        ),
    )
    RunManifest(
        command="eval",
        config={"models": [c.name for c in ckpts]},
        seeds={},
        inputs=[str(models_dir), str(data_path)],
        outputs=[str(metrics_path), str(confusion_path)],
        wall_time_s=time.time() - t0,
        started_at=time.strftime("%Y-%m-%dT%H:%M:%S"),
    ).write(out)


def cmd_classify(args) -> None:
    t0 = time.time()
    model_path = _require_file(args.model)
    rec_path = _require_file(args.recording)
    out_path = Path(args.out)
    _out_dir(out_path.parent)
    params, extra = load_checkpoint(model_path)
    rec = load_recording(rec_path)
    if not (0 <= args.channel < rec.n_channels):
        raise CliError(
            EXIT_BAD_VALUE,
            f"channel {args.channel} outside [0, {rec.n_channels})",
            {"channels": list(rec.channel_names)},
        )
    spec = dsp.design_bandpass(rec.sample_rate_hz)
    filtered = dsp.filter_zero_phase(rec.channel(args.channel), spec)
    win = int(round(rec.sample_rate_hz))
    stats = extra.get("norm_stats", {})
    mean, std = next(iter(stats.values())) if stats else (0.0, 1.0)
    classes = extra.get("classes") or [l.name for l in (SegmentLabel.BASELINE, SegmentLabel.STROOP, SegmentLabel.STROOP_FLEX)]
    rows = []
    for i0 in range(0, filtered.size - win + 1, win):
        sg = dsp.spectrogram(filtered[i0 : i0 + win], rec.sample_rate_hz)
        x = ((sg.power - mean) / std).astype(np.float32)
        cls, probs = predict(params, x)
        rows.append(
            [f"{i0 / rec.sample_rate_hz:.3f}", f"{(i0 + win) / rec.sample_rate_hz:.3f}", classes[cls]]
            + [f"{p:.6f}" for p in probs]
        )
    _write_csv(out_path, ["t_start_s", "t_end_s", "label"] + [f"p_{c}" for c in classes], rows)
    RunManifest(
        command="classify",
        config={"channel": args.channel, "model": str(model_path)},
        seeds={},
        inputs=[str(model_path), str(rec_path)],
        outputs=[str(out_path)],
        wall_time_s=time.time() - t0,
        started_at=time.strftime("%Y-%m-%dT%H:%M:%S"),
    ).write(out_path.parent, name=out_path.stem + ".manifest.json")


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sknakit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"sknakit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic recording corpus")
    p.add_argument("--subjects", type=int, default=12)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None, help="JSON file of SynthConfig overrides")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="recordings -> labeled spectrogram dataset")
    p.add_argument("--in", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rules", default=None, help="JSON file of LabelRules overrides")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("psd", help="per-condition PSD CSVs + 95% band report")
    p.add_argument("--in", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_psd)

    p = sub.add_parser("smir", help="SMIR curve CSV")
    p.add_argument("--in", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_smir)

    p = sub.add_parser("train", help="subject-specific k-fold training")
    p.add_argument("--data", required=True)
    p.add_argument("--subject", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate checkpoints; metrics JSON + confusion CSV")
    p.add_argument("--models", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("classify", help="per-second label stream for one recording")
    p.add_argument("--model", required=True)
    p.add_argument("--recording", required=True)
    p.add_argument("--channel", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_classify)
    return parser


def _emit_error(code: int, message: str, context: dict) -> None:
    sys.stderr.write(json.dumps({"code": code, "message": message, "context": context}) + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
        return 0
    except CliError as exc:
        _emit_error(exc.code, str(exc), exc.context)
        return exc.code
    except FileNotFoundError as exc:
        _emit_error(EXIT_MISSING_INPUT, str(exc), {})
        return EXIT_MISSING_INPUT
    except BadVersionError as exc:
        _emit_error(EXIT_VERSION_MISMATCH, str(exc), {})
        return EXIT_VERSION_MISMATCH
    except (InvalidConfigError, ValueError) as exc:
        _emit_error(EXIT_BAD_VALUE, str(exc), {})
        return EXIT_BAD_VALUE
    except SknaError as exc:
        _emit_error(1, str(exc), {})
        return 1


if __name__ == "__main__":
    sys.exit(main())
