"""Command-line entry point for the pipeline and the study lifecycle.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import densenet, study as study_mod, synth as synth_mod
from .densenet import CLASS_ORDER, ModelConfig, TrainConfig
from .ecgio import (
    DatasetManifest, EcgIoError, ManifestEntry, load_manifest,
    load_manifest_records, load_record, save_manifest, save_record,
)
from .metrics import MetricsError
from .preprocess import PreprocessError, TooShortError, extract_lead, split_segments
from .scalogram import ScalogramError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ecgstudy")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--data-dir", default="data")
    parser.add_argument("--verbose", action="store_true")
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a labeled synthetic corpus")
    p.add_argument("--per-class", type=int, required=True)
    p.add_argument("--out", default=None, help="output directory (default: <data-dir>/synth)")
    p.add_argument("--duration", type=float, default=10.0)
    p.add_argument("--fs", type=float, default=500.0)

    p = sub.add_parser("import", help="validate a manifest and its records")
    p.add_argument("--manifest", required=True)

    p = sub.add_parser("split", help="apply 10-30 s segmentation corpus-wide")
    p.add_argument("--manifest", required=True)

    p = sub.add_parser("train", help="train a model on a labeled corpus")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--epochs", type=int, default=12)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--dtype", default="float32", choices=["float32", "float64"])

    p = sub.add_parser("predict", help="classify one record")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--record", required=True)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a labeled corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)

    p = sub.add_parser("study", help="reader-study lifecycle")
    study_sub = p.add_subparsers(dest="study_command", required=True)

    pc = study_sub.add_parser("create")
    pc.add_argument("--manifest", required=True)
    pc.add_argument("--raters", required=True, help="comma-separated rater ids")
    pc.add_argument("--study-id", default=None)

    pm = study_sub.add_parser("model-run")
    pm.add_argument("--study-id", required=True)
    pm.add_argument("--checkpoint", required=True)

    pr = study_sub.add_parser("report")
    pr.add_argument("--study-id", required=True)
    pr.add_argument("--format", default="markdown", choices=["markdown", "json"])
    pr.add_argument("--out", default=None)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8400)
    p.add_argument("--checkpoint", default=None)

    return parser


def _load_corpus_images(manifest_path, config: ModelConfig):
    """Manifest (4-class labels allowed) -> stacked model inputs + label ids."""
    manifest = load_manifest(manifest_path, allowed_labels=CLASS_ORDER)
    label_by_id = {e.record_id: e.label for e in manifest.entries}
    records = load_manifest_records(manifest)
    images, labels, seg_ids = [], [], []
    skipped = []
    for rec in records:
        try:
            segments = split_segments(extract_lead(rec, "I"))
        except TooShortError as exc:
            skipped.append(str(exc))
            continue
        for seg in segments:
            images.append(densenet.segment_to_image(seg, config))
            labels.append(CLASS_ORDER.index(label_by_id[rec.record_id]))
            seg_ids.append(seg.segment_id)
    if not images:
        raise EcgIoError(f"{manifest_path}: no usable segments")
    return np.stack(images), np.asarray(labels), seg_ids, skipped


def _emit(args, payload: dict, human: str):
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        print(human)


def cmd_synth(args) -> int:
    out_dir = Path(args.out) if args.out else Path(args.data_dir) / "synth"
    specs = synth_mod.default_specs(
        args.per_class, args.seed, duration_s=args.duration, sampling_rate_hz=args.fs
    )
    entries = []
    for sr in synth_mod.synth_dataset(specs):
        save_record(sr.record, out_dir)
        entries.append(ManifestEntry(sr.record.record_id, f"{sr.record.record_id}.hea", sr.label))
    manifest = DatasetManifest(dataset_name="synth", entries=tuple(entries), root=out_dir)
    save_manifest(manifest, out_dir / "manifest.csv")
    _emit(args, {"records": len(entries), "manifest": str(out_dir / "manifest.csv")},
          f"wrote {len(entries)} records to {out_dir} (manifest.csv)")
    return 0


def cmd_import(args) -> int:
    manifest = load_manifest(args.manifest)
    records = load_manifest_records(manifest)
    by_label = {}
    for e in manifest.entries:
        by_label[e.label] = by_label.get(e.label, 0) + 1
    _emit(args, {"records": len(records), "by_label": by_label},
          f"{len(records)} records validated ({by_label})")
    return 0


def cmd_split(args) -> int:
    manifest = load_manifest(args.manifest, allowed_labels=CLASS_ORDER)
    records = load_manifest_records(manifest)
    total_segments = 0
    skipped = []
    per_record = {}
    for rec in records:
        try:
            segs = split_segments(extract_lead(rec, "I"))
        except TooShortError as exc:
            skipped.append(rec.record_id)
            if args.verbose:
                print(f"skipped: {exc}", file=sys.stderr)
            continue
        per_record[rec.record_id] = len(segs)
        total_segments += len(segs)
    n_rec = len(per_record)
    _emit(args, {"records": n_rec, "segments": total_segments,
                 "per_record": per_record, "skipped": skipped},
          f"{n_rec} record{'s' if n_rec != 1 else ''} -> {total_segments} "
          f"segment{'s' if total_segments != 1 else ''}"
          + (f" ({len(skipped)} skipped as too short)" if skipped else ""))
    return 0


def cmd_train(args) -> int:
    config = ModelConfig()
    images, labels, _, skipped = _load_corpus_images(args.manifest, config)
    params = densenet.init_params(config, seed=args.seed)
    tcfg = TrainConfig(
        lr=args.lr, momentum=args.momentum, epochs=args.epochs,
        batch_size=args.batch_size, seed=args.seed, dtype=args.dtype,
    )
    params, history = densenet.train(params, images, labels, tcfg)
    densenet.save_checkpoint(params, args.out)
    hist = [{"epoch": h.epoch, "loss": h.loss, "accuracy": h.accuracy} for h in history]
    Path(args.out).with_suffix(".history.json").write_text(json.dumps(hist, indent=2))
    _emit(args, {"checkpoint": args.out, "history": hist, "skipped": skipped},
          "\n".join(f"epoch {h['epoch']:3d}  loss {h['loss']:.4f}  acc {h['accuracy']:.3f}"
                    for h in hist) + f"\nsaved {args.out}")
    return 0


def cmd_predict(args) -> int:
    params = densenet.load_checkpoint(args.checkpoint)
    record = load_record(args.record)
    segments = split_segments(extract_lead(record, "I"))
    pred = densenet.predict_pipeline(params, segments[0])
    _emit(args, {"record_id": record.record_id, "class": pred.predicted_class,
                 "probabilities": pred.as_dict(), "model_version": pred.model_version},
          f"{record.record_id}: {pred.predicted_class}  "
          + "  ".join(f"{c}={p:.3f}" for c, p in pred.as_dict().items()))
    return 0


def cmd_eval(args) -> int:
    params = densenet.load_checkpoint(args.checkpoint)
    images, labels, _, _ = _load_corpus_images(args.manifest, params.config)
    probs = np.vstack([
        densenet.forward(params, images[i:i + 64]) for i in range(0, len(images), 64)
    ])
    pred = probs.argmax(axis=1)
    acc = float((pred == labels).mean())
    counts = np.zeros((len(CLASS_ORDER), len(CLASS_ORDER)), dtype=int)
    for r, p in zip(labels, pred):
        counts[r, p] += 1
    human = [f"accuracy {acc:.4f}", "confusion (rows = reference):"]
    header = " ".join(f"{c:>6}" for c in CLASS_ORDER)
    human.append(f"{'':>6} {header}")
    for i, c in enumerate(CLASS_ORDER):
        human.append(f"{c:>6} " + " ".join(f"{v:>6d}" for v in counts[i]))
    _emit(args, {"accuracy": acc, "classes": list(CLASS_ORDER), "confusion": counts.tolist()},
          "\n".join(human))
    return 0


def cmd_study(args) -> int:
    store = study_mod.StudyStore(args.data_dir)
    if args.study_command == "create":
        manifest = load_manifest(args.manifest)
        records = load_manifest_records(manifest)
        label_by_id = {e.record_id: e.label for e in manifest.entries}
        segments, labels = [], []
        for rec in records:
            for seg in split_segments(extract_lead(rec, "I")):
                segments.append(seg)
                labels.append(label_by_id[rec.record_id])
        raters = [r.strip() for r in args.raters.split(",") if r.strip()]
        state = store.create_study(segments, labels, raters,
                                   seed=args.seed, study_id=args.study_id)
        tokens = {r.rater_id: r.token for r in state.raters}
        _emit(args, {"study_id": state.study_id, "n_items": len(state.items),
                     "rater_tokens": tokens},
              f"study {state.study_id}: {len(state.items)} items\n"
              + "\n".join(f"  {rid}: token {tok}" for rid, tok in tokens.items()))
        return 0
    if args.study_command == "model-run":
        params = densenet.load_checkpoint(args.checkpoint)
        result = store.run_model(args.study_id, params)
        _emit(args, result,
              f"model {result['model_version']} annotated {result['n_annotated']} items"
              + (f", {len(result['failures'])} failures" if result["failures"] else ""))
        return 0
    if args.study_command == "report":
        report = store.build_report(args.study_id)
        text = (study_mod.report_markdown(report) if args.format == "markdown"
                else study_mod.report_json(report))
        if args.out:
            Path(args.out).write_text(text)
            print(f"wrote {args.out}")
        else:
            print(text, end="")
        return 0
    raise UsageError(f"unknown study command {args.study_command!r}")


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    params = densenet.load_checkpoint(args.checkpoint) if args.checkpoint else None
    store = study_mod.StudyStore(args.data_dir)
    app = create_app(store, model_params=params)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "import": cmd_import,
    "split": cmd_split,
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "study": cmd_study,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except densenet.NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except (EcgIoError, PreprocessError, ScalogramError, MetricsError,
            study_mod.StudyError, densenet.ModelError, densenet.CheckpointError,
            synth_mod.SynthError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
