"""Blinded reader-study orchestration over an append-only event log.

Each study persists as one newline-delimited JSON log. Every mutation is
appended (and fsynced) before it is acknowledged; startup replays the log
to rebuild state, truncating a corrupt tail with a warning. Reports are a
pure function of the log, so a regenerated report is byte-identical.

Blinding: rater-facing payloads carry waveform samples and progress only,
never reference labels, dataset provenance or other raters' answers.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics
from .densenet import CLASS_ORDER, Params, predict_pipeline, PipelineError
from .ecgio import REFERENCE_LABELS
from .preprocess import Segment

logger = logging.getLogger(__name__)

RATER_CHOICES = ("AFIB", "NSR", "OTHER", "NOT-SURE")
MODEL_CHOICES = CLASS_ORDER  # NSR, AFIB, OTHER, NOISE

# Canonical column order for confusion matrices with extra prediction columns.
_PRED_COLUMN_ORDER = ("AFIB", "NSR", "OTHER", "NOT-SURE", "NOISE")


class StudyError(ValueError):
    pass


class AuthError(StudyError):
    pass


class ConflictError(StudyError):
    """Item already answered by this rater; raters decide once."""


class NotFoundError(StudyError):
    pass


@dataclass
class StudyItem:
    item_id: str
    samples_uv: list[float]
    sampling_rate_hz: float
    reference_label: str


@dataclass
class Rater:
    rater_id: str
    token: str
    order: list[str]  # item ids in this rater's presentation order


@dataclass
class StudyState:
    study_id: str
    created_at: float
    seed: int
    items: list[StudyItem]
    raters: list[Rater]
    annotations: dict[tuple[str, str], str] = field(default_factory=dict)
    model_annotations: dict[str, dict] = field(default_factory=dict)
    model_version: str | None = None
    model_failures: list[dict] = field(default_factory=list)

    def item(self, item_id: str) -> StudyItem:
        for it in self.items:
            if it.item_id == item_id:
                return it
        raise NotFoundError(f"no item {item_id!r} in study {self.study_id!r}")

    def rater_by_token(self, token: str) -> Rater:
        for r in self.raters:
            if r.token == token:
                return r
        raise AuthError("unknown rater token")


def _checksum(seq: int, kind: str, payload: dict) -> str:
    blob = json.dumps([seq, kind, payload], sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class EventLog:
    """Append-only `{seq, kind, payload, checksum}` JSONL file."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._seq = 0

    def append(self, kind: str, payload: dict) -> None:
        self._seq += 1
        record = {
            "seq": self._seq,
            "kind": kind,
            "payload": payload,
            "checksum": _checksum(self._seq, kind, payload),
        }
        line = json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n"
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())

    def replay(self) -> list[tuple[str, dict]]:
        """Read events; truncate a corrupt tail (partial write) with a warning."""
        if not self.path.exists():
            return []
        events = []
        good_bytes = 0
        with open(self.path, "rb") as fh:
            data = fh.read()
        pos = 0
        expected_seq = 1
        while pos < len(data):
            nl = data.find(b"\n", pos)
            if nl < 0:
                break  # unterminated tail
            line = data[pos:nl]
            try:
                record = json.loads(line.decode("utf-8"))
                ok = (
                    record["seq"] == expected_seq
                    and record["checksum"] == _checksum(record["seq"], record["kind"], record["payload"])
                )
            except (ValueError, KeyError, TypeError):
                ok = False
            if not ok:
                break
            events.append((record["kind"], record["payload"]))
            expected_seq += 1
            pos = nl + 1
            good_bytes = pos
        if good_bytes < len(data):
            logger.warning(
                "%s: truncating %d corrupt trailing bytes after %d good events",
                self.path, len(data) - good_bytes, len(events),
            )
            with open(self.path, "r+b") as fh:
                fh.truncate(good_bytes)
        self._seq = len(events)
        return events


class StudyStore:
    """All studies under one data directory, one log per study."""

    def __init__(self, data_dir):
        self.data_dir = Path(data_dir)
        self.studies_dir = self.data_dir / "studies"
        self.studies_dir.mkdir(parents=True, exist_ok=True)
        self._logs: dict[str, EventLog] = {}
        self._states: dict[str, StudyState] = {}
        for log_path in sorted(self.studies_dir.glob("*.jsonl")):
            self._load(log_path.stem)

    def _load(self, study_id: str) -> None:
        log = EventLog(self.studies_dir / f"{study_id}.jsonl")
        state = None
        for kind, payload in log.replay():
            state = _apply_event(state, kind, payload)
        self._logs[study_id] = log
        if state is not None:
            self._states[study_id] = state

    def _state(self, study_id: str) -> StudyState:
        if study_id not in self._states:
            raise NotFoundError(f"no study {study_id!r}")
        return self._states[study_id]

    def _append(self, study_id: str, kind: str, payload: dict) -> None:
        self._logs[study_id].append(kind, payload)
        self._states[study_id] = _apply_event(self._states.get(study_id), kind, payload)

    # -- lifecycle ---------------------------------------------------------

    def create_study(self, segments: list[Segment], reference_labels: list[str],
                     rater_ids: list[str], seed: int = 0,
                     study_id: str | None = None) -> StudyState:
        """Build a study from labeled segments; per-rater orders are
        independent seeded shuffles."""
        if not segments:
            raise StudyError("a study needs at least one item")
        if len(segments) != len(reference_labels):
            raise StudyError("one reference label per segment required")
        if len(set(rater_ids)) != len(rater_ids):
            raise StudyError(f"duplicate rater ids in {rater_ids}")
        if not rater_ids:
            raise StudyError("a study needs at least one rater")
        for lbl in reference_labels:
            if lbl not in REFERENCE_LABELS:
                raise StudyError(f"reference label {lbl!r} not in {REFERENCE_LABELS}")

        study_id = study_id or f"study-{int(time.time())}-{os.urandom(3).hex()}"
        if study_id in self._states:
            raise StudyError(f"study {study_id!r} already exists")
        items = []
        seen = set()
        for seg, lbl in zip(segments, reference_labels):
            if seg.segment_id in seen:
                raise StudyError(f"duplicate item id {seg.segment_id!r}")
            seen.add(seg.segment_id)
            items.append({
                "item_id": seg.segment_id,
                "samples_uv": np.asarray(seg.samples, dtype=float).round(3).tolist(),
                "sampling_rate_hz": float(seg.sampling_rate_hz),
                "reference_label": lbl,
            })
        item_ids = [it["item_id"] for it in items]
        raters = []
        for rater_id in rater_ids:
            # Per-rater shuffle seed derived from (study seed, rater id).
            digest = hashlib.sha256(f"{seed}:{rater_id}".encode()).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
            order = [item_ids[i] for i in rng.permutation(len(item_ids))]
            raters.append({
                "rater_id": rater_id,
                "token": os.urandom(16).hex(),
                "order": order,
            })
        payload = {
            "study_id": study_id,
            "created_at": time.time(),
            "seed": seed,
            "items": items,
            "raters": raters,
        }
        self._logs[study_id] = EventLog(self.studies_dir / f"{study_id}.jsonl")
        self._append(study_id, "study_created", payload)
        return self._state(study_id)

    # -- rater flow --------------------------------------------------------

    def next_item(self, study_id: str, rater_token: str) -> dict:
        """Blinded payload for the first unanswered item, or {'done': True}."""
        state = self._state(study_id)
        rater = state.rater_by_token(rater_token)
        answered = sum(1 for iid in rater.order if (rater.rater_id, iid) in state.annotations)
        for pos, item_id in enumerate(rater.order):
            if (rater.rater_id, item_id) not in state.annotations:
                item = state.item(item_id)
                return {
                    "item_id": item.item_id,
                    "sampling_rate_hz": item.sampling_rate_hz,
                    "samples_uv": item.samples_uv,
                    "position": answered,
                    "total": len(rater.order),
                }
        return {"done": True, "total": len(rater.order)}

    def submit_annotation(self, study_id: str, rater_token: str,
                          item_id: str, label: str) -> dict:
        state = self._state(study_id)
        rater = state.rater_by_token(rater_token)
        if label not in RATER_CHOICES:
            raise StudyError(f"label {label!r} not in {RATER_CHOICES}")
        state.item(item_id)  # raises NotFoundError for unknown items
        if item_id not in rater.order:
            raise NotFoundError(f"item {item_id!r} is not assigned to this rater")
        if (rater.rater_id, item_id) in state.annotations:
            raise ConflictError(
                f"rater {rater.rater_id!r} already answered item {item_id!r}"
            )
        self._append(study_id, "annotation", {
            "rater_id": rater.rater_id,
            "item_id": item_id,
            "label": label,
            "submitted_at": time.time(),
            "source": "human",
        })
        return {"ok": True, "item_id": item_id}

    def unlock_annotation(self, study_id: str, rater_id: str, item_id: str) -> None:
        """Admin-only correction path; audit-logged."""
        state = self._state(study_id)
        if (rater_id, item_id) not in state.annotations:
            raise NotFoundError(f"no committed annotation for ({rater_id}, {item_id})")
        self._append(study_id, "unlock", {
            "rater_id": rater_id, "item_id": item_id, "at": time.time(),
        })

    # -- model as pseudo-rater --------------------------------------------

    def run_model(self, study_id: str, params: Params) -> dict:
        """Classify every item; failures are recorded and the run continues."""
        state = self._state(study_id)
        annotations, failures = [], []
        for item in state.items:
            seg = Segment(
                parent_id=item.item_id, segment_index=0, lead_name="I",
                samples=np.asarray(item.samples_uv, dtype=float),
                sampling_rate_hz=item.sampling_rate_hz, start_s=0.0,
            )
            try:
                pred = predict_pipeline(params, seg)
            except (PipelineError, ValueError) as exc:
                failures.append({"item_id": item.item_id, "error": str(exc)})
                continue
            annotations.append({
                "item_id": item.item_id,
                "label": pred.predicted_class,
                "probabilities": {k: round(v, 9) for k, v in pred.as_dict().items()},
            })
        self._append(study_id, "model_run", {
            "model_version": params.model_version,
            "annotations": annotations,
            "failures": failures,
        })
        return {"model_version": params.model_version,
                "n_annotated": len(annotations), "failures": failures}

    # -- reporting ---------------------------------------------------------

    def build_report(self, study_id: str) -> dict:
        state = self._state(study_id)
        return build_report(state)


def _apply_event(state: StudyState | None, kind: str, payload: dict) -> StudyState:
    if kind == "study_created":
        return StudyState(
            study_id=payload["study_id"],
            created_at=payload["created_at"],
            seed=payload["seed"],
            items=[StudyItem(**it) for it in payload["items"]],
            raters=[Rater(**r) for r in payload["raters"]],
        )
    if state is None:
        raise StudyError(f"event {kind!r} before study_created")
    if kind == "annotation":
        state.annotations[(payload["rater_id"], payload["item_id"])] = payload["label"]
    elif kind == "unlock":
        state.annotations.pop((payload["rater_id"], payload["item_id"]), None)
    elif kind == "model_run":
        state.model_version = payload["model_version"]
        state.model_failures = payload["failures"]
        state.model_annotations = {a["item_id"]: a for a in payload["annotations"]}
    else:
        raise StudyError(f"unknown event kind {kind!r}")
    return state


# ---------------------------------------------------------------------------
# Report construction (pure functions of the study state)

def _pred_order(observed: set[str]) -> tuple[str, ...]:
    extras = tuple(c for c in _PRED_COLUMN_ORDER[3:] if c in observed)
    return REFERENCE_LABELS + extras


def _matrix_dict(m: metrics.ConfusionMatrix) -> dict:
    return {
        "reference_classes": list(m.reference_classes),
        "predicted_classes": list(m.predicted_classes),
        "counts": m.counts.tolist(),
    }


def _kappa_dict(k: metrics.KappaResult) -> dict:
    return {
        "kappa": round(k.kappa, 9), "pr_a": round(k.pr_a, 9), "pr_e": round(k.pr_e, 9),
        "se": round(k.se, 9), "ci_low": round(k.ci_low, 9), "ci_high": round(k.ci_high, 9),
        "band": k.band,
    }


def _rater_section(ref: list[str], pred: list[str]) -> dict:
    order = _pred_order(set(pred))
    matrix = metrics.confusion(ref, pred, REFERENCE_LABELS, order)
    per_class = metrics.all_class_metrics(matrix)
    kappa = metrics.cohen_kappa(ref, pred)
    return {
        "confusion": _matrix_dict(matrix),
        "per_class": {
            m.class_name: {
                "precision": _r9(m.precision), "recall": _r9(m.recall), "f1": _r9(m.f1),
                "support": m.support, "tp": m.tp, "fp": m.fp, "fn": m.fn,
            }
            for m in per_class
        },
        "weighted": {
            "precision": _r9(metrics.weighted_avg(per_class, "precision")),
            "recall": _r9(metrics.weighted_avg(per_class, "recall")),
            "f1": _r9(metrics.weighted_avg(per_class, "f1")),
        },
        "accuracy": _r9(metrics.accuracy(matrix)),
        "kappa": _kappa_dict(kappa),
    }


def _r9(v):
    return None if v is None else round(float(v), 9)


def _mean(values):
    values = [v for v in values if v is not None]
    return round(float(np.mean(values)), 9) if values else None


def build_report(state: StudyState) -> dict:
    ref_by_item = {it.item_id: it.reference_label for it in state.items}
    item_ids = [it.item_id for it in state.items]
    ref = [ref_by_item[i] for i in item_ids]

    complete, partial = [], []
    for rater in state.raters:
        answered = [(rater.rater_id, iid) in state.annotations for iid in item_ids]
        (complete if all(answered) else partial).append(rater.rater_id)

    rater_sections = {}
    rater_labels = {}
    for rater_id in complete:
        pred = [state.annotations[(rater_id, iid)] for iid in item_ids]
        rater_labels[rater_id] = pred
        rater_sections[rater_id] = _rater_section(ref, pred)

    model_section = None
    roc_section = None
    if state.model_annotations:
        covered = [i for i in item_ids if i in state.model_annotations]
        model_pred = [state.model_annotations[i]["label"] for i in covered]
        model_ref = [ref_by_item[i] for i in covered]
        model_section = _rater_section(model_ref, model_pred)
        model_section["model_version"] = state.model_version
        model_section["failures"] = state.model_failures
        probs = np.array([
            [state.model_annotations[i]["probabilities"][c] for c in REFERENCE_LABELS]
            for i in covered
        ])
        roc_section = {}
        for j, cls in enumerate(REFERENCE_LABELS):
            try:
                curve = metrics.roc_auc(probs[:, j], model_ref, cls)
                roc_section[cls] = {"auc": round(curve.auc, 9), "points": [
                    [round(f, 9), round(t, 9)] for f, t in curve.points]}
            except metrics.UndefinedAucError as exc:
                roc_section[cls] = {"auc": None, "error": str(exc)}
        micro = metrics.roc_auc_micro(probs, model_ref, REFERENCE_LABELS)
        roc_section["micro"] = {"auc": round(micro.auc, 9), "points": [
            [round(f, 9), round(t, 9)] for f, t in micro.points]}

    if not rater_sections and model_section is None:
        raise StudyError("no completed raters and no model run; nothing to report")

    rater_average = None
    if rater_sections:
        secs = list(rater_sections.values())
        rater_average = {
            "weighted": {
                k: _mean(s["weighted"][k] for s in secs)
                for k in ("precision", "recall", "f1")
            },
            "per_class_f1": {
                c: _mean(s["per_class"][c]["f1"] for s in secs)
                for c in REFERENCE_LABELS
            },
            "accuracy": _mean(s["accuracy"] for s in secs),
            "kappa": _mean(s["kappa"]["kappa"] for s in secs),
        }

    pairwise = []
    if len(rater_labels) >= 2:
        for (a, b), matrix, kappa in metrics.pairwise_agreement(rater_labels):
            pairwise.append({
                "raters": [a, b],
                "confusion": _matrix_dict(matrix),
                "kappa": _kappa_dict(kappa),
            })

    ref_counts = {c: ref.count(c) for c in REFERENCE_LABELS}
    return {
        "study_id": state.study_id,
        "n_items": len(item_ids),
        "reference_counts": ref_counts,
        "raters": rater_sections,
        "rater_average": rater_average,
        "model": model_section,
        "model_roc": roc_section,
        "pairwise": pairwise,
        "partial_raters_excluded": partial,
        "footnotes": [
            "NOT-SURE and NOISE predictions score as incorrect for every "
            "reference class (no reference NOISE/NOT-SURE labels exist).",
            "Weighted averages are support-weighted over AFIB/NSR/OTHER; "
            "macro averages are omitted.",
        ],
    }


def report_json(report: dict) -> str:
    """Canonical serialization; byte-identical across regenerations."""
    return json.dumps(report, sort_keys=True, separators=(",", ":")) + "\n"


def report_markdown(report: dict) -> str:
    """Render the three comparison tables plus pairwise agreement."""
    def pct(v):
        return "--" if v is None else f"{100 * v:.1f}"

    rows = list(report["raters"].items())
    lines = [f"# Study report: {report['study_id']}", ""]
    lines += [f"Items: {report['n_items']}  "
              f"(AFIB {report['reference_counts']['AFIB']}, "
              f"NSR {report['reference_counts']['NSR']}, "
              f"OTHER {report['reference_counts']['OTHER']})", ""]

    lines += ["## Weighted performance metrics", "",
              "| | Weighted Avg. Precision | Weighted Avg. Recall | Weighted Avg. F1-Score |",
              "|---|---|---|---|"]
    for rater_id, sec in rows:
        w = sec["weighted"]
        lines.append(f"| {rater_id} | {pct(w['precision'])} | {pct(w['recall'])} | {pct(w['f1'])} |")
    if report["rater_average"]:
        w = report["rater_average"]["weighted"]
        lines.append(f"| Rater Avg. | {pct(w['precision'])} | {pct(w['recall'])} | {pct(w['f1'])} |")
    if report["model"]:
        w = report["model"]["weighted"]
        lines.append(f"| Model | {pct(w['precision'])} | {pct(w['recall'])} | {pct(w['f1'])} |")

    lines += ["", "## F1-score per class and total accuracy", "",
              "| | F1 (AFIB) | F1 (NSR) | F1 (OTHER) | Accuracy |",
              "|---|---|---|---|---|"]

    def f1_row(label, sec):
        f = {c: sec["per_class"][c]["f1"] for c in REFERENCE_LABELS}
        lines.append(f"| {label} | {pct(f['AFIB'])} | {pct(f['NSR'])} | {pct(f['OTHER'])} | {pct(sec['accuracy'])} |")

    for rater_id, sec in rows:
        f1_row(rater_id, sec)
    if report["rater_average"]:
        avg = report["rater_average"]
        f = avg["per_class_f1"]
        lines.append(f"| Rater Avg. | {pct(f['AFIB'])} | {pct(f['NSR'])} | {pct(f['OTHER'])} | {pct(avg['accuracy'])} |")
    if report["model"]:
        f1_row("Model", report["model"])

    lines += ["", "## Agreement with the reference labels (Cohen's kappa)", "",
              "| | kappa | SE | 95% CI | Band |",
              "|---|---|---|---|---|"]

    def kappa_row(label, k):
        lines.append(
            f"| {label} | {k['kappa']:.2f} | {k['se']:.3f} | "
            f"{k['ci_low']:.2f} to {k['ci_high']:.2f} | {k['band']} |"
        )

    for rater_id, sec in rows:
        kappa_row(rater_id, sec["kappa"])
    if report["model"]:
        kappa_row("Model", report["model"]["kappa"])

    if report["model_roc"]:
        lines += ["", "## Model ROC / AUC", ""]
        for cls, entry in report["model_roc"].items():
            auc = entry.get("auc")
            lines.append(f"- AUC ({cls}): {'undefined' if auc is None else f'{auc:.2f}'}")

    if report["pairwise"]:
        lines += ["", "## Pairwise rater agreement", ""]
        for p in report["pairwise"]:
            k = p["kappa"]
            lines.append(
                f"- {p['raters'][0]} vs {p['raters'][1]}: kappa {k['kappa']:.2f} "
                f"({k['ci_low']:.2f} to {k['ci_high']:.2f}), {k['band']}"
            )

    if report["partial_raters_excluded"]:
        lines += ["", f"Excluded partial raters: {', '.join(report['partial_raters_excluded'])}"]
    lines += ["", *(f"> {f}" for f in report["footnotes"]), ""]
    return "\n".join(lines)
