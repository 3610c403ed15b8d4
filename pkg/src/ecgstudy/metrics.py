"""Agreement and classification statistics for the reader study.

Confusion matrices allow the predicted label set to be a superset of the
reference set (raters may answer NOT-SURE, the model may answer NOISE);
such extra-column predictions earn no true positives anywhere and count
as false negatives for the true class. Weighted averages are
support-weighted means over the reference classes, which makes weighted
recall identically equal to accuracy.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

Z_95 = 1.96

KAPPA_BANDS = (
    (0.0, "none"),
    (0.20, "slight"),
    (0.40, "fair"),
    (0.60, "moderate"),
    (0.80, "substantial"),
    (1.0, "almost-perfect"),
)


class MetricsError(ValueError):
    pass


class EmptyMatrixError(MetricsError):
    pass


class DegenerateAgreementError(MetricsError):
    pass


class UndefinedAucError(MetricsError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    """reference classes x predicted classes counts, pred set ⊇ ref set."""

    reference_classes: tuple[str, ...]
    predicted_classes: tuple[str, ...]
    counts: np.ndarray  # (|ref|, |pred|), nonnegative ints

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "reference_classes", tuple(self.reference_classes))
        object.__setattr__(self, "predicted_classes", tuple(self.predicted_classes))
        if counts.shape != (len(self.reference_classes), len(self.predicted_classes)):
            raise MetricsError(
                f"counts shape {counts.shape} does not match "
                f"{len(self.reference_classes)}x{len(self.predicted_classes)} classes"
            )
        if (counts < 0).any():
            raise MetricsError("negative counts")
        missing = set(self.reference_classes) - set(self.predicted_classes)
        if missing:
            raise MetricsError(f"predicted classes must include reference classes; missing {missing}")

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def row(self, cls: str) -> np.ndarray:
        return self.counts[self.reference_classes.index(cls)]


@dataclass(frozen=True)
class ClassMetrics:
    class_name: str
    tp: int
    fp: int
    fn: int
    support: int
    precision: float | None
    recall: float | None
    f1: float | None


@dataclass(frozen=True)
class KappaResult:
    kappa: float
    pr_a: float
    pr_e: float
    se: float
    ci_low: float
    ci_high: float
    band: str


@dataclass(frozen=True)
class RocCurve:
    class_name: str  # a class name or "micro"
    points: tuple[tuple[float, float], ...]  # (fpr, tpr), threshold-sorted
    auc: float


def confusion(ref_labels, pred_labels, ref_order, pred_order) -> ConfusionMatrix:
    ref_labels, pred_labels = list(ref_labels), list(pred_labels)
    if len(ref_labels) != len(pred_labels):
        raise MetricsError(
            f"{len(ref_labels)} reference vs {len(pred_labels)} predicted labels"
        )
    ref_order, pred_order = tuple(ref_order), tuple(pred_order)
    ref_idx = {c: i for i, c in enumerate(ref_order)}
    pred_idx = {c: i for i, c in enumerate(pred_order)}
    counts = np.zeros((len(ref_order), len(pred_order)), dtype=np.int64)
    for r, p in zip(ref_labels, pred_labels):
        if r not in ref_idx:
            raise MetricsError(f"reference label {r!r} not in declared order {ref_order}")
        if p not in pred_idx:
            raise MetricsError(f"predicted label {p!r} not in declared order {pred_order}")
        counts[ref_idx[r], pred_idx[p]] += 1
    return ConfusionMatrix(ref_order, pred_order, counts)


def class_metrics(matrix: ConfusionMatrix, cls: str) -> ClassMetrics:
    """Precision, recall and F1 (harmonic mean) for one reference class.

    0/0 cases come back as None rather than a silent zero, so report
    rendering can annotate instead of distort.
    """
    if matrix.n == 0:
        raise EmptyMatrixError("empty confusion matrix")
    if cls not in matrix.reference_classes:
        raise MetricsError(f"{cls!r} is not a reference class")
    r = matrix.reference_classes.index(cls)
    p = matrix.predicted_classes.index(cls)
    tp = int(matrix.counts[r, p])
    fp = int(matrix.counts[:, p].sum()) - tp
    fn = int(matrix.counts[r, :].sum()) - tp
    support = tp + fn
    precision = tp / (tp + fp) if tp + fp > 0 else None
    recall = tp / (tp + fn) if tp + fn > 0 else None
    if precision is None or recall is None or precision + recall == 0:
        f1 = None  # defined only when precision + recall > 0
    else:
        f1 = 2.0 / (1.0 / precision + 1.0 / recall)
    return ClassMetrics(cls, tp, fp, fn, support, precision, recall, f1)


def all_class_metrics(matrix: ConfusionMatrix) -> list[ClassMetrics]:
    return [class_metrics(matrix, c) for c in matrix.reference_classes]


def weighted_avg(per_class: list[ClassMetrics], which: str) -> float:
    """Support-weighted mean of a per-class metric over reference classes.

    Classes with zero support are excluded; an undefined metric on a class
    that does have support enters as 0 so the weights still sum to N.
    """
    if which not in ("precision", "recall", "f1"):
        raise MetricsError(f"unknown metric {which!r}")
    total = sum(m.support for m in per_class)
    if total == 0:
        raise MetricsError("all classes have zero support")
    acc = 0.0
    for m in per_class:
        if m.support == 0:
            continue
        value = getattr(m, which)
        acc += m.support * (value if value is not None else 0.0)
    return acc / total


def accuracy(matrix: ConfusionMatrix) -> float:
    if matrix.n == 0:
        raise EmptyMatrixError("empty confusion matrix")
    diag = sum(
        matrix.counts[i, matrix.predicted_classes.index(c)]
        for i, c in enumerate(matrix.reference_classes)
    )
    return diag / matrix.n


def interpret_kappa(kappa: float) -> str:
    if not -1.0 <= kappa <= 1.0 + 1e-12:
        raise MetricsError(f"kappa {kappa} outside [-1, 1]")
    for upper, band in KAPPA_BANDS:
        if kappa <= upper:
            return band
    return "almost-perfect"


def kappa_interval(kappa: float, se: float) -> tuple[float, float]:
    """95% CI kappa +/- 1.96*SE, clamped to [-1, 1]."""
    return (max(kappa - Z_95 * se, -1.0), min(kappa + Z_95 * se, 1.0))


def cohen_kappa(ref_labels, pred_labels) -> KappaResult:
    """Cohen's kappa over the square matrix on the union of observed labels.

    SE uses the large-sample formula
    sqrt(Pr(a) * (1 - Pr(a)) / (N * (1 - Pr(e))^2)).
    """
    ref_labels, pred_labels = list(ref_labels), list(pred_labels)
    if not ref_labels or len(ref_labels) != len(pred_labels):
        raise MetricsError("need equal-length nonempty label lists")
    classes = tuple(sorted(set(ref_labels) | set(pred_labels)))
    idx = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for r, p in zip(ref_labels, pred_labels):
        counts[idx[r], idx[p]] += 1
    n = counts.sum()
    pr_a = np.trace(counts) / n
    row = counts.sum(axis=1) / n
    col = counts.sum(axis=0) / n
    pr_e = float(row @ col)
    if pr_e >= 1.0:
        raise DegenerateAgreementError(
            "chance agreement is 1 (all mass in a single class on both sides)"
        )
    kappa = (pr_a - pr_e) / (1.0 - pr_e)
    se = float(np.sqrt(pr_a * (1.0 - pr_a) / (n * (1.0 - pr_e) ** 2)))
    ci_low, ci_high = kappa_interval(kappa, se)
    return KappaResult(
        kappa=float(kappa), pr_a=float(pr_a), pr_e=pr_e, se=se,
        ci_low=ci_low, ci_high=ci_high, band=interpret_kappa(float(kappa)),
    )


def roc_auc(scores, ref_labels, cls: str) -> RocCurve:
    """One-vs-rest ROC with trapezoidal AUC.

    ``scores`` maps each item to a probability for ``cls`` (for "micro",
    pass per-class score/label pairs through :func:`roc_auc_micro`).
    """
    scores = np.asarray(scores, dtype=np.float64)
    pos = np.asarray([1 if r == cls else 0 for r in ref_labels])
    return _roc_binary(scores, pos, cls)


def roc_auc_micro(prob_matrix, ref_labels, classes) -> RocCurve:
    """Micro average: pool every (item, class) one-vs-rest decision."""
    prob_matrix = np.asarray(prob_matrix, dtype=np.float64)
    classes = tuple(classes)
    scores, pos = [], []
    for j, cls in enumerate(classes):
        scores.append(prob_matrix[:, j])
        pos.append([1 if r == cls else 0 for r in ref_labels])
    return _roc_binary(np.concatenate(scores), np.concatenate(pos), "micro")


def _roc_binary(scores: np.ndarray, pos: np.ndarray, name: str) -> RocCurve:
    n_pos = int(pos.sum())
    n_neg = len(pos) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAucError(
            f"class {name!r} needs at least one positive and one negative item"
        )
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_pos = pos[order]
    tp = np.cumsum(sorted_pos)
    fp = np.cumsum(1 - sorted_pos)
    # Group ties: keep only the last index of each distinct score.
    distinct = np.nonzero(np.diff(sorted_scores, append=-np.inf))[0]
    tpr = np.concatenate([[0.0], tp[distinct] / n_pos])
    fpr = np.concatenate([[0.0], fp[distinct] / n_neg])
    auc = float(np.trapezoid(tpr, fpr))
    points = tuple(zip(fpr.tolist(), tpr.tolist()))
    return RocCurve(class_name=name, points=points, auc=auc)


def pairwise_agreement(annotations: dict[str, list[str]]):
    """All unordered rater pairs as (pair, ConfusionMatrix, KappaResult).

    The first rater of the pair provides the matrix rows.
    """
    raters = list(annotations)
    if len(raters) < 2:
        raise MetricsError("need at least two raters")
    lengths = {len(v) for v in annotations.values()}
    if len(lengths) != 1:
        raise MetricsError(f"raters annotated different item counts: {sorted(lengths)}")
    out = []
    for a, b in combinations(raters, 2):
        la, lb = annotations[a], annotations[b]
        classes = tuple(sorted(set(la) | set(lb)))
        matrix = confusion(la, lb, classes, classes)
        out.append(((a, b), matrix, cohen_kappa(la, lb)))
    return out
