"""Independent oracles used by the tests.

These deliberately re-derive results through different algorithms than the
package (brute force, dense sweeps, hand counting) so that agreement is
evidence rather than tautology.
"""
from __future__ import annotations

import numpy as np


def detect_r_peaks(samples: np.ndarray, fs: float, min_rr_s: float = 0.3) -> np.ndarray:
    """Crude threshold-based R-peak detector, independent of the generator.

    A sample is a peak if it exceeds 55% of the global max, is a local
    maximum, and is at least ``min_rr_s`` after the previous accepted peak.
    Returns peak times in seconds.
    """
    x = np.asarray(samples, dtype=float)
    x = x - np.median(x)
    thresh = 0.55 * x.max()
    refractory = int(round(min_rr_s * fs))
    peaks = []
    last = -refractory
    for i in range(1, len(x) - 1):
        if x[i] >= thresh and x[i] >= x[i - 1] and x[i] >= x[i + 1] and i - last >= refractory:
            peaks.append(i)
            last = i
    return np.asarray(peaks) / fs


def rr_coefficient_of_variation(peak_times: np.ndarray) -> float:
    rr = np.diff(peak_times)
    if len(rr) < 2:
        raise ValueError(f"need >= 3 peaks, got {len(peak_times)}")
    return float(rr.std() / rr.mean())


def auc_pairwise(scores, positives) -> float:
    """O(n^2) AUC: P(score_pos > score_neg) + 0.5 * P(tie)."""
    scores = np.asarray(scores, dtype=float)
    positives = np.asarray(positives, dtype=bool)
    pos = scores[positives]
    neg = scores[~positives]
    wins = ties = 0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1
            elif p == q:
                ties += 1
    return (wins + 0.5 * ties) / (len(pos) * len(neg))


def confusion_by_hand(ref, pred, ref_order, pred_order):
    """Nested-loop confusion counting, no numpy indexing tricks."""
    table = [[0] * len(pred_order) for _ in ref_order]
    for r, p in zip(ref, pred):
        table[list(ref_order).index(r)][list(pred_order).index(p)] += 1
    return table


def kappa_by_hand(ref, pred):
    """Cohen's kappa straight from the definition, python floats only."""
    classes = sorted(set(ref) | set(pred))
    n = len(ref)
    agree = sum(1 for r, p in zip(ref, pred) if r == p)
    pr_a = agree / n
    pr_e = sum(
        (sum(1 for r in ref if r == c) / n) * (sum(1 for p in pred if p == c) / n)
        for c in classes
    )
    return (pr_a - pr_e) / (1 - pr_e)
