"""External cluster-validation metrics based on pair counting.

Two labelings of the same points are compared over all unordered point
pairs: a pair is a true positive when both labelings put the two points
together, a true negative when both keep them apart, and so on. The Rand
index, adjusted Rand index and pair precision/recall/F are all derived
from those four counts.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Sequence


@dataclass(frozen=True)
class ContingencyCounts:
    """Pair-confusion counts between a predicted and a reference labeling.

    tp: pairs with the same reference label placed in the same cluster
    fn: same reference label, different clusters
    fp: different reference labels, same cluster
    tn: different reference labels, different clusters
    n:  number of points
    """

    tp: int
    fn: int
    fp: int
    tn: int
    n: int

    @property
    def total_pairs(self) -> int:
        return self.n * (self.n - 1) // 2

    def as_tuple(self) -> tuple[int, int, int, int]:
        return self.tp, self.fn, self.fp, self.tn


def contingency(pred_labels: Sequence, true_labels: Sequence) -> ContingencyCounts:
    """Pair-confusion counts of ``pred_labels`` against ``true_labels``.

    Counts are computed from the class-by-cluster co-occurrence table
    rather than by enumerating pairs, so this stays cheap for large n.
    """
    if len(pred_labels) != len(true_labels):
        raise ValueError(
            f"label length mismatch: {len(pred_labels)} vs {len(true_labels)}"
        )
    n = len(pred_labels)
    if n < 2:
        raise ValueError("need at least 2 points to count pairs")

    cell: dict[tuple, int] = {}
    pred_sizes: dict = {}
    true_sizes: dict = {}
    for p, t in zip(pred_labels, true_labels):
        cell[(t, p)] = cell.get((t, p), 0) + 1
        pred_sizes[p] = pred_sizes.get(p, 0) + 1
        true_sizes[t] = true_sizes.get(t, 0) + 1

    tp = sum(comb(v, 2) for v in cell.values())
    same_cluster = sum(comb(v, 2) for v in pred_sizes.values())
    same_class = sum(comb(v, 2) for v in true_sizes.values())
    fp = same_cluster - tp
    fn = same_class - tp
    tn = comb(n, 2) - tp - fp - fn
    return ContingencyCounts(tp=tp, fn=fn, fp=fp, tn=tn, n=n)


def rand_index(c: ContingencyCounts) -> float:
    """Fraction of point pairs on which the two labelings agree: (tp+tn)/C(n,2)."""
    return (c.tp + c.tn) / c.total_pairs


def adjusted_rand_index(c: ContingencyCounts) -> float:
    """Rand index corrected for chance agreement.

    Uses the pair-count form with expected value
    P = (tp+fp)(tp+fn)/C(n,2) and maximum ((tp+fp)+(tp+fn))/2.
    The degenerate 0/0 case (both partitions trivial in the same way)
    returns 1, matching mainstream metric libraries.
    """
    a, b, cc = c.tp, c.fn, c.fp
    expected = (a + cc) * (a + b) / c.total_pairs
    maximum = ((a + cc) + (a + b)) / 2
    numerator = a - expected
    denominator = maximum - expected
    if denominator == 0:
        return 1.0 if numerator == 0 else 0.0
    return numerator / denominator


def precision_recall_f(
    c: ContingencyCounts, alt_recall: bool = False
) -> tuple[float, float, float]:
    """Pair precision, recall and F-measure.

    precision = tp/(tp+fp) and recall = tp/(tp+fn); either is 0 when its
    denominator is 0, and F is 0 when precision+recall is 0. With
    ``alt_recall`` the recall denominator becomes tp+tn (the agreeing
    pairs) instead of tp+fn.
    """
    a = c.tp
    precision = a / (a + c.fp) if a + c.fp > 0 else 0.0
    recall_denom = a + c.tn if alt_recall else a + c.fn
    recall = a / recall_denom if recall_denom > 0 else 0.0
    f = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f


def metrics_report(c: ContingencyCounts, alt_recall: bool = False) -> dict:
    """All validation metrics as one flat dict, ready for JSON export."""
    precision, recall, f = precision_recall_f(c, alt_recall=alt_recall)
    return {
        "tp": c.tp,
        "fn": c.fn,
        "fp": c.fp,
        "tn": c.tn,
        "rand_index": rand_index(c),
        "ari": adjusted_rand_index(c),
        "precision": precision,
        "recall": recall,
        "f_measure": f,
    }
