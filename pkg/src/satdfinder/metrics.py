"""Evaluation metrics: confusion scores, P@k, recall-cost curves, APFD, Cohen-d grouping."""

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np


@dataclass(frozen=True)
class ConfusionMetrics:
    precision: float
    recall: float
    f1: float
    # precision is undefined for an empty prediction set; reported as 0.0 with this flag
    precision_undefined: bool = False


def confusion_metrics(predicted: set, truth: set, universe: int | None = None) -> ConfusionMetrics:
    """Precision/recall/F1 of a predicted id set against the true id set."""
    if universe is not None:
        span = range(universe)
        if any(i not in span for i in predicted) or any(i not in span for i in truth):
            raise ValueError("predicted and truth must be subsets of the universe")
    tp = len(predicted & truth)
    undefined = len(predicted) == 0
    precision = 0.0 if undefined else tp / len(predicted)
    recall = 1.0 if not truth else tp / len(truth)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return ConfusionMetrics(precision=precision, recall=recall, f1=f1, precision_undefined=undefined)


def p_at_k(
    scores: Sequence[float],
    truth: set,
    k: int = 10,
    ids: Sequence[int] | None = None,
) -> float:
    """Fraction of the k highest-scored items (ties: lower id first) that are true."""
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    if len(scores) < k:
        raise ValueError(f"need at least {k} scored items, got {len(scores)}")
    if ids is None:
        ids = range(len(scores))
    ranked = sorted(zip(scores, ids), key=lambda pair: (-pair[0], pair[1]))
    return sum(1 for _, i in ranked[:k] if i in truth) / k


@dataclass
class RecallCostCurve:
    """Recall as a step function of human-inspection cost over [0, 1]."""

    points: list[tuple[float, float]]
    auto_recall_at_zero: float = 0.0

    def to_csv(self) -> str:
        lines = ["cost,recall"]
        lines.extend(f"{c:.6f},{r:.6f}" for c, r in self.points)
        return "\n".join(lines) + "\n"


def recall_cost_curve(
    inspection_order: Sequence[int],
    truth: set,
    total_comments: int,
    auto_found: set | None = None,
) -> RecallCostCurve:
    """Trace recall against cost = inspections / total comments.

    Auto-classified comments contribute recall at cost zero and are never
    inspected, so the curve extends horizontally from the last inspection to
    cost 1 (a shared integration domain across treatments).
    """
    auto_found = auto_found or set()
    if auto_found & set(inspection_order):
        raise ValueError("inspection_order must be disjoint from auto_found")
    if total_comments <= 0:
        raise ValueError("total_comments must be positive")

    if not truth:
        return RecallCostCurve(points=[(0.0, 1.0), (1.0, 1.0)], auto_recall_at_zero=1.0)

    m = len(truth)
    n = total_comments
    found = len(auto_found & truth)
    auto_recall = found / m
    points = [(0.0, auto_recall)]
    for i, cid in enumerate(inspection_order, start=1):
        if cid in truth:
            found += 1
        points.append((i / n, found / m))
    if points[-1][0] < 1.0:
        points.append((1.0, points[-1][1]))
    return RecallCostCurve(points=points, auto_recall_at_zero=auto_recall)


def apfd(curve: RecallCostCurve) -> float:
    """Area under the recall-cost curve over cost in [0, 1].

    Integrates between consecutive per-inspection points, which on a pure
    ranking trace reproduces the classical prioritization formula
    1 - sum(pos_i)/(n*m) + 1/(2n) exactly.
    """
    pts = curve.points
    if not pts:
        raise ValueError("empty curve")
    terms = []
    for (c0, r0), (c1, r1) in zip(pts, pts[1:]):
        if c1 < c0:
            raise ValueError("curve points must be sorted by cost")
        terms.append((c1 - c0) * (r0 + r1) / 2.0)
    return math.fsum(terms)


def cohen_small(values: Iterable[float], k: float = 0.2) -> float:
    """Small-effect threshold: k times the population standard deviation."""
    vals = list(values)
    if len(vals) < 2:
        raise ValueError("need at least two values")
    mean = math.fsum(vals) / len(vals)
    var = math.fsum((v - mean) ** 2 for v in vals) / len(vals)
    return k * math.sqrt(var)


def cohen_best(
    results: Mapping[str, float],
    k: float = 0.2,
    small: float | None = None,
) -> set[str]:
    """Treatments whose score is within a small effect size of the maximum.

    `small` may be precomputed over a larger value pool (e.g. a whole
    treatments-by-targets table); otherwise it is taken over `results` itself.
    """
    if len(results) < 2:
        raise ValueError("need at least two treatments")
    if small is None:
        small = cohen_small(results.values(), k=k)
    best = max(results.values())
    return {name for name, value in results.items() if value >= best - small}


def median_iqr(values: Iterable[float]) -> tuple[float, float]:
    """Median and 75th-minus-25th percentile delta (linear interpolation)."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise ValueError("need at least one value")
    q25, q50, q75 = np.percentile(arr, [25, 50, 75])
    return float(q50), float(q75 - q25)
