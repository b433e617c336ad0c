"""Characteristic-scores-and-scales impact classes.

A score series is partitioned by repeatedly splitting at the mean: the
first class collects all values below the overall mean, then the division
is repeated within the set at or above that mean. Three iterations give
the four customary classes (poorly / fairly / remarkably / outstandingly
cited).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from statistics import fmean
from typing import Optional, Sequence

from .errors import InputError

__all__ = ["CssClassification", "css_classify", "class_shares", "save_classification"]

DEFAULT_CLASS_NAMES = (
    "poorly cited",
    "fairly cited",
    "remarkably cited",
    "outstandingly cited",
)


@dataclass(frozen=True)
class CssClassification:
    """Thresholds are the split means in the order produced; labels map each
    input position to its class index 0..n_classes-1. ``degenerate`` is set
    when a split could not separate values and the recursion stopped early."""

    thresholds: tuple[float, ...]
    labels: tuple[int, ...]
    class_names: tuple[str, ...]
    degenerate: bool

    @property
    def n_classes(self) -> int:
        return len(self.thresholds) + 1


def _resolve_names(n_classes: int, names: Optional[Sequence[str]]) -> tuple[str, ...]:
    base = tuple(names) if names is not None else DEFAULT_CLASS_NAMES
    if len(base) >= n_classes:
        return tuple(base[:n_classes])
    return tuple(base) + tuple(f"class {i}" for i in range(len(base), n_classes))


def css_classify(
    scores: Sequence[float],
    iterations: int = 3,
    ties_below: bool = False,
    class_names: Optional[Sequence[str]] = None,
) -> CssClassification:
    """Partition ``scores`` into impact classes by iterative mean-splitting.

    Each iteration takes the mean of the current set, assigns values below
    it to the next class, and recurses on the rest; after the final
    iteration the residual upper set is the top class. ``ties_below`` sends
    values exactly at a mean down instead of up (default: up, i.e. the
    class below a mean is strictly below it).

    A split that separates nothing (current set all-equal) is still
    recorded, but stops the recursion with the degenerate flag set; real
    score sets hit this when a tail is a single repeated value.
    """
    if not scores:
        raise InputError("css_classify requires a non-empty score series")
    if iterations < 1:
        raise InputError(f"iterations must be >= 1, got {iterations}")

    labels: list[Optional[int]] = [None] * len(scores)
    thresholds: list[float] = []
    degenerate = False
    current = list(range(len(scores)))

    for class_idx in range(iterations):
        m = fmean(scores[i] for i in current)
        if ties_below:
            lower = [i for i in current if scores[i] <= m]
            upper = [i for i in current if scores[i] > m]
        else:
            lower = [i for i in current if scores[i] < m]
            upper = [i for i in current if scores[i] >= m]
        thresholds.append(m)
        for i in lower:
            labels[i] = class_idx
        current = upper
        if not lower or not upper:
            degenerate = True
            break

    top = len(thresholds)
    for i in current:
        labels[i] = top

    return CssClassification(
        thresholds=tuple(thresholds),
        labels=tuple(labels),  # type: ignore[arg-type]
        class_names=_resolve_names(len(thresholds) + 1, class_names),
        degenerate=degenerate,
    )


def class_shares(c: CssClassification) -> list[float]:
    """Fraction of inputs per class, in class order; sums to 1."""
    n = len(c.labels)
    counts = [0] * c.n_classes
    for label in c.labels:
        counts[label] += 1
    return [count / n for count in counts]


def save_classification(
    path, record_ids: Sequence[str], scores: Sequence[float], c: CssClassification
) -> None:
    """Write one CSV row per input: record_id,score,class_index,class_name."""
    if not (len(record_ids) == len(scores) == len(c.labels)):
        raise InputError("record_ids, scores and labels must have equal length")
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["record_id", "score", "class_index", "class_name"])
        for rid, score, label in zip(record_ids, scores, c.labels):
            writer.writerow([rid, repr(float(score)), label, c.class_names[label]])
