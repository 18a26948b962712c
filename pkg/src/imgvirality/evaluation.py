"""Accuracy, hit rate, confusion matrices, vote aggregation and comparison tables."""

from __future__ import annotations

import csv
import enum
import io
from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np

from .errors import ViralityError


def pairwise_accuracy(predicted: Sequence, truth: Sequence) -> float:
    predicted, truth = np.asarray(predicted), np.asarray(truth)
    if len(truth) == 0:
        raise ViralityError("EMPTY_INPUT", "no examples")
    if predicted.shape != truth.shape:
        raise ViralityError("DIMENSION_MISMATCH", "prediction/truth length differ")
    return float(np.mean(predicted == truth))


def hit_rate(predicted: Sequence, truth: Sequence, positive_class=1) -> float:
    """True-positive rate on ``positive_class``."""
    predicted, truth = np.asarray(predicted), np.asarray(truth)
    if predicted.shape != truth.shape:
        raise ViralityError("DIMENSION_MISMATCH", "prediction/truth length differ")
    positives = truth == positive_class
    if not positives.any():
        raise ViralityError("NO_POSITIVES", f"no examples of class {positive_class!r}")
    return float(np.mean(predicted[positives] == positive_class))


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    classes: tuple
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / self.total if self.total else 0.0

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["truth", *self.classes])
        for c, row in zip(self.classes, self.counts):
            w.writerow([c, *(int(x) for x in row)])
        return out.getvalue()


def confusion(predicted: Sequence, truth: Sequence, classes: Sequence[Hashable]) -> ConfusionMatrix:
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for p, t in zip(predicted, truth, strict=True):
        if p not in index or t not in index:
            raise ViralityError("UNKNOWN_CLASS", f"label outside {list(classes)}: {t!r}/{p!r}")
        counts[index[t], index[p]] += 1
    counts.setflags(write=False)
    return ConfusionMatrix(tuple(classes), counts)


class TieRule(enum.Enum):
    NEGATIVE = "negative"
    SEEDED = "seeded"


def majority_vote(votes: Iterable, tie_rule: TieRule | str = TieRule.NEGATIVE, seed: int = 0):
    """Modal label among worker votes.

    Ties go to -1 (the non-viral side) under ``NEGATIVE`` when -1 is among
    the tied labels, otherwise to the smallest tied label; ``SEEDED`` picks
    among the tied labels with a seeded generator.
    """
    tie_rule = TieRule(tie_rule)
    counts = Counter(votes)
    if not counts:
        raise ViralityError("EMPTY_INPUT", "no votes")
    top = max(counts.values())
    tied = sorted(label for label, n in counts.items() if n == top)
    if len(tied) == 1:
        return tied[0]
    if tie_rule is TieRule.NEGATIVE:
        return -1 if -1 in tied else tied[0]
    rng = np.random.default_rng(seed)
    return tied[int(rng.integers(len(tied)))]


@dataclass
class EvalReport:
    accuracy: float
    hit_rate: float | None
    n: int
    by_condition: dict = field(default_factory=dict)

    def __post_init__(self):
        for value in (self.accuracy, self.hit_rate):
            if value is not None and not 0.0 <= value <= 1.0:
                raise ViralityError("BAD_VALUE", f"rate outside [0, 1]: {value}")


def evaluate(predicted, truth, positive_class=1, conditions: Sequence | None = None) -> EvalReport:
    """Accuracy, hit rate and optional per-condition accuracy for one run."""
    predicted, truth = np.asarray(predicted), np.asarray(truth)
    acc = pairwise_accuracy(predicted, truth)
    try:
        hr = hit_rate(predicted, truth, positive_class)
    except ViralityError as err:
        if err.code != "NO_POSITIVES":
            raise
        hr = None
    by_condition = {}
    if conditions is not None:
        conditions = np.asarray(conditions)
        for c in sorted(set(conditions.tolist())):
            mask = conditions == c
            by_condition[c] = float(np.mean(predicted[mask] == truth[mask]))
    return EvalReport(acc, hr, len(truth), by_condition)


@dataclass(frozen=True)
class ComparisonRow:
    method: str
    dataset: str
    n: int
    accuracy: float


def compare_report(reports: Iterable[tuple[str, str, EvalReport]]) -> list[ComparisonRow]:
    """Flatten named (method, dataset, report) triples into table rows."""
    return [ComparisonRow(m, d, r.n, r.accuracy) for m, d, r in reports]


def comparison_csv(rows: Iterable[ComparisonRow]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["method", "dataset", "n", "accuracy"])
    for r in rows:
        w.writerow([r.method, r.dataset, r.n, f"{r.accuracy:.12g}"])
    return out.getvalue()


def comparison_text(rows: Sequence[ComparisonRow]) -> str:
    """Plain-text table grouped by dataset, one method per line."""
    rows = list(rows)
    if not rows:
        return ""
    wd = max(len("Dataset"), *(len(r.dataset) for r in rows))
    wm = max(len("Method"), *(len(r.method) for r in rows))
    lines = [f"{'Dataset':<{wd}}  {'Method':<{wm}}  {'n':>6}  Accuracy"]
    lines.append("-" * len(lines[0]))
    previous = None
    for r in rows:
        label = r.dataset if r.dataset != previous else ""
        previous = r.dataset
        lines.append(f"{label:<{wd}}  {r.method:<{wm}}  {r.n:>6}  {100 * r.accuracy:6.2f}%")
    return "\n".join(lines) + "\n"


def read_comparison_csv(text: str) -> list[ComparisonRow]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["method", "dataset", "n", "accuracy"]:
        raise ViralityError("BAD_HEADER", "comparison.csv header mismatch")
    try:
        return [ComparisonRow(m, d, int(n), float(a)) for m, d, n, a in rows[1:] if m]
    except ValueError:
        raise ViralityError("BAD_NUMBER", "comparison.csv") from None
