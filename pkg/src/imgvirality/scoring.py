"""Virality, popularity and category-dominance scores.

All functions are pure in the :class:`~imgvirality.model.Corpus` they read.
Hour-bucket means are cached on the corpus the first time they are needed.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ViralityError
from .model import Corpus, Submission


def hour_baseline(corpus: Corpus, category: str, hour_bucket: int) -> float:
    """Mean offset score of every submission to ``category`` in ``hour_bucket``."""
    try:
        return corpus.bucket_means[(category, hour_bucket)]
    except KeyError:
        raise ViralityError(
            "EMPTY_BUCKET", f"no submissions in ({category!r}, {hour_bucket})"
        ) from None


def normalized_score(corpus: Corpus, submission: Submission) -> float:
    """Offset score divided by its hour baseline; 0 when the baseline is 0."""
    record = corpus.record(submission.image_id)
    if submission not in record.submissions:
        raise ViralityError("NOT_IN_CORPUS", f"{submission.event_key} not in corpus")
    baseline = hour_baseline(corpus, submission.category, submission.hour_bucket)
    if baseline == 0:
        return 0.0
    return corpus.offset_score(submission) / baseline


def normalized_scores(corpus: Corpus, image_id: str) -> list[float]:
    return [normalized_score(corpus, s) for s in corpus.record(image_id).submissions]


def popularity_score(corpus: Corpus, image_id: str) -> float:
    """Best normalized score across the image's submissions."""
    return max(normalized_scores(corpus, image_id))


def resubmission_score(corpus: Corpus, image_id: str) -> int:
    return corpus.record(image_id).m_h


def virality_score(corpus: Corpus, image_id: str) -> float:
    """``max_n A * ln(m_h / m_bar)``.

    The max is over normalized scores only; the log factor (negative for
    images resubmitted less often than average) multiplies it afterwards.
    """
    m_h = resubmission_score(corpus, image_id)
    return popularity_score(corpus, image_id) * math.log(m_h / corpus.m_bar)


# --- score table ------------------------------------------------------------


@dataclass(frozen=True)
class ScoreRow:
    virality: float
    max_norm_score: float
    resubmissions: int


class ScoreTable(dict):
    """Mapping image_id -> :class:`ScoreRow`, iterated in image-id order."""

    def virality(self, image_id) -> float:
        return self[image_id].virality

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["image_id", "virality", "max_norm_score", "resubmissions"])
        for image_id in sorted(self):
            row = self[image_id]
            w.writerow(
                [image_id, f"{row.virality:.12g}", f"{row.max_norm_score:.12g}", row.resubmissions]
            )
        return out.getvalue()

    @classmethod
    def from_csv(cls, text) -> "ScoreTable":
        if hasattr(text, "read"):
            text = text.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != [
            "image_id", "virality", "max_norm_score", "resubmissions"
        ]:
            raise ViralityError("BAD_HEADER", "scores.csv header mismatch")
        table = cls()
        for line_no, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            try:
                image_id, v, a, m = row
                table[image_id] = ScoreRow(float(v), float(a), int(m))
            except ValueError:
                raise ViralityError("BAD_NUMBER", f"scores.csv line {line_no}") from None
        return table


def score_table(corpus: Corpus) -> ScoreTable:
    table = ScoreTable()
    for image_id in sorted(corpus.images):
        a = popularity_score(corpus, image_id)
        m = resubmission_score(corpus, image_id)
        table[image_id] = ScoreRow(a * math.log(m / corpus.m_bar), a, m)
    return table


# --- category dominance ------------------------------------------------------


def percentile_rank(values: Sequence[float], x: float) -> float:
    """Inclusive percentile rank: 100 * #{v <= x} / #values.  ``x`` must be a member."""
    if len(values) == 0:
        raise ViralityError("EMPTY_INPUT", "percentile_rank of an empty list")
    if x not in values:
        raise ViralityError("NOT_A_MEMBER", f"{x!r} not among the values")
    return 100.0 * sum(1 for v in values if v <= x) / len(values)


class _SortedPopulation:
    """Sorted copy of a population for O(log n) inclusive percentile ranks."""

    def __init__(self, values):
        self.values = sorted(values)

    def rank(self, x) -> float:
        return 100.0 * bisect.bisect_right(self.values, x) / len(self.values)


@dataclass(frozen=True)
class CategoryScore:
    image_id: str
    category: str
    v_ck: float
    dominance_ratio: float
    norm_score: float
    submissions: int
    log_percentile: float


def _category_parts(corpus: Corpus, image_id: str):
    """Per-category (best normalized score, count) for one image, plus mean count."""
    record = corpus.record(image_id)
    best, count = {}, {}
    for s in record.submissions:
        a = normalized_score(corpus, s)
        best[s.category] = max(best.get(s.category, -math.inf), a)
        count[s.category] = count.get(s.category, 0) + 1
    mean_count = record.m_h / len(count)
    return best, count, mean_count


def _log_population(corpus: Corpus) -> _SortedPopulation:
    cache = corpus.__dict__.setdefault("_category_log_population", None)
    if cache is None:
        logs = []
        for record in corpus:
            counts = {}
            for s in record.submissions:
                counts[s.category] = counts.get(s.category, 0) + 1
            mean_count = record.m_h / len(counts)
            logs.extend(math.log(n / mean_count) for n in counts.values())
        cache = _SortedPopulation(logs)
        corpus.__dict__["_category_log_population"] = cache
    return cache


def category_scores(corpus: Corpus, image_id: str) -> list[CategoryScore]:
    """Per-category virality of one image, best category first.

    ``v_ck = A_c * pct(ln(m_c / mean_m))`` where ``A_c`` is the image's best
    normalized score in category ``c``, ``m_c`` its submission count there,
    ``mean_m`` its mean count over the categories it was posted to, and
    ``pct`` the inclusive percentile rank over all (image, category) log
    terms of the corpus.  Every entry carries the image's dominance ratio
    (best / second best).
    """
    best, count, mean_count = _category_parts(corpus, image_id)
    if len(best) < 2:
        raise ViralityError("SINGLE_CATEGORY", f"{image_id} was submitted to one category")
    population = _log_population(corpus)
    parts = []
    for category in best:
        pct = population.rank(math.log(count[category] / mean_count))
        parts.append((best[category] * pct, category, pct))
    parts.sort(key=lambda p: (-p[0], p[1]))
    top, second = parts[0][0], parts[1][0]
    if second == 0:
        raise ViralityError("ZERO_SECOND_SCORE", f"{image_id} has a zero second-best category score")
    ratio = top / second
    return [
        CategoryScore(image_id, c, v, ratio, best[c], count[c], pct) for v, c, pct in parts
    ]


def dominance_table(corpus: Corpus, image_ids: Iterable[str] | None = None) -> dict:
    """image_id -> (top category, dominance ratio) for every eligible image.

    Images with a single category or a zero second-best score are skipped.
    """
    out = {}
    ids = sorted(corpus.images) if image_ids is None else image_ids
    for image_id in ids:
        try:
            scores = category_scores(corpus, image_id)
        except ViralityError as err:
            if err.code in ("SINGLE_CATEGORY", "ZERO_SECOND_SCORE"):
                continue
            raise
        out[image_id] = (scores[0].category, scores[0].dominance_ratio)
    return out
