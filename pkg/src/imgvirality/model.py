"""Domain types: submissions, corpora, pair labels, annotations and features."""

from __future__ import annotations

import enum
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .constants import MIN_CATEGORY_SUBMISSIONS
from .errors import ViralityError


@dataclass(frozen=True)
class Submission:
    """One posting of an image to a category during one hour bucket."""

    image_id: str
    category: str
    hour_bucket: int
    ups: int
    downs: int

    def __post_init__(self):
        if not self.image_id or not self.category:
            raise ViralityError("BAD_VALUE", "image_id and category must be non-empty")
        for name in ("hour_bucket", "ups", "downs"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ViralityError("BAD_NUMBER", f"{name} must be an integer, got {value!r}")
            if value < 0:
                raise ViralityError("BAD_VALUE", f"{name} must be >= 0, got {value}")

    @property
    def raw_score(self) -> int:
        return int(self.ups) - int(self.downs)

    @property
    def event_key(self):
        return (self.image_id, self.category, self.hour_bucket)


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    submissions: tuple[Submission, ...]

    def __post_init__(self):
        if not self.submissions:
            raise ViralityError("EMPTY_INPUT", f"image {self.image_id} has no submissions")
        if any(s.image_id != self.image_id for s in self.submissions):
            raise ViralityError("BAD_VALUE", f"mixed image ids in record {self.image_id}")

    @property
    def m_h(self) -> int:
        """Number of (re)submissions of this image."""
        return len(self.submissions)

    @property
    def categories(self) -> tuple[str, ...]:
        return tuple(sorted({s.category for s in self.submissions}))


@dataclass(frozen=True)
class Corpus:
    """Validated submission history, grouped per image.

    Build with :func:`validate_corpus`.  Bucket means and other derived
    tables are computed lazily and cached on the instance.
    """

    images: Mapping[str, ImageRecord]
    categories: frozenset
    score_offset: int
    m_bar: float

    def __iter__(self):
        return iter(self.images.values())

    def __len__(self):
        return len(self.images)

    def __contains__(self, image_id):
        return image_id in self.images

    def submissions(self) -> Iterable[Submission]:
        for record in self.images.values():
            yield from record.submissions

    @property
    def n_submissions(self) -> int:
        return sum(r.m_h for r in self.images.values())

    def offset_score(self, submission: Submission) -> int:
        return submission.raw_score + self.score_offset

    @cached_property
    def bucket_means(self) -> dict:
        """(category, hour_bucket) -> mean offset score."""
        sums = defaultdict(int)
        counts = Counter()
        for s in self.submissions():
            key = (s.category, s.hour_bucket)
            sums[key] += self.offset_score(s)
            counts[key] += 1
        return {key: sums[key] / counts[key] for key in sums}

    def record(self, image_id: str) -> ImageRecord:
        try:
            return self.images[image_id]
        except KeyError:
            raise ViralityError("UNKNOWN_IMAGE", f"image {image_id!r} not in corpus") from None


@dataclass(frozen=True)
class PairLabel:
    """Ordered image pair; ``label`` is +1 when ``image_a`` is the more viral."""

    pair_id: str
    image_a: str
    image_b: str
    label: int

    def __post_init__(self):
        if self.image_a == self.image_b:
            raise ViralityError("SAME_IMAGE", f"pair {self.pair_id} uses {self.image_a} twice")
        if self.label not in (-1, 1) or isinstance(self.label, bool):
            raise ViralityError("BAD_LABEL", f"pair label must be -1 or +1, got {self.label!r}")

    def swapped(self) -> "PairLabel":
        return PairLabel(self.pair_id, self.image_b, self.image_a, -self.label)


@dataclass(frozen=True)
class AttributeAnnotation:
    pair_id: str
    attribute: str
    worker_id: str
    label: int

    def __post_init__(self):
        if self.label not in (-1, 0, 1) or isinstance(self.label, bool):
            raise ViralityError("BAD_LABEL", f"annotation label must be -1, 0 or +1, got {self.label!r}")


@dataclass(frozen=True)
class FeatureVector:
    image_id: str
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not all(math.isfinite(v) for v in self.values):
            raise ViralityError("NON_FINITE_VALUE", f"non-finite feature for {self.image_id}")

    def __len__(self):
        return len(self.values)


class FeatureSet:
    """Fixed-dimension collection of feature vectors indexed by image id."""

    def __init__(self, vectors: Iterable[FeatureVector]):
        vectors = list(vectors)
        if not vectors:
            raise ViralityError("EMPTY_INPUT", "feature set is empty")
        dim = len(vectors[0])
        ids = []
        for v in vectors:
            if len(v) != dim:
                raise ViralityError(
                    "DIMENSION_MISMATCH", f"{v.image_id} has {len(v)} values, expected {dim}"
                )
            ids.append(v.image_id)
        if len(set(ids)) != len(ids):
            raise ViralityError("DUPLICATE_ID", "feature set has repeated image ids")
        self.ids = tuple(ids)
        self.dim = dim
        self.matrix = np.array([v.values for v in vectors], dtype=float).reshape(len(ids), dim)
        self.matrix.setflags(write=False)
        self._index = {image_id: i for i, image_id in enumerate(ids)}

    @classmethod
    def from_array(cls, ids: Sequence[str], matrix) -> "FeatureSet":
        matrix = np.asarray(matrix, dtype=float)
        return cls(FeatureVector(i, row) for i, row in zip(ids, matrix))

    def __len__(self):
        return len(self.ids)

    def __contains__(self, image_id):
        return image_id in self._index

    def __getitem__(self, image_id) -> np.ndarray:
        try:
            return self.matrix[self._index[image_id]]
        except KeyError:
            raise ViralityError("MISSING_FEATURES", f"no features for {image_id!r}") from None

    def vectors(self) -> list[FeatureVector]:
        return [FeatureVector(i, row) for i, row in zip(self.ids, self.matrix)]


class Direction(enum.IntEnum):
    UP = 1
    DOWN = -1

    @property
    def arrow(self) -> str:
        return "up" if self is Direction.UP else "down"


@dataclass(frozen=True, order=True)
class SignedAttribute:
    """An attribute taken as itself (UP) or as its negation (DOWN)."""

    attribute: str
    direction: Direction = Direction.UP

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))

    def flipped(self) -> "SignedAttribute":
        return SignedAttribute(self.attribute, Direction(-self.direction))

    @classmethod
    def parse(cls, text: str) -> "SignedAttribute":
        """Parse ``"+name"``, ``"-name"`` or a bare ``"name"`` (UP)."""
        text = text.strip()
        if text.startswith("-"):
            return cls(text[1:].strip(), Direction.DOWN)
        if text.startswith("+"):
            return cls(text[1:].strip(), Direction.UP)
        return cls(text, Direction.UP)

    def __str__(self):
        return ("+" if self.direction is Direction.UP else "-") + self.attribute


def validate_corpus(
    raw_submissions: Iterable[Submission],
    min_category_submissions: int = MIN_CATEGORY_SUBMISSIONS,
) -> Corpus:
    """Group submissions into a :class:`Corpus`.

    Categories with fewer than ``min_category_submissions`` submissions are
    dropped together with their submissions.  The score offset is chosen so
    the smallest offset score over the surviving set is 0 (no shift when every
    raw score is already non-negative).  Duplicate (image, category, hour)
    events raise ``DUPLICATE_EVENT``.
    """
    raw = list(raw_submissions)
    if not raw:
        raise ViralityError("EMPTY_INPUT", "no submissions")
    seen = set()
    for s in raw:
        if s.event_key in seen:
            raise ViralityError("DUPLICATE_EVENT", f"duplicate submission event {s.event_key}")
        seen.add(s.event_key)

    per_category = Counter(s.category for s in raw)
    kept_categories = {c for c, n in per_category.items() if n >= min_category_submissions}
    kept = [s for s in raw if s.category in kept_categories]
    if not kept:
        raise ViralityError(
            "EMPTY_INPUT", f"no category has at least {min_category_submissions} submissions"
        )

    grouped = defaultdict(list)
    for s in kept:
        grouped[s.image_id].append(s)
    images = {}
    for image_id in sorted(grouped):
        subs = sorted(grouped[image_id], key=lambda s: (s.hour_bucket, s.category))
        images[image_id] = ImageRecord(image_id, tuple(subs))

    min_raw = min(s.raw_score for s in kept)
    offset = max(0, -min_raw)
    m_bar = len(kept) / len(images)
    return Corpus(
        images=images,
        categories=frozenset(kept_categories),
        score_offset=offset,
        m_bar=m_bar,
    )
