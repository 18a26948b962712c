"""Relative-attribute aggregation, correlation with virality and greedy
signed-attribute selection."""

from __future__ import annotations

import csv
import enum
import io
import logging
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .constants import EXCLUDED_ATTRIBUTES
from .errors import ViralityError
from .model import AttributeAnnotation, Direction, PairLabel, SignedAttribute

log = logging.getLogger(__name__)


class ConstantColumnWarning(UserWarning):
    """Correlation requested for a column with zero variance."""


class CoverageWarning(UserWarning):
    """Some (pair, attribute) cells had no annotations and were set to 0."""


@dataclass(frozen=True, eq=False)
class AttributeMatrix:
    """Pairs x attributes table of aggregated relative labels in {-1, 0, +1}."""

    pair_ids: tuple[str, ...]
    attributes: tuple[str, ...]
    entries: np.ndarray
    labels: np.ndarray
    coverage: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=np.int8).reshape(len(self.pair_ids), len(self.attributes))
        labels = np.asarray(self.labels, dtype=np.int8).reshape(len(self.pair_ids))
        if not np.isin(entries, (-1, 0, 1)).all():
            raise ViralityError("BAD_LABEL", "attribute entries must be in {-1, 0, +1}")
        if not np.isin(labels, (-1, 1)).all():
            raise ViralityError("BAD_LABEL", "virality labels must be in {-1, +1}")
        if len(set(self.attributes)) != len(self.attributes):
            raise ViralityError("BAD_VALUE", "repeated attribute names")
        entries.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_col", {a: j for j, a in enumerate(self.attributes)})
        object.__setattr__(self, "_row", {p: i for i, p in enumerate(self.pair_ids)})

    @property
    def n_pairs(self) -> int:
        return len(self.pair_ids)

    def column(self, attribute: str) -> np.ndarray:
        try:
            return self.entries[:, self._col[attribute]]
        except KeyError:
            raise ViralityError("UNKNOWN_ATTRIBUTE", f"no attribute {attribute!r}") from None

    def row_index(self, pair_id: str) -> int:
        try:
            return self._row[pair_id]
        except KeyError:
            raise ViralityError("UNKNOWN_PAIR", f"no pair {pair_id!r}") from None

    def with_labels(self, labels) -> "AttributeMatrix":
        return AttributeMatrix(self.pair_ids, self.attributes, self.entries, labels, self.coverage)


def aggregate_annotations(
    annotations: Iterable[AttributeAnnotation],
    pairs: Iterable[PairLabel],
    attributes: Sequence[str] | None = None,
) -> AttributeMatrix:
    """Majority-vote each (pair, attribute) cell.

    A cell is the sign of ``#(+1) - #(-1)``; exact ties, all-neutral votes and
    cells with no annotations at all become 0 (the latter with a
    :class:`CoverageWarning`).  Rows follow ``pairs`` order; columns are
    ``attributes`` or, by default, the sorted annotated attribute names.
    """
    pairs = list(pairs)
    row = {p.pair_id: i for i, p in enumerate(pairs)}
    tally = defaultdict(int)
    seen = defaultdict(int)
    names = set()
    for a in annotations:
        if a.pair_id not in row:
            raise ViralityError("UNKNOWN_PAIR", f"annotation for unknown pair {a.pair_id!r}")
        tally[(a.pair_id, a.attribute)] += a.label
        seen[(a.pair_id, a.attribute)] += 1
        names.add(a.attribute)
    attributes = tuple(sorted(names)) if attributes is None else tuple(attributes)
    entries = np.zeros((len(pairs), len(attributes)), dtype=np.int8)
    coverage = np.zeros((len(pairs), len(attributes)), dtype=np.int32)
    for i, p in enumerate(pairs):
        for j, name in enumerate(attributes):
            entries[i, j] = np.sign(tally.get((p.pair_id, name), 0))
            coverage[i, j] = seen.get((p.pair_id, name), 0)
    missing = int((coverage == 0).sum())
    if missing:
        warnings.warn(f"{missing} (pair, attribute) cells have no annotations", CoverageWarning)
    labels = np.array([p.label for p in pairs], dtype=np.int8)
    return AttributeMatrix(tuple(p.pair_id for p in pairs), attributes, entries, labels, coverage)


def pearson(x, y) -> float:
    """Pearson correlation; 0.0 (with a warning) when either column is constant."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(xc @ xc)
    syy = float(yc @ yc)
    if sxx == 0.0 or syy == 0.0:
        warnings.warn("correlation of a constant column reported as 0", ConstantColumnWarning)
        return 0.0
    r = float(xc @ yc) / np.sqrt(sxx * syy)
    return float(min(1.0, max(-1.0, r)))


def attribute_virality_correlation(matrix: AttributeMatrix, attribute: str) -> float:
    return pearson(matrix.column(attribute), matrix.labels)


def attribute_correlations(matrix: AttributeMatrix) -> list[tuple[str, float, bool]]:
    """(attribute, correlation, constant_column) for every column."""
    out = []
    for name in matrix.attributes:
        col = matrix.column(name)
        constant = bool((col == col[0]).all()) or bool((matrix.labels == matrix.labels[0]).all())
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConstantColumnWarning)
            out.append((name, pearson(col, matrix.labels), constant))
    return out


def correlations_csv(rows: Iterable[tuple[str, float, bool]]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["attribute", "correlation"])
    for name, r, _ in rows:
        w.writerow([name, f"{r:.12g}"])
    return out.getvalue()


# --- combinations ------------------------------------------------------------


class ComboMode(enum.Enum):
    SUM = "sum"
    FORCE = "force"


@dataclass(frozen=True)
class Combo:
    """Ordered signed attributes acting as one pairwise predictor."""

    attributes: tuple[SignedAttribute, ...] = ()
    mode: ComboMode = ComboMode.SUM

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        object.__setattr__(self, "mode", ComboMode(self.mode))
        names = [s.attribute for s in self.attributes]
        if len(set(names)) != len(names):
            raise ViralityError("DUPLICATE_ATTRIBUTE", "an attribute appears twice in a combo")

    def __len__(self):
        return len(self.attributes)

    def plus(self, signed: SignedAttribute) -> "Combo":
        return Combo(self.attributes + (signed,), self.mode)

    def flipped(self) -> "Combo":
        return Combo(tuple(s.flipped() for s in self.attributes), self.mode)


def _votes(combo: Combo, matrix: AttributeMatrix) -> np.ndarray:
    """(n_pairs, len(combo)) signed votes."""
    if not combo.attributes:
        return np.zeros((matrix.n_pairs, 0), dtype=np.int64)
    return np.stack(
        [matrix.column(s.attribute).astype(np.int64) * int(s.direction) for s in combo.attributes],
        axis=1,
    )


def _reduce(votes: np.ndarray, mode: ComboMode) -> np.ndarray:
    if votes.shape[1] == 0:
        return np.zeros(votes.shape[0], dtype=np.int64)
    if mode is ComboMode.SUM:
        return votes.sum(axis=1)
    # FORCE: first nonzero vote in combo order
    nonzero = votes != 0
    first = nonzero.argmax(axis=1)
    picked = votes[np.arange(votes.shape[0]), first]
    return np.where(nonzero.any(axis=1), picked, 0)


def combo_scores(combo: Combo, matrix: AttributeMatrix) -> np.ndarray:
    """Per-pair combo scores, aligned with ``matrix.pair_ids``."""
    return _reduce(_votes(combo, matrix), combo.mode)


def combo_score(combo: Combo, matrix: AttributeMatrix, pair_id: str) -> int:
    """Score of one pair: vote sum (SUM) or first non-neutral vote (FORCE)."""
    return int(combo_scores(combo, matrix)[matrix.row_index(pair_id)])


def combo_correlation(combo: Combo, matrix: AttributeMatrix) -> float:
    return pearson(combo_scores(combo, matrix), matrix.labels)


def combo_accuracy(
    combo: Combo, matrix: AttributeMatrix, ties: str = "incorrect", seed: int = 0
) -> float:
    """Fraction of pairs whose score sign matches the virality label.

    Zero scores count as wrong by default; ``ties="coin"`` instead resolves
    them with a seeded fair coin.
    """
    scores = combo_scores(combo, matrix)
    predicted = np.sign(scores)
    if ties == "coin":
        rng = np.random.default_rng(seed)
        coin = rng.choice(np.array([-1, 1]), size=len(scores))
        predicted = np.where(predicted == 0, coin, predicted)
    elif ties != "incorrect":
        raise ViralityError("BAD_VALUE", f"unknown tie rule {ties!r}")
    return float(np.mean(predicted == matrix.labels)) if len(scores) else 0.0


# --- greedy selection ----------------------------------------------------------


@dataclass(frozen=True)
class GreedyStep:
    signed: SignedAttribute
    correlation: float


@dataclass
class GreedyTrace:
    steps: list[GreedyStep]
    seed_attribute: SignedAttribute | None = None
    mode: ComboMode = ComboMode.SUM

    @property
    def combo(self) -> Combo:
        return Combo(tuple(s.signed for s in self.steps), self.mode)

    @property
    def correlations(self) -> list[float]:
        return [s.correlation for s in self.steps]

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["step", "direction", "attribute", "correlation"])
        for i, s in enumerate(self.steps, start=1):
            w.writerow([i, s.signed.direction.arrow, s.signed.attribute, f"{s.correlation:.12g}"])
        return out.getvalue()


def _candidate_key(signed: SignedAttribute, r: float):
    # higher correlation first, then UP before DOWN, then attribute name
    return (-r, 0 if signed.direction is Direction.UP else 1, signed.attribute)


def best_addition(combo: Combo, matrix: AttributeMatrix, pool: Iterable[str]):
    """Best signed attribute to append to ``combo`` and the resulting correlation."""
    base = _votes(combo, matrix)
    best = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConstantColumnWarning)
        for name in pool:
            col = matrix.column(name).astype(np.int64)
            for direction in (Direction.UP, Direction.DOWN):
                votes = np.concatenate([base, (col * int(direction))[:, None]], axis=1)
                r = pearson(_reduce(votes, combo.mode), matrix.labels)
                key = _candidate_key(SignedAttribute(name, direction), r)
                if best is None or key < best[0]:
                    best = (key, SignedAttribute(name, direction), r)
    if best is None:
        return None, None
    return best[1], best[2]


def greedy_select(
    matrix: AttributeMatrix,
    max_size: int,
    mode: ComboMode | str = ComboMode.SUM,
    seed_attribute: SignedAttribute | None = None,
    exclusions: Iterable[str] = EXCLUDED_ATTRIBUTES,
    epsilon: float = 0.0,
) -> GreedyTrace:
    """Grow a signed-attribute combo one attribute at a time.

    The first attribute is ``seed_attribute`` when given, otherwise the
    signed attribute with the highest correlation.  Each later step tries
    every unused attribute both as itself and negated and keeps the one
    whose combo correlates best with virality.  Growth stops at
    ``max_size`` or when the best candidate would fall more than
    ``epsilon`` below the current correlation.
    """
    mode = ComboMode(mode)
    excluded = set(exclusions)
    pool = [a for a in matrix.attributes if a not in excluded]
    if not pool:
        raise ViralityError("NO_ATTRIBUTES", "no attributes left after exclusions")
    if max_size < 1:
        raise ViralityError("BAD_VALUE", "max_size must be >= 1")

    steps = []
    combo = Combo((), mode)
    if seed_attribute is not None:
        seed_attribute = SignedAttribute(seed_attribute.attribute, seed_attribute.direction)
        if seed_attribute.attribute in excluded:
            raise ViralityError("SEED_EXCLUDED", f"seed {seed_attribute} is excluded")
        matrix.column(seed_attribute.attribute)
        combo = combo.plus(seed_attribute)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConstantColumnWarning)
            steps.append(GreedyStep(seed_attribute, combo_correlation(combo, matrix)))

    while len(combo) < max_size:
        used = {s.attribute for s in combo.attributes}
        remaining = [a for a in pool if a not in used]
        signed, r = best_addition(combo, matrix, remaining)
        if signed is None:
            break
        if steps and r < steps[-1].correlation - epsilon:
            log.debug("greedy stop: best candidate %s gives %.4f", signed, r)
            break
        combo = combo.plus(signed)
        steps.append(GreedyStep(signed, r))
    return GreedyTrace(steps, seed_attribute, mode)
