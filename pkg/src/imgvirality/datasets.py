"""Derived datasets: viral/non-viral dichotomy, pair sets, category sets,
proxy images and seeded synthetic corpora."""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .constants import DICHOTOMY_K, PER_CATEGORY, PROXY_NEIGHBOR_RANKS, RANDOM_MIX_PAIRS
from .errors import ViralityError
from .model import AttributeAnnotation, Corpus, FeatureSet, PairLabel, Submission
from .scoring import ScoreTable, dominance_table


class Provenance(enum.Enum):
    TOPBOTTOM = "topbottom"
    RANDOM_MIX = "random_mix"
    SYNTHETIC = "synthetic"


@dataclass(frozen=True)
class Dichotomy:
    viral: tuple[str, ...]
    nonviral: tuple[str, ...]
    virality: Mapping[str, float] = field(repr=False, compare=False, default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.viral)

    @property
    def extremes(self) -> frozenset:
        return frozenset(self.viral) | frozenset(self.nonviral)

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["side", "rank", "image_id", "virality"])
        for side, ids in (("viral", self.viral), ("nonviral", self.nonviral)):
            for rank, image_id in enumerate(ids, start=1):
                w.writerow([side, rank, image_id, f"{self.virality[image_id]:.12g}"])
        return out.getvalue()


@dataclass(frozen=True)
class PairSet:
    pairs: tuple[PairLabel, ...]
    provenance: Provenance

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def by_id(self) -> dict:
        return {p.pair_id: p for p in self.pairs}


def _viralities(scores) -> dict:
    if isinstance(scores, ScoreTable):
        return {image_id: row.virality for image_id, row in scores.items()}
    return dict(scores)


def build_dichotomy(scores, k: int = DICHOTOMY_K) -> Dichotomy:
    """Top-k and bottom-k images by virality; ties go to the smaller image id.

    ``scores`` is a :class:`ScoreTable` or a plain image_id -> virality map.
    """
    v = _viralities(scores)
    if k < 1:
        raise ViralityError("BAD_K", f"k must be positive, got {k}")
    if 2 * k > len(v):
        raise ViralityError("K_TOO_LARGE", f"k={k} needs {2 * k} images, corpus has {len(v)}")
    viral = sorted(v, key=lambda i: (-v[i], i))[:k]
    nonviral = sorted(v, key=lambda i: (v[i], i))[:k]
    if set(viral) & set(nonviral):
        # only possible when all viralities tie across the cut; fall back to a split
        ordered = sorted(v, key=lambda i: (-v[i], i))
        viral, nonviral = ordered[:k], ordered[::-1][:k]
    return Dichotomy(tuple(viral), tuple(nonviral), {i: v[i] for i in (*viral, *nonviral)})


def build_random_mix_pairs(
    scores,
    dichotomy: Dichotomy,
    n_pairs: int = RANDOM_MIX_PAIRS,
    seed: int = 0,
    filter_extremes: bool = True,
) -> PairSet:
    """Extreme images paired with random images from the far side of the median.

    Half of the pairs take a random top-k image and a random image below the
    median virality, the other half a random bottom-k image and a random image
    above the median.  Pairs whose two members both belong to the top-k or
    bottom-k sets are then dropped, so fewer than ``n_pairs`` may survive.
    Pairs whose members tie on virality carry no label and are dropped too.
    """
    v = _viralities(scores)
    median = float(np.median(list(v.values())))
    below = sorted(i for i in v if v[i] < median)
    above = sorted(i for i in v if v[i] > median)
    if not below or not above or not dichotomy.viral or not dichotomy.nonviral:
        raise ViralityError("INSUFFICIENT_POOL", "need images on both sides of the median")

    rng = np.random.default_rng(seed)
    n_first = (n_pairs + 1) // 2
    extremes = dichotomy.extremes
    pairs = []
    for idx in range(n_pairs):
        if idx < n_first:
            anchor = dichotomy.viral[rng.integers(len(dichotomy.viral))]
            partner = below[rng.integers(len(below))]
        else:
            anchor = dichotomy.nonviral[rng.integers(len(dichotomy.nonviral))]
            partner = above[rng.integers(len(above))]
        flip = rng.random()
        if anchor == partner:
            continue
        if filter_extremes and anchor in extremes and partner in extremes:
            continue
        if v[anchor] == v[partner]:
            continue
        a, b = (partner, anchor) if flip < 0.5 else (anchor, partner)
        pairs.append(PairLabel(f"rp{idx:05d}", a, b, 1 if v[a] > v[b] else -1))
    return PairSet(tuple(pairs), Provenance.RANDOM_MIX)


def build_topbottom_pairs(dichotomy: Dichotomy, seed: int = 0) -> PairSet:
    """Match every viral image to one non-viral image under a seeded shuffle."""
    rng = np.random.default_rng(seed)
    partners = [dichotomy.nonviral[i] for i in rng.permutation(dichotomy.k)]
    pairs = []
    for idx, (viral, nonviral) in enumerate(zip(dichotomy.viral, partners)):
        if rng.random() < 0.5:
            pairs.append(PairLabel(f"tb{idx:05d}", viral, nonviral, 1))
        else:
            pairs.append(PairLabel(f"tb{idx:05d}", nonviral, viral, -1))
    return PairSet(tuple(pairs), Provenance.TOPBOTTOM)


def build_category_dataset(
    corpus: Corpus,
    categories: Sequence[str],
    per_category: int = PER_CATEGORY,
    candidates: Iterable[str] | None = None,
) -> dict:
    """For each category, the images most dominated by it.

    An image is eligible for category ``c`` when ``c`` is its best category
    and it has a nonzero second-best score.  Images are ranked by dominance
    ratio (descending, ties by image id).  ``candidates`` restricts the pool,
    e.g. to the top viral images.
    """
    table = dominance_table(corpus, None if candidates is None else sorted(candidates))
    result = {}
    for category in categories:
        eligible = [(ratio, i) for i, (top, ratio) in table.items() if top == category]
        if len(eligible) < per_category:
            raise ViralityError(
                "INSUFFICIENT_IMAGES",
                f"{category!r} has {len(eligible)} eligible images, need {per_category}",
            )
        eligible.sort(key=lambda t: (-t[0], t[1]))
        result[category] = [i for _, i in eligible[:per_category]]
    return result


def category_dataset_csv(dataset: Mapping[str, Sequence[str]], corpus: Corpus) -> str:
    table = dominance_table(corpus, [i for ids in dataset.values() for i in ids])
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["category", "rank", "image_id", "dominance_ratio"])
    for category, ids in dataset.items():
        for rank, image_id in enumerate(ids, start=1):
            w.writerow([category, rank, image_id, f"{table[image_id][1]:.12g}"])
    return out.getvalue()


# --- proxies ---------------------------------------------------------------


class ProxyCondition(enum.Enum):
    VIRAL_NN = "viral_nn"
    NONVIRAL_NN = "nonviral_nn"
    RANDOM = "random"


@dataclass(frozen=True)
class ProxyQuad:
    pair_id: str
    viral_target: str
    nonviral_target: str
    proxy_1: str
    proxy_2: str
    condition: ProxyCondition

    def __post_init__(self):
        ids = {self.viral_target, self.nonviral_target, self.proxy_1, self.proxy_2}
        if len(ids) != 4:
            raise ViralityError("BAD_VALUE", "proxy quad ids must be distinct")


MIN_PROXY_CANDIDATES = 7


def select_proxies(
    features: FeatureSet,
    pair: PairLabel,
    condition: ProxyCondition | str,
    seed: int = 0,
    ranks: tuple[int, int] = PROXY_NEIGHBOR_RANKS,
) -> ProxyQuad:
    """Pick two proxy images to show next to a 2AFC pair.

    For the nearest-neighbour conditions the proxies are the 4th and 6th
    closest images (Euclidean, ties by image id) to the viral or non-viral
    target; the very closest ones are skipped to avoid near duplicates.
    """
    condition = ProxyCondition(condition)
    viral, nonviral = (pair.image_a, pair.image_b) if pair.label == 1 else (pair.image_b, pair.image_a)
    for target in (viral, nonviral):
        features[target]  # raises MISSING_FEATURES
    candidates = [i for i in features.ids if i not in (viral, nonviral)]
    if len(candidates) < MIN_PROXY_CANDIDATES:
        raise ViralityError(
            "TOO_FEW_CANDIDATES", f"{len(candidates)} candidates, need {MIN_PROXY_CANDIDATES}"
        )
    if condition is ProxyCondition.RANDOM:
        rng = np.random.default_rng(seed)
        first, second = rng.choice(len(candidates), size=2, replace=False)
        p1, p2 = candidates[first], candidates[second]
    else:
        target = viral if condition is ProxyCondition.VIRAL_NN else nonviral
        ordered = nearest_neighbors(features, target, exclude=(viral, nonviral))
        p1, p2 = ordered[ranks[0] - 1], ordered[ranks[1] - 1]
    return ProxyQuad(pair.pair_id, viral, nonviral, p1, p2, condition)


def nearest_neighbors(features: FeatureSet, target: str, exclude: Iterable[str] = ()) -> list:
    """All other image ids sorted by Euclidean distance to ``target``, ties by id."""
    skip = set(exclude) | {target}
    idx = [k for k, i in enumerate(features.ids) if i not in skip]
    diffs = features.matrix[idx] - features[target]
    dist = np.sqrt(np.einsum("ij,ij->i", diffs, diffs))
    ids = [features.ids[k] for k in idx]
    order = sorted(range(len(ids)), key=lambda j: (dist[j], ids[j]))
    return [ids[j] for j in order]


def proxies_csv(quads: Iterable[ProxyQuad]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["pair_id", "condition", "viral_target", "nonviral_target", "proxy_1", "proxy_2"])
    for q in quads:
        w.writerow(
            [q.pair_id, q.condition.value, q.viral_target, q.nonviral_target, q.proxy_1, q.proxy_2]
        )
    return out.getvalue()


# --- synthetic corpora -------------------------------------------------------


@dataclass
class SynthConfig:
    """Generator settings; see :func:`load_synth_config` for the file format.

    ``resub_dist`` is ``fixed:<n>``, ``poisson:<mean>`` or ``geometric:<mean>``
    (extra submissions beyond the first, mean scaled by each image's latent
    viralness).  ``score_dist`` is ``lognormal:<mu>,<sigma>`` or
    ``uniform:<lo>,<hi>`` for upvotes.
    """

    n_images: int = 100
    n_categories: int = 3
    resub_dist: str = "poisson:4"
    score_dist: str = "lognormal:3,1"
    seed: int = 0
    n_hours: int = 48
    n_planted_viral: int = 0
    n_planted_popular: int = 0
    n_attributes: int = 6
    feature_dim: int = 8

    def __post_init__(self):
        for name in ("n_images", "n_categories", "n_hours"):
            if getattr(self, name) < 1:
                raise ViralityError("BAD_SPEC", f"{name} must be >= 1")
        for name in ("n_planted_viral", "n_planted_popular", "n_attributes"):
            if getattr(self, name) < 0:
                raise ViralityError("BAD_SPEC", f"{name} must be >= 0")
        if self.feature_dim < 1:
            raise ViralityError("BAD_SPEC", "feature_dim must be >= 1")
        _parse_dist(self.resub_dist, ("fixed", "poisson", "geometric"))
        _parse_dist(self.score_dist, ("lognormal", "uniform"))


def _parse_dist(text, kinds):
    kind, _, params = text.partition(":")
    kind = kind.strip()
    if kind not in kinds:
        raise ViralityError("BAD_SPEC", f"distribution {text!r}; expected one of {kinds}")
    try:
        values = [float(p) for p in params.split(",") if p.strip()]
    except ValueError:
        raise ViralityError("BAD_SPEC", f"bad parameters in {text!r}") from None
    expected = {"fixed": 1, "poisson": 1, "geometric": 1, "lognormal": 2, "uniform": 2}[kind]
    if len(values) != expected or (kind != "lognormal" and min(values) < 0):
        raise ViralityError("BAD_SPEC", f"bad parameters in {text!r}")
    return kind, values


def parse_key_values(text: str) -> dict:
    """``key = value`` / ``key: value`` lines; ``#`` starts a comment."""
    out = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        cuts = [i for i in (line.find("="), line.find(":")) if i > 0]
        if not cuts:
            raise ViralityError("BAD_SPEC", f"line {line_no}: expected key = value")
        key, value = line[: min(cuts)], line[min(cuts) + 1:]
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def load_synth_config(path) -> SynthConfig:
    """Read a key-value generator config file::

        n_images = 200
        n_categories = 4
        resub_dist = poisson:4
        score_dist = lognormal:3,1
        seed = 7
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ViralityError("IO_FAILURE", f"{path}: {exc.strerror}") from exc
    return synth_config_from_text(text)


def synth_config_from_text(text: str) -> SynthConfig:
    kv = parse_key_values(text)
    types = {f: t for f, t in SynthConfig.__annotations__.items()}
    kwargs = {}
    for key, value in kv.items():
        if key not in types:
            raise ViralityError("BAD_SPEC", f"unknown key {key!r}")
        if types[key] == "int":
            try:
                kwargs[key] = int(value)
            except ValueError:
                raise ViralityError("BAD_SPEC", f"{key} must be an integer") from None
        else:
            kwargs[key] = value
    return SynthConfig(**kwargs)


@dataclass(frozen=True)
class TruthRow:
    image_id: str
    group: str
    viralness: float
    attributes: tuple[float, ...]


@dataclass
class SynthTruth:
    """Latent generator state: per-image viralness and attribute strengths."""

    rows: dict
    attribute_names: tuple[str, ...]
    attribute_weights: tuple[float, ...]

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["image_id", "group", "viralness", *self.attribute_names])
        for image_id in sorted(self.rows):
            r = self.rows[image_id]
            w.writerow([image_id, r.group, repr(r.viralness), *(repr(a) for a in r.attributes)])
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str, attribute_weights=None) -> "SynthTruth":
        rows = list(csv.reader(io.StringIO(text)))
        header = rows[0]
        if header[:3] != ["image_id", "group", "viralness"]:
            raise ViralityError("BAD_HEADER", "truth.csv header mismatch")
        names = tuple(header[3:])
        table = {}
        for r in rows[1:]:
            if r:
                table[r[0]] = TruthRow(r[0], r[1], float(r[2]), tuple(float(x) for x in r[3:]))
        weights = tuple(attribute_weights) if attribute_weights else _attribute_weights(len(names))
        return cls(table, names, weights)


def _attribute_weights(n):
    # alternating strong positive / negative / neutral links to viralness
    pattern = (1.0, -0.8, 0.6, 0.0, -0.4, 0.2)
    return tuple(pattern[j % len(pattern)] for j in range(n))


def generate_synthetic_corpus(config: SynthConfig, seed: int | None = None):
    """Seeded synthetic submissions plus the latent table that produced them.

    Each base image draws a latent viralness ``u`` in [0, 1]; its number of
    extra resubmissions has mean ``2u`` times the configured mean and its
    upvotes are scaled by ``0.5 + u``.  Planted groups are appended:
    ``planted_viral`` images get many resubmissions with moderate upvotes,
    ``planted_popular`` images a single submission with very high upvotes.

    Returns ``(submissions, truth)``.
    """
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    resub_kind, resub_params = _parse_dist(config.resub_dist, ("fixed", "poisson", "geometric"))
    score_kind, score_params = _parse_dist(config.score_dist, ("lognormal", "uniform"))
    categories = [f"cat{c:02d}" for c in range(config.n_categories)]
    n_slots = config.n_categories * config.n_hours
    weights = _attribute_weights(config.n_attributes)
    names = tuple(f"attr{j:02d}" for j in range(config.n_attributes))

    def upvotes(scale, size):
        if score_kind == "lognormal":
            base = np.exp(rng.normal(score_params[0], score_params[1], size))
        else:
            base = rng.uniform(score_params[0], score_params[1], size)
        return np.maximum(0, np.rint(base * scale)).astype(int)

    def extra_resubs(u):
        mean = resub_params[0]
        if resub_kind == "fixed":
            return int(mean) - 1
        mean_u = mean * 2.0 * u
        if resub_kind == "poisson":
            return int(rng.poisson(mean_u))
        if mean_u <= 0:
            return 0
        return int(rng.geometric(1.0 / (1.0 + mean_u))) - 1

    total = config.n_images + config.n_planted_viral + config.n_planted_popular
    width = max(4, len(str(total)))
    submissions, truth = [], {}
    for idx in range(total):
        image_id = f"img{idx:0{width}d}"
        if idx < config.n_images:
            group, u = "base", float(rng.uniform())
            m, scale = 1 + max(0, extra_resubs(u)), 0.5 + u
        elif idx < config.n_images + config.n_planted_viral:
            group, u = "planted_viral", float(rng.uniform(0.9, 1.0))
            m, scale = int(max(6, round(4 * resub_params[0])) + rng.integers(0, 3)), 1.0
        else:
            group, u = "planted_popular", float(rng.uniform(0.0, 0.1))
            m, scale = 1, 20.0
        m = min(m, n_slots)
        ups = upvotes(scale, m)
        slots = rng.choice(n_slots, size=m, replace=False)
        downs = np.rint(ups * rng.uniform(0.0, 0.3, m)).astype(int)
        for slot, up, down in zip(slots, ups, downs):
            submissions.append(
                Submission(
                    image_id,
                    categories[int(slot) % config.n_categories],
                    int(slot) // config.n_categories,
                    int(up),
                    int(down),
                )
            )
        attrs = tuple(
            float(w * (2 * u - 1) + rng.normal(0, 0.5)) for w in weights
        )
        truth[image_id] = TruthRow(image_id, group, u, attrs)
    return submissions, SynthTruth(truth, names, weights)


def synthetic_features(truth: SynthTruth, dim: int, seed: int = 0) -> FeatureSet:
    """Feature vectors linearly tied to each image's latent attributes, plus noise."""
    rng = np.random.default_rng(seed)
    ids = sorted(truth.rows)
    latent = np.array(
        [[truth.rows[i].viralness, *truth.rows[i].attributes] for i in ids], dtype=float
    ).reshape(len(ids), 1 + len(truth.attribute_names))
    mixing = rng.normal(0, 1, (latent.shape[1], dim))
    x = latent @ mixing + rng.normal(0, 0.3, (len(ids), dim))
    return FeatureSet.from_array(ids, x)


def synthetic_annotations(
    truth: SynthTruth,
    pairs: Iterable[PairLabel],
    n_workers: int = 5,
    neutral_band: float = 0.3,
    noise: float = 0.3,
    seed: int = 0,
):
    """Simulated workers labelling which image of each pair shows more of each attribute.

    A worker sees the latent difference plus Gaussian noise and answers 0
    when it falls inside ``neutral_band``.
    """
    rng = np.random.default_rng(seed)
    out = []
    for pair in pairs:
        a, b = truth.rows[pair.image_a], truth.rows[pair.image_b]
        for j, name in enumerate(truth.attribute_names):
            diff = a.attributes[j] - b.attributes[j]
            for w in range(n_workers):
                seen = diff + rng.normal(0, noise)
                label = 0 if abs(seen) < neutral_band else (1 if seen > 0 else -1)
                out.append(AttributeAnnotation(pair.pair_id, name, f"w{w:02d}", label))
    return out
