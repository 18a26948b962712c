"""Linear hinge-loss classifiers and k-fold cross-validation.

The trainer is a seeded mini-batch subgradient method on the L2-regularised
hinge loss (Pegasos-style step sizes), run on standardised features.
Pairwise models are trained on difference vectors with no bias and no
centring, so swapping the two images of a pair negates the margin exactly.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .constants import CV_FOLDS
from .errors import ViralityError
from .model import FeatureSet, PairLabel

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    regularization: float = 1e-3
    epochs: int = 60
    seed: int = 0
    batch_size: int = 16
    fit_bias: bool = True
    center: bool = True


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    mean: np.ndarray
    scale: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.weights)

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.dim:
            raise ViralityError("DIMENSION_MISMATCH", f"got {X.shape[1]} features, model has {self.dim}")
        return ((X - self.mean) / self.scale) @ self.weights + self.bias

    def predict(self, X) -> np.ndarray:
        """Labels in {-1, +1}; a zero margin maps to +1."""
        return np.where(self.decision_function(X) >= 0, 1, -1)

    def to_text(self) -> str:
        fmt = lambda a: " ".join(f"{float(x):.12g}" for x in a)  # noqa: E731
        return (
            f"#dim={self.dim} bias={self.bias:.12g}\n"
            f"{fmt(self.weights)}\n{fmt(self.mean)}\n{fmt(self.scale)}\n"
        )

    @classmethod
    def from_text(cls, text: str) -> "LinearModel":
        lines = text.splitlines()
        try:
            head = dict(tok.split("=", 1) for tok in lines[0].lstrip("#").split())
            dim, bias = int(head["dim"]), float(head["bias"])
            rows = [np.array([float(x) for x in line.split()], dtype=float) for line in lines[1:4]]
        except (IndexError, KeyError, ValueError):
            raise ViralityError("BAD_MODEL", "unreadable model file") from None
        if len(rows) != 3 or any(len(r) != dim for r in rows):
            raise ViralityError("BAD_MODEL", "model rows do not match #dim")
        return cls(rows[0], bias, rows[1], rows[2])


def predict(model: LinearModel, x) -> tuple[int, float]:
    """(label, margin) for one feature vector; sign(0) is +1."""
    values = getattr(x, "values", x)
    margin = float(model.decision_function(np.asarray(values, dtype=float))[0])
    return (1 if margin >= 0 else -1), margin


def hinge_objective(w, b, Xs, y, lam) -> float:
    margins = y * (Xs @ w + b)
    return 0.5 * lam * float(w @ w) + float(np.mean(np.maximum(0.0, 1.0 - margins)))


def train_linear(X, y, config: TrainConfig = TrainConfig()) -> LinearModel:
    """Fit an L2-regularised linear hinge-loss classifier.

    ``X`` is ``(n, d)``, ``y`` holds labels in {-1, +1}.  Features are
    standardised with the training mean and standard deviation (mean fixed at
    0 when ``config.center`` is false).  The returned weights are the
    epoch-end iterate with the lowest objective.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ViralityError("DIMENSION_MISMATCH", f"X {X.shape} vs {len(y)} labels")
    if not np.isin(y, (-1.0, 1.0)).all():
        raise ViralityError("BAD_LABEL", "labels must be -1 or +1")
    if len(np.unique(y)) < 2:
        raise ViralityError("ONE_CLASS", "training data holds a single class")
    if not np.isfinite(X).all():
        raise ViralityError("NON_FINITE_VALUE", "non-finite training features")

    n, d = X.shape
    lam = config.regularization
    mean = X.mean(axis=0) if config.center else np.zeros(d)
    scale = np.sqrt(((X - mean) ** 2).mean(axis=0))
    scale = np.where(scale > 0, scale, 1.0)
    Xs = (X - mean) / scale

    rng = np.random.default_rng(config.seed)
    w = np.zeros(d)
    b = 0.0
    radius = 1.0 / math.sqrt(lam)
    best = (hinge_objective(w, b, Xs, y, lam), w.copy(), b)
    history = []
    t = 0
    bs = max(1, min(config.batch_size, n))
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            t += 1
            eta = 1.0 / (lam * (t + 10))
            xb, yb = Xs[idx], y[idx]
            active = yb * (xb @ w + b) < 1.0
            grad_w = lam * w
            if active.any():
                grad_w = grad_w - (yb[active, None] * xb[active]).sum(axis=0) / len(idx)
                if config.fit_bias:
                    b += eta * yb[active].sum() / len(idx)
            w = w - eta * grad_w
            norm = float(np.linalg.norm(w))
            if norm > radius:
                w *= radius / norm
        obj = hinge_objective(w, b, Xs, y, lam)
        history.append(obj)
        if obj < best[0]:
            best = (obj, w.copy(), b)

    obj, w, b = best
    meta = {
        "seed": config.seed,
        "epochs": config.epochs,
        "regularization": lam,
        "objective": obj,
        "history": history,
    }
    return LinearModel(w, float(b), mean, scale, meta)


def train_pairwise(X, y, config: TrainConfig = TrainConfig()) -> LinearModel:
    """Linear model on difference features with an antisymmetric decision rule."""
    cfg = TrainConfig(config.regularization, config.epochs, config.seed, config.batch_size, False, False)
    return train_linear(X, y, cfg)


def pair_features(features: FeatureSet, pair: PairLabel) -> np.ndarray:
    """``x_a - x_b`` for the two images of a pair."""
    return features[pair.image_a] - features[pair.image_b]


def pair_matrix(features: FeatureSet, pairs: Sequence[PairLabel]) -> tuple[np.ndarray, np.ndarray]:
    missing = sorted({i for p in pairs for i in (p.image_a, p.image_b) if i not in features})
    if missing:
        raise ViralityError("MISSING_FEATURES", f"no features for {missing[:5]}")
    X = np.array([pair_features(features, p) for p in pairs], dtype=float).reshape(len(pairs), features.dim)
    y = np.array([p.label for p in pairs], dtype=float)
    return X, y


# --- cross-validation ----------------------------------------------------------


@dataclass(frozen=True)
class CVPlan:
    k: int
    folds: np.ndarray
    seed: int

    def test_index(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.folds == fold)

    def train_index(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.folds != fold)

    def sizes(self) -> list[int]:
        return [int((self.folds == f).sum()) for f in range(self.k)]


def make_cv_plan(n: int, k: int = CV_FOLDS, seed: int = 0) -> CVPlan:
    """Seeded k-fold split; fold sizes differ by at most one."""
    if k < 2 or k > n:
        raise ViralityError("BAD_FOLDS", f"need 2 <= k <= n, got k={k}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.empty(n, dtype=np.int64)
    folds[perm] = np.arange(n) % k
    folds.setflags(write=False)
    return CVPlan(k, folds, seed)


@dataclass
class FoldResult:
    fold: int
    n: int
    accuracy: float
    train_index: np.ndarray = field(repr=False)
    test_index: np.ndarray = field(repr=False)


@dataclass
class CVReport:
    """Out-of-fold predictions and accuracies for one task."""

    task: str
    predictions: np.ndarray
    truth: np.ndarray
    folds: list[FoldResult]
    plan: CVPlan
    margins: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def accuracy(self) -> float:
        return float(np.mean(self.predictions == self.truth))

    @property
    def n(self) -> int:
        return len(self.truth)

    def rows(self):
        for f in self.folds:
            yield (self.task, str(f.fold), f.n, f.accuracy)
        yield (self.task, "all", self.n, self.accuracy)
        for name, (n, acc) in self.extra.items():
            yield (f"{self.task}:{name}", "all", n, acc)


def accuracy_csv(reports: Iterable[CVReport]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["task", "fold", "n", "accuracy"])
    for report in reports:
        for task, fold, n, acc in report.rows():
            w.writerow([task, fold, n, f"{acc:.12g}"])
    return out.getvalue()


def _lacks_class(plan: CVPlan, label_sets) -> bool:
    """True if any training fold sees a single class for any (labels, mask) set."""
    for labels, mask in label_sets:
        for f in range(plan.k):
            tr = plan.train_index(f)
            if len(np.unique(labels[tr][mask[tr]])) < 2:
                return True
    return False


def _plan_with_both_classes(plan: CVPlan, label_sets, max_tries: int = 20) -> CVPlan:
    """Bump the plan seed until every training fold sees both classes.

    When no seed within ``max_tries`` works (a class with a single member,
    say) the original plan is kept and the affected folds predict their
    lone training class.
    """
    n = len(plan.folds)
    candidate = plan
    for _ in range(max_tries):
        if not _lacks_class(candidate, label_sets):
            return candidate
        log.info("fold with a single training class under seed %d; reseeding", candidate.seed)
        candidate = make_cv_plan(n, plan.k, candidate.seed + 1)
    log.warning("some folds train on a single class; they predict that class")
    return plan


def _fit(train, X, y, config):
    """Trained model, or a constant predictor when ``y`` holds one class."""
    classes = np.unique(y)
    if len(classes) == 1:
        label = int(classes[0])
        return lambda Z: np.full(len(Z), float(label))
    return train(X, y, config).decision_function


def _sign(margins):
    return np.where(margins >= 0, 1, -1)


def cross_validate(
    X,
    y,
    plan: CVPlan,
    config: TrainConfig = TrainConfig(),
    pairwise: bool = False,
    task: str = "cv",
) -> CVReport:
    """Out-of-fold predictions from one model per fold."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if len(plan.folds) != len(y):
        raise ViralityError("DIMENSION_MISMATCH", "plan size differs from example count")
    if len(np.unique(y)) < 2:
        raise ViralityError("ONE_CLASS", f"{task}: labels hold a single class")
    plan = _plan_with_both_classes(plan, [(y, np.ones(len(y), bool))])
    train = train_pairwise if pairwise else train_linear
    margins = np.zeros(len(y))
    folds = []
    for f in range(plan.k):
        tr, te = plan.train_index(f), plan.test_index(f)
        margins[te] = _fit(train, X[tr], y[tr], config)(X[te])
        folds.append(FoldResult(f, len(te), float(np.mean(_sign(margins[te]) == y[te])), tr, te))
    return CVReport(task, _sign(margins), y, folds, plan, margins)


def train_relative_attribute(
    features: FeatureSet,
    pairs: Sequence[PairLabel],
    matrix,
    attribute: str,
    plan: CVPlan,
    config: TrainConfig = TrainConfig(),
) -> CVReport:
    """Out-of-fold {-1, 0, +1} predictions of one relative attribute.

    Two linear models per fold: a gate on ``|x_a - x_b|`` deciding neutral vs
    non-neutral, and an antisymmetric sign model on ``x_a - x_b`` trained on
    the non-neutral pairs.  ``report.accuracy`` is the 3-class accuracy;
    ``report.extra["two_class"]`` holds the sign model's accuracy on the
    truly non-neutral pairs.
    """
    by_id = {p.pair_id: p for p in pairs}
    try:
        ordered = [by_id[pid] for pid in matrix.pair_ids]
    except KeyError as exc:
        raise ViralityError("UNKNOWN_PAIR", f"pair {exc.args[0]!r} missing") from None
    D, _ = pair_matrix(features, ordered)
    G = np.abs(D)
    target = matrix.column(attribute).astype(int)
    nonzero = target != 0
    gate_y = np.where(nonzero, 1, -1)
    if len(np.unique(target[nonzero])) < 2:
        raise ViralityError("ONE_CLASS", f"{attribute!r} has a single non-neutral direction")
    sets = [(target, nonzero)]
    if len(np.unique(gate_y)) == 2:
        sets.append((gate_y, np.ones(len(target), bool)))
    plan = _plan_with_both_classes(plan, sets)

    pred = np.zeros(len(target), dtype=int)
    sign_pred = np.zeros(len(target), dtype=int)
    folds = []
    for f in range(plan.k):
        tr, te = plan.train_index(f), plan.test_index(f)
        tr_nz = tr[nonzero[tr]]
        sign_pred[te] = _sign(_fit(train_pairwise, D[tr_nz], target[tr_nz], config)(D[te]))
        gate = _sign(_fit(train_linear, G[tr], gate_y[tr], config)(G[te]))
        pred[te] = np.where(gate > 0, sign_pred[te], 0)
        folds.append(FoldResult(f, len(te), float(np.mean(pred[te] == target[te])), tr, te))
    two_class = float(np.mean(sign_pred[nonzero] == target[nonzero]))
    return CVReport(
        f"attribute:{attribute}",
        pred,
        target,
        folds,
        plan,
        extra={"two_class": (int(nonzero.sum()), two_class)},
    )


def train_attribute_virality(
    attribute_predictions,
    labels,
    plan: CVPlan,
    config: TrainConfig = TrainConfig(),
) -> CVReport:
    """Pairwise virality from per-pair signed attribute predictions.

    ``attribute_predictions`` is ``(n_pairs, n_attributes)`` with entries in
    {-1, 0, +1}; the model is antisymmetric like any pairwise model.
    """
    A = np.asarray(attribute_predictions, dtype=float)
    return cross_validate(A, labels, plan, config, pairwise=True, task="attribute_virality")
