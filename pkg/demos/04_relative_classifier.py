"""Pairwise virality classifiers: raw features, then predicted relative attributes."""

import numpy as np

from imgvirality.attributes import aggregate_annotations
from imgvirality.datasets import (
    SynthConfig,
    build_dichotomy,
    build_topbottom_pairs,
    generate_synthetic_corpus,
    synthetic_annotations,
    synthetic_features,
)
from imgvirality.learn import (
    TrainConfig,
    cross_validate,
    make_cv_plan,
    pair_matrix,
    train_attribute_virality,
    train_pairwise,
    train_relative_attribute,
)
from imgvirality.model import validate_corpus
from imgvirality.scoring import score_table

config = SynthConfig(n_images=400, resub_dist="poisson:2", n_attributes=6, feature_dim=12, seed=11)
subs, truth = generate_synthetic_corpus(config)
features = synthetic_features(truth, config.feature_dim, seed=11)
pairs = list(build_topbottom_pairs(build_dichotomy(score_table(validate_corpus(subs, 1)), 80), seed=0))

# x_a - x_b with a bias-free linear model: swapping the pair flips the answer.
X, y = pair_matrix(features, pairs)
model = train_pairwise(X, y)
print("antisymmetric:", np.array_equal(model.decision_function(-X), -model.decision_function(X)))

plan = make_cv_plan(len(pairs), 10, seed=0)
report = cross_validate(X, y, plan, TrainConfig(), pairwise=True, task="features")
print(f"features -> virality, 10-fold accuracy {report.accuracy:.3f}")

# Shuffled labels should sit at chance.
shuffled = np.random.default_rng(0).permutation(y)
print(f"shuffled labels: {cross_validate(X, shuffled, plan, pairwise=True).accuracy:.3f}")

# Two stages: predict each relative attribute out of fold, then virality from
# those predictions.
annotations = synthetic_annotations(truth, pairs, n_workers=5, seed=1)
matrix = aggregate_annotations(annotations, pairs)
predicted = []
for name in matrix.attributes[:5]:
    r = train_relative_attribute(features, pairs, matrix, name, plan)
    n, two_class = r.extra["two_class"]
    print(f"  {name}: 3-class {r.accuracy:.3f}   +/- only {two_class:.3f} (n={n})")
    predicted.append(r.predictions)
stacked = train_attribute_virality(np.stack(predicted, axis=1), matrix.labels, plan)
print(f"predicted attributes -> virality: {stacked.accuracy:.3f}")
