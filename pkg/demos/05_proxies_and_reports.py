"""Proxy images for a 2AFC study, simulated judgments, and a comparison table."""

import numpy as np

from imgvirality.datasets import (
    ProxyCondition,
    SynthConfig,
    build_dichotomy,
    build_topbottom_pairs,
    generate_synthetic_corpus,
    select_proxies,
    synthetic_features,
)
from imgvirality.evaluation import (
    compare_report,
    comparison_text,
    confusion,
    evaluate,
    majority_vote,
)
from imgvirality.model import validate_corpus
from imgvirality.scoring import score_table

config = SynthConfig(n_images=200, resub_dist="poisson:2", seed=2)
subs, truth = generate_synthetic_corpus(config)
features = synthetic_features(truth, 8, seed=2)
pairs = list(build_topbottom_pairs(build_dichotomy(score_table(validate_corpus(subs, 1)), 30), seed=0))

# Each pair is shown with two extra images: the 4th and 6th nearest
# neighbours of one target, or two random images.
pair = pairs[0]
for condition in ProxyCondition:
    q = select_proxies(features, pair, condition, seed=0)
    print(f"{condition.value:>12}: targets {q.viral_target}/{q.nonviral_target}  proxies {q.proxy_1}, {q.proxy_2}")

# Simulated workers: they pick the more viral image with a probability that
# grows with the latent gap, 20 workers per pair, majority vote.
rng = np.random.default_rng(0)
truth_labels, votes_by_pair, conditions = [], [], []
for k, p in enumerate(pairs):
    gap = truth.rows[p.image_a].viralness - truth.rows[p.image_b].viralness
    prob_a = 1 / (1 + np.exp(-4 * gap))
    votes = np.where(rng.random(20) < prob_a, 1, -1)
    votes_by_pair.append(majority_vote(votes.tolist()))
    truth_labels.append(p.label)
    conditions.append(list(ProxyCondition)[k % 3].value)

human = evaluate(votes_by_pair, truth_labels, conditions=conditions)
print(f"\nsimulated majority vote: accuracy {human.accuracy:.3f}, hit rate {human.hit_rate:.3f}")
print("by proxy condition:", {c: round(a, 3) for c, a in human.by_condition.items()})

chance = evaluate(rng.choice([-1, 1], len(pairs)), truth_labels)
rows = compare_report([("simulated workers", "top/bottom", human), ("coin flip", "top/bottom", chance)])
print()
print(comparison_text(rows), end="")

cm = confusion(votes_by_pair, truth_labels, [1, -1])
print("\nconfusion (rows = truth):")
print(cm.to_csv(), end="")
