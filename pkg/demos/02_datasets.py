"""From scores to the viral/non-viral dichotomy and its two pair sets."""

from collections import Counter

from imgvirality import validate_corpus
from imgvirality.datasets import (
    SynthConfig,
    build_category_dataset,
    build_dichotomy,
    build_random_mix_pairs,
    build_topbottom_pairs,
    generate_synthetic_corpus,
)
from imgvirality.scoring import score_table

subs, truth = generate_synthetic_corpus(SynthConfig(n_images=400, n_categories=5, resub_dist="poisson:2", seed=3))
corpus = validate_corpus(subs, 1)
table = score_table(corpus)
print(f"{len(table)} images scored")

# The full study uses k=250; a 400-image corpus takes k=40.
dichotomy = build_dichotomy(table, k=40)
print("most viral:", dichotomy.viral[:5])
print("least viral:", dichotomy.nonviral[:5])

# Top/bottom pairs: each viral image against one non-viral image.
tb = build_topbottom_pairs(dichotomy, seed=0)
print(f"top/bottom pairs: {len(tb)}, labels {Counter(p.label for p in tb)}")

# Random-mix pairs are harder: an extreme image against a random image from
# the other side of the median.  Pairs made of two extremes are dropped.
rm = build_random_mix_pairs(table, dichotomy, n_pairs=100, seed=0)
print(f"random-mix pairs kept: {len(rm)} of 100")
gaps = sorted(abs(table.virality(p.image_a) - table.virality(p.image_b)) for p in rm)
print(f"median virality gap: {gaps[len(gaps) // 2]:.2f} (top/bottom: "
      f"{sorted(abs(table.virality(p.image_a) - table.virality(p.image_b)) for p in tb)[len(tb) // 2]:.2f})")

# Images dominated by a single category, ranked by dominance ratio
dataset = build_category_dataset(corpus, sorted(corpus.categories), per_category=5)
for category, ids in dataset.items():
    print(category, ids)
