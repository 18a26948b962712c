"""Which relative attributes track virality, and which combination tracks it best."""

import warnings

from imgvirality.attributes import (
    ComboMode,
    CoverageWarning,
    aggregate_annotations,
    attribute_correlations,
    combo_accuracy,
    greedy_select,
)
from imgvirality.datasets import (
    SynthConfig,
    build_dichotomy,
    build_topbottom_pairs,
    generate_synthetic_corpus,
    synthetic_annotations,
)
from imgvirality.model import SignedAttribute, validate_corpus
from imgvirality.scoring import score_table

config = SynthConfig(n_images=300, resub_dist="poisson:2", n_attributes=6, seed=5)
subs, truth = generate_synthetic_corpus(config)
table = score_table(validate_corpus(subs, 1))
pairs = build_topbottom_pairs(build_dichotomy(table, 60), seed=0)

# Simulated workers answer "which image shows more of X" for every pair.
annotations = synthetic_annotations(truth, pairs, n_workers=5, seed=0)
with warnings.catch_warnings():
    warnings.simplefilter("ignore", CoverageWarning)
    matrix = aggregate_annotations(annotations, pairs)
print(f"{matrix.n_pairs} pairs x {len(matrix.attributes)} attributes")

print("\ngenerator weights:", dict(zip(truth.attribute_names, truth.attribute_weights)))
for name, r, constant in sorted(attribute_correlations(matrix), key=lambda t: -abs(t[1])):
    print(f"  {name}: r = {r:+.3f}{'  (constant)' if constant else ''}")

# Greedy growth, trying each attribute as itself and negated.
for mode in ComboMode:
    trace = greedy_select(matrix, max_size=4, mode=mode, exclusions=())
    path = " -> ".join(str(s.signed) for s in trace.steps)
    print(f"\n{mode.value}: {path}")
    print("  correlations:", [round(r, 3) for r in trace.correlations])
    print(f"  accuracy of the combo as a predictor: {combo_accuracy(trace.combo, matrix):.3f}")

# Priming with a weak attribute: does the path recover?
primed = greedy_select(matrix, 4, seed_attribute=SignedAttribute("attr03"), exclusions=())
print("\nprimed with +attr03:", [(str(s.signed), round(s.correlation, 3)) for s in primed.steps])
