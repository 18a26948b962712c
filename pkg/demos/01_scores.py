"""Virality versus popularity on the bundled 12-submission corpus and a synthetic one."""

import numpy as np

from imgvirality import popularity_score, resubmission_score, validate_corpus, virality_score
from imgvirality.datasets import SynthConfig, generate_synthetic_corpus
from imgvirality.fixtures import submissions_12
from imgvirality.ingest import parse_submissions, read_path
from imgvirality.scoring import category_scores, normalized_scores

# Four images, two categories.  The threshold of 100 submissions per category
# is meant for a full crawl, so drop it to 1 here.
subs, report = read_path(submissions_12(), parse_submissions)
corpus = validate_corpus(subs, min_category_submissions=1)
print(f"{report.accepted} submissions, offset {corpus.score_offset}, m_bar {corpus.m_bar}")

for image_id in corpus.images:
    a = np.round(normalized_scores(corpus, image_id), 3)
    print(f"{image_id:>7}  m={resubmission_score(corpus, image_id)}  A={a}  "
          f"popularity={popularity_score(corpus, image_id):.3f}  "
          f"virality={virality_score(corpus, image_id):+.3f}")

# higgs has the single best submission but was only posted once, so its
# log factor is negative: popular, not viral.

# Per-category scores for an image posted to both categories
for s in category_scores(corpus, "grumpy"):
    print(f"grumpy in {s.category}: v={s.v_ck:.2f}  percentile={s.log_percentile:.1f}  "
          f"dominance={s.dominance_ratio:.2f}")

# A synthetic corpus with one population reposted many times and another
# with a single, very strong submission.
config = SynthConfig(n_images=160, resub_dist="poisson:0.5", n_planted_viral=20, n_planted_popular=20, seed=0)
subs, truth = generate_synthetic_corpus(config)
corpus = validate_corpus(subs, 1)
ids = list(corpus.images)
v = np.array([virality_score(corpus, i) for i in ids])
p = np.array([popularity_score(corpus, i) for i in ids])
groups = np.array([truth.rows[i].group for i in ids])

for name in ("base", "planted_viral", "planted_popular"):
    mask = groups == name
    print(f"{name:>16}: mean popularity {p[mask].mean():6.2f}   mean virality {v[mask].mean():+6.2f}")

print("rank correlation of popularity and virality:",
      round(float(np.corrcoef(p.argsort().argsort(), v.argsort().argsort())[0, 1]), 3))
