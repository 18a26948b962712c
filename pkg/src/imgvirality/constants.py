"""Documented defaults taken from the original Reddit study.

These are the values the library falls back to when a caller does not
override them.  Desk-scale fixtures usually pass smaller numbers.
"""

# Dataset construction
MIN_CATEGORY_SUBMISSIONS = 100
DICHOTOMY_K = 250
RANDOM_MIX_PAIRS = 500
PER_CATEGORY = 85
VIRAL_CATEGORIES = ("funny", "WTF", "aww", "atheism", "gaming")
PROXY_NEIGHBOR_RANKS = (4, 6)

# Human studies
WORKERS_PER_TASK = 20

# Learning
CV_FOLDS = 10

# Attributes
TOP5_ATTRIBUTES = ("animal", "synthetically generated", "beautiful", "explicit", "sexual")
EXCLUDED_ATTRIBUTES = frozenset({"likely to go viral", "memorable"})
# greedy (+) trajectory from the study, as (attribute, direction) with +1 = itself, -1 = negation
REFERENCE_TOP5_COMBO = (
    ("synthetically generated", +1),
    ("animal", +1),
    ("beautiful", -1),
    ("explicit", +1),
    ("sexual", -1),
)

# Reference figures reported on the original crawl.  Not reproducible here;
# kept for reports that print a comparison column.
REFERENCE_M_BAR = 6.7
REFERENCE_ACCURACY = {
    "human pairwise (top/bottom)": 0.7176,
    "human annotated atts-38": 0.8129,
    "svm + deep attributes-5": 0.6810,
    "svm decaf6 category": 0.624,
}
