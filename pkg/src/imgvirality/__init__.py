"""Image virality from submission metadata.

Scores (virality, popularity, category dominance), derived datasets,
relative-attribute analysis and linear pairwise classifiers.
"""

from .errors import InvariantViolation, ViralityError
from .model import (
    AttributeAnnotation,
    Corpus,
    Direction,
    FeatureSet,
    FeatureVector,
    ImageRecord,
    PairLabel,
    SignedAttribute,
    Submission,
    validate_corpus,
)
from .scoring import (
    category_scores,
    hour_baseline,
    normalized_score,
    percentile_rank,
    popularity_score,
    resubmission_score,
    score_table,
    virality_score,
)

__version__ = "0.1.0"
