"""Bundled test corpora and brute-force oracles.

Layout::

    fixtures/data/submissions_12.jsonl   12 submissions, 4 images, 2 categories
    fixtures/golden/scores_12.csv        oracle virality for that corpus

Regenerate golden files explicitly with ``python -m imgvirality.fixtures regenerate``.
"""

from importlib import resources
from pathlib import Path

DATA = "data"
GOLDEN = "golden"


def path(kind: str, name: str) -> Path:
    return Path(str(resources.files(__name__).joinpath(kind, name)))


def submissions_12() -> Path:
    return path(DATA, "submissions_12.jsonl")


def golden_scores_12() -> Path:
    return path(GOLDEN, "scores_12.csv")
