"""Small builders shared by the unit tests."""

from imgvirality.model import Submission, validate_corpus


def sub(image_id, category="funny", hour=0, ups=10, downs=0):
    return Submission(image_id, category, hour, ups, downs)


def corpus_of(*submissions, threshold=1):
    return validate_corpus(submissions, threshold)
