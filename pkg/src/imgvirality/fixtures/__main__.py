"""``python -m imgvirality.fixtures regenerate`` rewrites the golden files."""

import sys

from ..ingest import parse_submissions
from . import golden_scores_12, submissions_12
from .oracles import oracle_virality


def regenerate():
    with open(submissions_12(), "rb") as fh:
        subs, _ = parse_submissions(fh)
    values = oracle_virality(subs)
    lines = ["image_id,virality"]
    lines += [f"{h},{values[h]!r}" for h in sorted(values)]
    golden_scores_12().write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {golden_scores_12()}")


if __name__ == "__main__":
    if sys.argv[1:] != ["regenerate"]:
        sys.exit("usage: python -m imgvirality.fixtures regenerate")
    regenerate()
