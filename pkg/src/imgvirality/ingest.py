"""Readers and writers for the on-disk carrier formats.

Malformed rows are skipped and counted in an :class:`IngestReport` rather
than aborting the read.  Pass ``strict=True`` to raise on the first bad row
instead.

Formats::

    submissions.jsonl   {"image_id", "category", "hour_bucket", "ups", "downs"} per line
    submissions.csv     image_id,category,hour_bucket,ups,downs
    pairs.csv           pair_id,image_a,image_b,label
    annotations.csv     pair_id,attribute,worker_id,label
    features.csv        "#dim=<N>" then image_id,v1,...,vN
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import ViralityError
from .model import AttributeAnnotation, FeatureVector, PairLabel, Submission

SUBMISSION_FIELDS = ("image_id", "category", "hour_bucket", "ups", "downs")
PAIR_FIELDS = ("pair_id", "image_a", "image_b", "label")
ANNOTATION_FIELDS = ("pair_id", "attribute", "worker_id", "label")
FORMATS = ("jsonl", "csv")


@dataclass
class IngestReport:
    records_read: int = 0
    records_rejected: int = 0
    rejection_reasons: Counter = field(default_factory=Counter)
    rejected_lines: list = field(default_factory=list)

    @property
    def accepted(self) -> int:
        return self.records_read - self.records_rejected

    def reject(self, line_no, reason):
        self.records_rejected += 1
        self.rejection_reasons[reason] += 1
        self.rejected_lines.append((line_no, reason))


class _RowError(Exception):
    def __init__(self, reason, detail=""):
        self.reason = reason
        self.detail = detail


def _lines(stream) -> Iterator[tuple[int, str]]:
    """Yield (1-based line number, text without line ending) for non-blank lines."""
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)
    elif isinstance(stream, str):
        stream = io.StringIO(stream)
    for i, line in enumerate(stream, start=1):
        if isinstance(line, (bytes, bytearray)):
            try:
                line = line.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise ViralityError("IO_FAILURE", f"line {i} is not UTF-8") from exc
        line = line.rstrip("\r\n")
        if i == 1:
            line = line.lstrip("﻿")
        if line.strip():
            yield i, line


def _csv_rows(stream, header: tuple[str, ...] | None):
    """Yield (line number, fields); an optional leading header row is skipped."""
    first = True
    for i, line in _lines(stream):
        row = next(csv.reader([line]))
        row = [c.strip() for c in row]
        if first and header is not None and tuple(row) == header:
            first = False
            continue
        first = False
        yield i, row


def _int(text, name) -> int:
    if isinstance(text, bool):
        raise _RowError("BAD_NUMBER", f"{name}={text!r}")
    if isinstance(text, int):
        return text
    if isinstance(text, str):
        try:
            return int(text.strip(), 10)
        except ValueError:
            pass
    raise _RowError("BAD_NUMBER", f"{name}={text!r}")


def _parse(stream, row_iter, build, strict):
    items, report = [], IngestReport()
    for line_no, payload in row_iter(stream):
        report.records_read += 1
        try:
            items.append(build(payload))
        except _RowError as err:
            if strict:
                raise ViralityError(err.reason, f"line {line_no}: {err.detail}") from None
            report.reject(line_no, err.reason)
        except ViralityError as err:
            if strict:
                raise ViralityError(err.code, f"line {line_no}: {err.message}") from None
            report.reject(line_no, err.code)
    return items, report


def _submission_from_json(line: str) -> Submission:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError:
        raise _RowError("BAD_JSON", line[:60]) from None
    if not isinstance(obj, dict) or set(obj) != set(SUBMISSION_FIELDS):
        raise _RowError("BAD_FIELDS", line[:60])
    image_id, category = obj["image_id"], obj["category"]
    if not isinstance(image_id, str) or not isinstance(category, str):
        raise _RowError("BAD_FIELDS", "image_id and category must be strings")
    return Submission(
        image_id,
        category,
        _int(obj["hour_bucket"], "hour_bucket"),
        _int(obj["ups"], "ups"),
        _int(obj["downs"], "downs"),
    )


def _submission_from_row(row) -> Submission:
    if len(row) != len(SUBMISSION_FIELDS):
        raise _RowError("BAD_ARITY", f"{len(row)} fields")
    image_id, category, hour, ups, downs = row
    return Submission(
        image_id, category, _int(hour, "hour_bucket"), _int(ups, "ups"), _int(downs, "downs")
    )


def parse_submissions(stream, format: str = "jsonl", strict: bool = False):
    """Parse submissions from a text/byte stream.

    Returns ``(submissions, report)``.
    """
    if format == "jsonl":
        return _parse(stream, _lines, _submission_from_json, strict)
    if format == "csv":
        rows = lambda s: _csv_rows(s, SUBMISSION_FIELDS)  # noqa: E731
        return _parse(stream, rows, _submission_from_row, strict)
    raise ViralityError("UNSUPPORTED_FORMAT", f"unknown submission format {format!r}")


def _label(text, allowed):
    try:
        value = _int(text, "label")
    except _RowError:
        raise _RowError("BAD_LABEL", f"label={text!r}") from None
    if value not in allowed:
        raise _RowError("BAD_LABEL", f"label={text!r}")
    return value


def _pair_from_row(row) -> PairLabel:
    if len(row) != 4:
        raise _RowError("BAD_ARITY", f"{len(row)} fields")
    pair_id, a, b, label = row
    if not pair_id or not a or not b:
        raise _RowError("BAD_VALUE", "empty id")
    return PairLabel(pair_id, a, b, _label(label, (-1, 1)))


def parse_pairs(stream, strict: bool = False):
    """Parse ``pairs.csv``.  Returns ``(pairs, report)``."""
    return _parse(stream, lambda s: _csv_rows(s, PAIR_FIELDS), _pair_from_row, strict)


def _annotation_from_row(row) -> AttributeAnnotation:
    if len(row) != 4:
        raise _RowError("BAD_ARITY", f"{len(row)} fields")
    pair_id, attribute, worker, label = row
    if not pair_id or not attribute:
        raise _RowError("BAD_VALUE", "empty id")
    return AttributeAnnotation(pair_id, attribute, worker, _label(label, (-1, 0, 1)))


def parse_annotations(stream, strict: bool = False):
    """Parse ``annotations.csv``.  Returns ``(annotations, report)``."""
    rows = lambda s: _csv_rows(s, ANNOTATION_FIELDS)  # noqa: E731
    return _parse(stream, rows, _annotation_from_row, strict)


def parse_features(stream, strict: bool = False):
    """Parse ``features.csv``; the first non-blank line must be ``#dim=<N>``.

    Rows with the wrong arity are rejected as ``DIMENSION_MISMATCH``, rows
    holding NaN/inf as ``NON_FINITE_VALUE``.  Returns ``(vectors, report)``.
    """
    lines = _lines(stream)
    try:
        _, head = next(lines)
    except StopIteration:
        raise ViralityError("BAD_HEADER", "empty feature file") from None
    head = head.strip()
    if not head.startswith("#dim="):
        raise ViralityError("BAD_HEADER", f"expected '#dim=<N>', got {head[:40]!r}")
    try:
        dim = int(head[len("#dim="):])
    except ValueError:
        raise ViralityError("BAD_HEADER", head) from None
    if dim < 1:
        raise ViralityError("BAD_HEADER", head)

    seen = set()

    def build(line):
        row = [c.strip() for c in line.split(",")]
        image_id, raw = row[0], row[1:]
        if not image_id:
            raise _RowError("BAD_VALUE", "empty image id")
        if len(raw) != dim:
            raise _RowError("DIMENSION_MISMATCH", f"{len(raw)} values, expected {dim}")
        try:
            values = [float(v) for v in raw]
        except ValueError:
            raise _RowError("BAD_NUMBER", line[:60]) from None
        if not all(math.isfinite(v) for v in values):
            raise _RowError("NON_FINITE_VALUE", image_id)
        if image_id in seen:
            raise _RowError("DUPLICATE_ID", image_id)
        seen.add(image_id)
        return FeatureVector(image_id, values)

    return _parse(lines, lambda it: it, build, strict)


# --- writers --------------------------------------------------------------


def format_submissions(submissions: Iterable[Submission], format: str = "jsonl") -> str:
    out = io.StringIO()
    if format == "jsonl":
        for s in submissions:
            obj = {f: getattr(s, f) for f in SUBMISSION_FIELDS}
            obj = {k: int(v) if k in ("hour_bucket", "ups", "downs") else v for k, v in obj.items()}
            out.write(json.dumps(obj) + "\n")
    elif format == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(SUBMISSION_FIELDS)
        for s in submissions:
            w.writerow([s.image_id, s.category, s.hour_bucket, s.ups, s.downs])
    else:
        raise ViralityError("UNSUPPORTED_FORMAT", f"unknown submission format {format!r}")
    return out.getvalue()


def format_pairs(pairs: Iterable[PairLabel]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(PAIR_FIELDS)
    for p in pairs:
        w.writerow([p.pair_id, p.image_a, p.image_b, p.label])
    return out.getvalue()


def format_annotations(annotations: Iterable[AttributeAnnotation]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(ANNOTATION_FIELDS)
    for a in annotations:
        w.writerow([a.pair_id, a.attribute, a.worker_id, a.label])
    return out.getvalue()


def format_features(vectors: Iterable[FeatureVector]) -> str:
    vectors = list(vectors)
    dim = len(vectors[0]) if vectors else 0
    lines = [f"#dim={dim}"]
    for v in vectors:
        # repr keeps float round-trips exact
        lines.append(",".join([v.image_id] + [repr(float(x)) for x in v.values]))
    return "\n".join(lines) + "\n"


def read_path(path, parser, **kwargs):
    """Open ``path`` as UTF-8 and run one of the ``parse_*`` functions on it."""
    try:
        with Path(path).open("rb") as fh:
            return parser(fh, **kwargs)
    except OSError as exc:
        raise ViralityError("IO_FAILURE", f"{path}: {exc.strerror}") from exc


def parse_labels(stream, strict: bool = False):
    """Parse ``labels.csv`` (image_id,label with label -1 or +1).

    Returns ``(list of (image_id, label), report)``.
    """

    def build(row):
        if len(row) != 2:
            raise _RowError("BAD_ARITY", f"{len(row)} fields")
        if not row[0]:
            raise _RowError("BAD_VALUE", "empty image id")
        return row[0], _label(row[1], (-1, 1))

    return _parse(stream, lambda s: _csv_rows(s, ("image_id", "label")), build, strict)
