"""Straight-line reference computations.

Nothing here imports the scoring, attribute or dataset modules: every
quantity is recomputed from raw fields with plain loops so the oracles can
check those modules independently.
"""

import math


def oracle_virality(submissions, min_category_submissions=1):
    """image_id -> V_h by literal nested-loop evaluation.

    ``submissions`` is any iterable of objects with ``image_id``,
    ``category``, ``hour_bucket``, ``ups`` and ``downs``; a Corpus works too
    (its submissions are iterated).
    """
    if hasattr(submissions, "submissions") and callable(submissions.submissions):
        submissions = list(submissions.submissions())
    else:
        submissions = list(submissions)

    per_category = {}
    for s in submissions:
        per_category[s.category] = per_category.get(s.category, 0) + 1
    kept = []
    for s in submissions:
        if per_category[s.category] >= min_category_submissions:
            kept.append(s)

    smallest = None
    for s in kept:
        raw = s.ups - s.downs
        if smallest is None or raw < smallest:
            smallest = raw
    offset = -smallest if smallest < 0 else 0

    images = []
    for s in kept:
        if s.image_id not in images:
            images.append(s.image_id)
    m_bar = len(kept) / len(images)

    result = {}
    for h in images:
        best = None
        m_h = 0
        for s in kept:
            if s.image_id != h:
                continue
            m_h += 1
            total = 0
            count = 0
            for t in kept:
                if t.category == s.category and t.hour_bucket == s.hour_bucket:
                    total += t.ups - t.downs + offset
                    count += 1
            mean = total / count
            a = 0.0 if mean == 0 else (s.ups - s.downs + offset) / mean
            if best is None or a > best:
                best = a
        result[h] = best * math.log(m_h / m_bar)
    return result


def _pearson(xs, ys):
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    if sxx == 0 or syy == 0:
        return 0.0
    return sxy / math.sqrt(sxx * syy)


def oracle_combo_scores(entries, attributes, combo, mode="sum"):
    """Per-row combo scores from a list-of-rows table.

    ``combo`` is a list of (attribute, sign) with sign +1 or -1.
    """
    col = {a: j for j, a in enumerate(attributes)}
    scores = []
    for row in entries:
        votes = [int(row[col[name]]) * sign for name, sign in combo]
        if mode == "sum":
            scores.append(sum(votes))
        else:
            first = 0
            for v in votes:
                if v != 0:
                    first = v
                    break
            scores.append(first)
    return scores


def oracle_greedy_step(entries, labels, attributes, combo, mode="sum", excluded=()):
    """Exhaustively score every (attribute, sign) addition to ``combo``.

    Returns ``(best (attribute, sign), best correlation, all candidate scores)``.
    Ties: higher correlation, then +1 before -1, then attribute name.
    """
    used = {name for name, _ in combo}
    labels = [int(v) for v in labels]
    candidates = {}
    for name in attributes:
        if name in used or name in excluded:
            continue
        for sign in (1, -1):
            trial = list(combo) + [(name, sign)]
            r = _pearson(oracle_combo_scores(entries, attributes, trial, mode), labels)
            candidates[(name, sign)] = r
    if not candidates:
        return None, None, candidates
    best = min(candidates, key=lambda c: (-candidates[c], 0 if c[1] == 1 else 1, c[0]))
    return best, candidates[best], candidates


def oracle_knn(vectors, target, k, exclude=()):
    """k-th (1-based) nearest image id to ``target`` by full distance sort.

    ``vectors`` maps image_id -> sequence of floats.
    """
    origin = vectors[target]
    rows = []
    for image_id, values in vectors.items():
        if image_id == target or image_id in exclude:
            continue
        d = math.sqrt(sum((a - b) ** 2 for a, b in zip(values, origin)))
        rows.append((d, image_id))
    rows.sort()
    return rows[k - 1][1]


def oracle_percentile(values, x):
    below = 0
    for v in values:
        if v <= x:
            below += 1
    return 100.0 * below / len(values)
