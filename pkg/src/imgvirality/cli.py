"""Command-line entry point: ``imgvirality <subcommand> [options]``.

Every subcommand reads its inputs, computes all outputs in memory and only
then writes them (each file via a temporary name and an atomic rename), so a
failing run leaves nothing half-written.  Errors print one line
``error: E_<CODE>: <detail>`` on stderr.

Exit codes: 0 success, 2 bad usage, 3 data error, 4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import constants
from .attributes import (
    ComboMode,
    aggregate_annotations,
    attribute_correlations,
    combo_accuracy,
    correlations_csv,
    greedy_select,
)
from .datasets import (
    ProxyCondition,
    SynthTruth,
    build_category_dataset,
    build_dichotomy,
    build_random_mix_pairs,
    build_topbottom_pairs,
    category_dataset_csv,
    generate_synthetic_corpus,
    load_synth_config,
    parse_key_values,
    proxies_csv,
    select_proxies,
    synthetic_annotations,
    synthetic_features,
)
from .errors import InvariantViolation, ViralityError
from .evaluation import (
    ComparisonRow,
    comparison_csv,
    comparison_text,
    read_comparison_csv,
)
from .ingest import (
    format_annotations,
    format_features,
    format_pairs,
    format_submissions,
    parse_annotations,
    parse_features,
    parse_labels,
    parse_pairs,
    parse_submissions,
    read_path,
)
from .learn import (
    LinearModel,
    TrainConfig,
    accuracy_csv,
    cross_validate,
    make_cv_plan,
    pair_matrix,
    train_attribute_virality,
    train_linear,
    train_pairwise,
    train_relative_attribute,
)
from .model import FeatureSet, SignedAttribute, validate_corpus
from .scoring import ScoreTable, score_table

log = logging.getLogger("imgvirality")

USAGE_CODES = {"NO_INPUT", "BAD_CONFIG", "UNSUPPORTED_FORMAT", "BAD_USAGE"}
LOCK_NAME = ".imgvirality.lock"


# --- helpers ------------------------------------------------------------------


def _seed(args) -> int:
    return 0 if args.seed is None else args.seed


def _report_rejects(name, report):
    if report.records_rejected:
        reasons = ", ".join(f"{k}={v}" for k, v in sorted(report.rejection_reasons.items()))
        print(f"{name}: skipped {report.records_rejected} of {report.records_read} rows ({reasons})",
              file=sys.stderr)


def _load_submissions(args):
    subs, report = read_path(args.submissions, parse_submissions, format=args.format)
    _report_rejects(args.submissions, report)
    return subs


def _load_pairs(path):
    pairs, report = read_path(path, parse_pairs)
    _report_rejects(path, report)
    if not pairs:
        raise ViralityError("EMPTY_INPUT", f"{path} has no valid pairs")
    return pairs


def _load_annotations(path):
    annotations, report = read_path(path, parse_annotations)
    _report_rejects(path, report)
    return annotations


def _load_features(path) -> FeatureSet:
    vectors, report = read_path(path, parse_features)
    _report_rejects(path, report)
    return FeatureSet(vectors)


def _load_labels(path):
    labels, report = read_path(path, parse_labels)
    _report_rejects(path, report)
    return labels


def _load_scores(path) -> ScoreTable:
    try:
        return ScoreTable.from_csv(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ViralityError("IO_FAILURE", f"{path}: {exc.strerror}") from exc


def _train_config(args, **overrides) -> TrainConfig:
    return TrainConfig(
        regularization=args.regularization, epochs=args.epochs, seed=_seed(args), **overrides
    )


def _check(condition, message):
    if not condition:
        raise InvariantViolation(message)


def _csv_list(text):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return list(text)
    return [t.strip() for t in text.split(",") if t.strip()]


def _absolute_examples(features, labels):
    missing = [i for i, _ in labels if i not in features]
    if missing:
        raise ViralityError("MISSING_FEATURES", f"no features for {missing[:5]}")
    X = np.array([features[i] for i, _ in labels], dtype=float).reshape(len(labels), features.dim)
    y = np.array([lab for _, lab in labels], dtype=int)
    return X, y


# --- subcommands ----------------------------------------------------------------


def cmd_score(args):
    corpus = validate_corpus(_load_submissions(args), args.min_category_submissions)
    table = score_table(corpus)
    _check(sum(r.resubmissions for r in table.values()) == corpus.n_submissions,
           "resubmission counts do not partition the corpus")
    top = sorted(table, key=lambda i: (-table[i].virality, i))[:5]
    print(f"images: {len(table)}  submissions: {corpus.n_submissions}  "
          f"categories: {len(corpus.categories)}  m_bar: {corpus.m_bar:.4g}  "
          f"offset: {corpus.score_offset}")
    print("top viral: " + ", ".join(top))
    return {"scores.csv": table.to_csv()}


def cmd_dataset(args):
    seed = _seed(args)
    out = {}
    if args.mode == "category":
        if not args.submissions:
            raise ViralityError("BAD_USAGE", "--mode category needs --submissions")
        corpus = validate_corpus(_load_submissions(args), args.min_category_submissions)
        candidates = None
        if args.top_viral:
            table = score_table(corpus)
            candidates = sorted(table, key=lambda i: (-table[i].virality, i))[: args.top_viral]
        categories = _csv_list(args.categories) or list(constants.VIRAL_CATEGORIES)
        dataset = build_category_dataset(corpus, categories, args.per_category, candidates)
        out["categories.csv"] = category_dataset_csv(dataset, corpus)
        return out

    if not args.scores:
        raise ViralityError("BAD_USAGE", f"--mode {args.mode} needs --scores")
    scores = _load_scores(args.scores)
    dichotomy = build_dichotomy(scores, args.k)
    v = scores
    _check(min(v[i].virality for i in dichotomy.viral) >= max(v[i].virality for i in dichotomy.nonviral),
           "dichotomy sides overlap in virality")
    out["dichotomy.csv"] = dichotomy.to_csv()
    if args.mode == "topbottom":
        pairs = build_topbottom_pairs(dichotomy, seed)
        out["pairs.csv"] = format_pairs(pairs)
    elif args.mode == "random-mix":
        pairs = build_random_mix_pairs(scores, dichotomy, args.n_pairs, seed, not args.no_filter)
        if not args.no_filter:
            ext = dichotomy.extremes
            _check(not any(p.image_a in ext and p.image_b in ext for p in pairs),
                   "random-mix pair with both members in the extreme sets")
        print(f"random-mix pairs: {len(pairs)} of {args.n_pairs} generated")
        out["pairs.csv"] = format_pairs(pairs)
    return out


def cmd_correlate(args):
    pairs = _load_pairs(args.pairs)
    matrix = aggregate_annotations(_load_annotations(args.annotations), pairs)
    rows = attribute_correlations(matrix)
    flat = [name for name, _, constant in rows if constant]
    if flat:
        print(f"constant columns reported as 0: {', '.join(flat)}", file=sys.stderr)
    return {"correlations.csv": correlations_csv(rows)}


def cmd_greedy(args):
    pairs = _load_pairs(args.pairs)
    matrix = aggregate_annotations(_load_annotations(args.annotations), pairs)
    exclusions = set(_csv_list(args.exclude)) if args.exclude is not None else constants.EXCLUDED_ATTRIBUTES
    seed_attr = SignedAttribute.parse(args.seed_attribute) if args.seed_attribute else None
    trace = greedy_select(matrix, args.max_size, ComboMode(args.mode), seed_attr, exclusions, args.epsilon)
    for prev, step in zip(trace.steps, trace.steps[1:]):
        _check(step.correlation >= prev.correlation - args.epsilon, "greedy trace dropped below epsilon")
    acc = combo_accuracy(trace.combo, matrix)
    print(" -> ".join(str(s.signed) for s in trace.steps))
    print(f"final correlation: {trace.steps[-1].correlation:.4f}  accuracy: {acc:.4f}")
    return {"trace.csv": trace.to_csv()}


def _examples(args, features):
    if args.pairs:
        pairs = _load_pairs(args.pairs)
        X, y = pair_matrix(features, pairs)
        return X, y.astype(int), [p.pair_id for p in pairs], True
    if args.labels:
        labels = _load_labels(args.labels)
        X, y = _absolute_examples(features, labels)
        return X, y, [i for i, _ in labels], False
    raise ViralityError("BAD_USAGE", "need --pairs or --labels")


def cmd_train(args):
    features = _load_features(args.features)
    X, y, _, pairwise = _examples(args, features)
    train = train_pairwise if pairwise else train_linear
    model = train(X, y, _train_config(args))
    acc = float(np.mean(model.predict(X) == y))
    print(f"{'pairwise' if pairwise else 'absolute'} model: n={len(y)} dim={model.dim} "
          f"training accuracy={acc:.4f} objective={model.meta['objective']:.6g}")
    return {"model.txt": model.to_text()}


def cmd_predict(args):
    try:
        model = LinearModel.from_text(Path(args.model).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ViralityError("IO_FAILURE", f"{args.model}: {exc.strerror}") from exc
    features = _load_features(args.features)
    if args.pairs:
        pairs = _load_pairs(args.pairs)
        X, _ = pair_matrix(features, pairs)
        ids = [p.pair_id for p in pairs]
    else:
        ids = list(features.ids)
        X = features.matrix
    margins = model.decision_function(X)
    lines = ["id,label,margin"]
    lines += [f"{i},{1 if m >= 0 else -1},{m:.12g}" for i, m in zip(ids, margins)]
    return {"predictions.csv": "\n".join(lines) + "\n"}


def cmd_cv(args):
    features = _load_features(args.features)
    seed = _seed(args)
    config = _train_config(args)
    reports = []
    pred_lines = ["task,id,truth,predicted,fold"]

    def record(report, ids):
        reports.append(report)
        folds = report.plan.folds
        for i, t, p, f in zip(ids, report.truth, report.predictions, folds):
            pred_lines.append(f"{report.task},{i},{int(t)},{int(p)},{int(f)}")

    if args.task in ("pairwise", "absolute"):
        X, y, ids, pairwise = _examples(args, features)
        if args.task == "pairwise" and not pairwise:
            raise ViralityError("BAD_USAGE", "--task pairwise needs --pairs")
        plan = make_cv_plan(len(y), args.folds, seed)
        record(cross_validate(X, y, plan, config, pairwise=pairwise, task=args.task), ids)
    else:
        if not args.pairs or not args.annotations:
            raise ViralityError("BAD_USAGE", f"--task {args.task} needs --pairs and --annotations")
        pairs = _load_pairs(args.pairs)
        matrix = aggregate_annotations(_load_annotations(args.annotations), pairs)
        default = matrix.attributes if args.task == "attribute" else constants.TOP5_ATTRIBUTES
        names = _csv_list(args.attributes) or list(default)
        plan = make_cv_plan(matrix.n_pairs, args.folds, seed)
        predicted = []
        for name in names:
            report = train_relative_attribute(features, pairs, matrix, name, plan, config)
            record(report, matrix.pair_ids)
            predicted.append(report.predictions)
        if args.task == "attribute-virality":
            A = np.stack(predicted, axis=1)
            record(train_attribute_virality(A, matrix.labels, plan, config), matrix.pair_ids)
    for r in reports:
        print(f"{r.task}: accuracy {r.accuracy:.4f} (n={r.n}, k={r.plan.k})")
    return {"accuracy.csv": accuracy_csv(reports), "cv_predictions.csv": "\n".join(pred_lines) + "\n"}


def cmd_proxies(args):
    features = _load_features(args.features)
    pairs = _load_pairs(args.pairs)
    conditions = list(ProxyCondition) if args.condition == "all" else [ProxyCondition(args.condition)]
    seed = _seed(args)
    quads = []
    for n, pair in enumerate(pairs):
        for condition in conditions:
            quads.append(select_proxies(features, pair, condition, seed + n))
    return {"proxies.csv": proxies_csv(quads)}


def cmd_synth(args):
    if args.pairs or args.truth:
        if not (args.pairs and args.truth):
            raise ViralityError("BAD_USAGE", "annotation mode needs both --pairs and --truth")
        truth = SynthTruth.from_csv(Path(args.truth).read_text(encoding="utf-8"))
        pairs = _load_pairs(args.pairs)
        annotations = synthetic_annotations(truth, pairs, args.workers, seed=_seed(args))
        return {"annotations.csv": format_annotations(annotations)}
    if not args.spec:
        raise ViralityError("BAD_USAGE", "synth needs --spec (or --pairs with --truth)")
    config = load_synth_config(args.spec)
    seed = config.seed if args.seed is None else args.seed
    submissions, truth = generate_synthetic_corpus(config, seed)
    features = synthetic_features(truth, config.feature_dim, seed)
    print(f"synthetic corpus: {len(truth.rows)} images, {len(submissions)} submissions")
    return {
        "submissions.jsonl": format_submissions(submissions, "jsonl"),
        "truth.csv": truth.to_csv(),
        "features.csv": format_features(features.vectors()),
    }


def _accuracy_row(path, task):
    text = Path(path).read_text(encoding="utf-8")
    for line in text.splitlines()[1:]:
        t, fold, n, acc = line.split(",")
        if fold == "all" and (task is None or t == task):
            return int(n), float(acc)
    raise ViralityError("BAD_VALUE", f"no 'all' row for task {task!r} in {path}")


def cmd_report(args):
    rows = []
    for path in args.comparison or []:
        rows.extend(read_comparison_csv(Path(path).read_text(encoding="utf-8")))
    for entry in args.entry or []:
        parts = entry.split(",")
        if len(parts) not in (3, 4):
            raise ViralityError("BAD_USAGE", f"--entry wants METHOD,DATASET,ACCURACY_CSV[,TASK]: {entry}")
        method, dataset, path = parts[:3]
        if not Path(path).exists():
            raise ViralityError("NO_INPUT", path)
        n, acc = _accuracy_row(path, parts[3] if len(parts) == 4 else None)
        rows.append(ComparisonRow(method, dataset, n, acc))
    if not rows:
        raise ViralityError("BAD_USAGE", "report needs --entry or --comparison inputs")
    text = comparison_text(rows)
    print(text, end="")
    return {"comparison.csv": comparison_csv(rows), "comparison.txt": text}


# --- parser -------------------------------------------------------------------------

# dest names of arguments that must point at existing files
INPUT_ARGS = ("submissions", "scores", "pairs", "annotations", "features", "labels", "model",
              "spec", "truth", "comparison")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="global seed (default 0)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--config", help="key = value file supplying defaults for any option")
    common.add_argument("--format", choices=("csv", "jsonl"), default="jsonl",
                        help="submission input format")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="imgvirality", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, parents=[common], help=help)
        p.set_defaults(func=func)
        return p

    p = add("score", cmd_score, "virality scores from submissions")
    p.add_argument("--submissions", required=True)
    p.add_argument("--min-category-submissions", type=int, default=constants.MIN_CATEGORY_SUBMISSIONS)

    p = add("dataset", cmd_dataset, "dichotomy, pair sets and category sets")
    p.add_argument("--scores")
    p.add_argument("--mode", choices=("dichotomy", "topbottom", "random-mix", "category"),
                   default="topbottom")
    p.add_argument("--k", type=int, default=constants.DICHOTOMY_K)
    p.add_argument("--n-pairs", type=int, default=constants.RANDOM_MIX_PAIRS)
    p.add_argument("--no-filter", action="store_true",
                   help="keep random-mix pairs with both members in the extreme sets")
    p.add_argument("--submissions")
    p.add_argument("--min-category-submissions", type=int, default=constants.MIN_CATEGORY_SUBMISSIONS)
    p.add_argument("--categories", help="comma-separated category names")
    p.add_argument("--per-category", type=int, default=constants.PER_CATEGORY)
    p.add_argument("--top-viral", type=int, default=None,
                   help="only consider the N most viral images")

    p = add("correlate", cmd_correlate, "attribute/virality correlations")
    p.add_argument("--pairs", required=True)
    p.add_argument("--annotations", required=True)

    p = add("greedy", cmd_greedy, "greedy signed-attribute selection")
    p.add_argument("--pairs", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--max-size", type=int, default=5)
    p.add_argument("--mode", choices=("sum", "force"), default="sum")
    p.add_argument("--seed-attribute", help="first attribute, '+name' or '-name' (write --seed-attribute=-name)")
    p.add_argument("--exclude", help="comma-separated attributes to leave out "
                   "(default: 'likely to go viral', 'memorable')")
    p.add_argument("--epsilon", type=float, default=0.0)

    for name, func, help in (("train", cmd_train, "train a linear model"),
                             ("cv", cmd_cv, "k-fold cross-validation")):
        p = add(name, func, help)
        p.add_argument("--features", required=True)
        p.add_argument("--pairs")
        p.add_argument("--labels")
        p.add_argument("--regularization", type=float, default=1e-3)
        p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--task", choices=("pairwise", "absolute", "attribute", "attribute-virality"),
                   default="pairwise")
    p.add_argument("--folds", type=int, default=constants.CV_FOLDS)
    p.add_argument("--annotations")
    p.add_argument("--attributes", help="comma-separated attribute names")

    p = add("predict", cmd_predict, "apply a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--pairs")

    p = add("proxies", cmd_proxies, "proxy images for 2AFC pairs")
    p.add_argument("--features", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--condition", choices=[c.value for c in ProxyCondition] + ["all"], default="all")

    p = add("synth", cmd_synth, "synthetic corpus or synthetic annotations")
    p.add_argument("--spec")
    p.add_argument("--pairs")
    p.add_argument("--truth")
    p.add_argument("--workers", type=int, default=5)

    p = add("report", cmd_report, "side-by-side accuracy table")
    p.add_argument("--entry", action="append", help="METHOD,DATASET,ACCURACY_CSV[,TASK]")
    p.add_argument("--comparison", action="append")
    return parser


def _config_path(argv):
    """Value of ``--config`` in ``argv`` (either spelling), or None."""
    for i, arg in enumerate(argv):
        if arg == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if arg.startswith("--config="):
            return arg.split("=", 1)[1]
    return None


def _command(parser, argv):
    names = parser._subparsers._group_actions[0].choices
    return next((a for a in argv if a in names), None)


def _apply_config(parser, argv):
    """Parse ``argv`` with values from ``--config`` as defaults; flags still win."""
    argv = list(sys.argv[1:] if argv is None else argv)
    config, command = _config_path(argv), _command(parser, argv)
    if config is None or command is None:
        return parser.parse_args(argv)
    path = Path(config)
    if not path.is_file():
        raise ViralityError("NO_INPUT", f"config: {path}")
    try:
        values = parse_key_values(path.read_text(encoding="utf-8"))
    except ViralityError as err:
        raise ViralityError("BAD_CONFIG", err.message) from None
    subparser = parser._subparsers._group_actions[0].choices[command]
    known = {a.dest: a for a in subparser._actions}
    defaults = {}
    for raw_key, value in values.items():
        key = raw_key.replace("-", "_")
        if key not in known or key in ("config", "help"):
            raise ViralityError("BAD_CONFIG", f"unknown option {raw_key!r} for {command}")
        action = known[key]
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = value.lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            try:
                defaults[key] = action.type(value)
            except ValueError:
                raise ViralityError("BAD_CONFIG", f"{raw_key}={value!r}") from None
        else:
            defaults[key] = [value] if isinstance(action, argparse._AppendAction) else value
        if action.choices is not None and defaults[key] not in action.choices:
            raise ViralityError("BAD_CONFIG", f"{raw_key}={value!r}")
        # a value from the file satisfies a required flag
        action.required = False
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def _check_inputs(args):
    for dest in INPUT_ARGS:
        value = getattr(args, dest, None)
        for path in value if isinstance(value, list) else [value]:
            if path is not None and not Path(path).is_file():
                raise ViralityError("NO_INPUT", f"{dest}: {path}")


def _write_outputs(out_dir: Path, outputs: dict):
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ViralityError("LOCKED", f"{lock} exists; another run is writing here") from None
    os.close(fd)
    try:
        for name, content in outputs.items():
            fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=f".{name}.", suffix=".tmp")
            try:
                with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                    fh.write(content)
                os.replace(tmp, out_dir / name)
            except BaseException:
                Path(tmp).unlink(missing_ok=True)
                raise
    finally:
        lock.unlink(missing_ok=True)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        _check_inputs(args)
        outputs = args.func(args)
        _write_outputs(Path(args.out), outputs)
    except SystemExit as exc:
        return int(exc.code or 0)
    except ViralityError as err:
        print(f"error: E_{err.code}: {err.message}", file=sys.stderr)
        return 2 if err.code in USAGE_CODES else 3
    except InvariantViolation as err:
        print(f"error: E_INVARIANT: {err}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
