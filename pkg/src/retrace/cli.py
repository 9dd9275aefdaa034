"""Command-line pipeline: synth -> featurize -> train/cluster -> eval.

Every subcommand is deterministic given its flags (all stochastic paths
take the seed, which defaults to a fixed constant), and outputs are
written atomically: a failure leaves no partial artifact behind.
``RETRACE_LOG`` selects log verbosity (debug/info/warning/error).
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys

from . import model_io, synth
from .classify import Standardizer, train_knn, train_svm
from .entropy import feature_matrix, featurize, read_features, write_features
from .evaluation import ClassifierSpec, cluster_confusion, cross_validate, purity
from .gmm import em_select_k, fit_standardized_gmm, StandardizedGmm
from .trace_model import (
    EventParseError,
    build_traces,
    filter_popular,
    parse_events,
    read_labels,
    write_labels,
)

log = logging.getLogger("retrace")

DEFAULT_SEED = 1234


def _configure_logging() -> None:
    level_name = os.environ.get("RETRACE_LOG", "warning").strip().lower()
    level = {
        "debug": logging.DEBUG,
        "info": logging.INFO,
        "warning": logging.WARNING,
        "error": logging.ERROR,
    }.get(level_name, logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _atomic_write_all(outputs: dict[str, str]) -> None:
    """Write every path from its rendered text, all-or-nothing."""
    tmp_paths = []
    try:
        for path, text in outputs.items():
            tmp = path + ".tmp"
            with open(tmp, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            tmp_paths.append((tmp, path))
        for tmp, path in tmp_paths:
            os.replace(tmp, path)
    except BaseException:
        for tmp, _ in tmp_paths:
            if os.path.exists(tmp):
                os.unlink(tmp)
        raise


def _render(write_fn, *args) -> str:
    buf = io.StringIO()
    write_fn(buf, *args)
    return buf.getvalue()


def _read_feature_file(path):
    with open(path, "r", encoding="utf-8") as fh:
        return read_features(fh)


def _read_label_file(path):
    with open(path, "r", encoding="utf-8") as fh:
        return read_labels(fh)


def _join_features_labels(vectors, labels_by_url):
    """Pair features with labels by URL, dropping mismatches with a count."""
    feature_urls = {v.url_id for v in vectors}
    unknown = sorted(set(labels_by_url) - feature_urls)
    for url in unknown:
        log.warning("label file references unknown url %r; skipped", url)
    matched = [(v, labels_by_url[v.url_id]) for v in vectors if v.url_id in labels_by_url]
    unlabeled = len(vectors) - len(matched)
    if unlabeled:
        log.warning("%d feature rows have no label and are skipped", unlabeled)
    if not matched:
        raise ValueError("no feature rows matched the label file")
    paired_vectors = [v for v, _ in matched]
    paired_labels = [l for _, l in matched]
    return paired_vectors, paired_labels, len(unknown), unlabeled


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_synth(args) -> int:
    traces, labels = synth.gen_corpus(args.per_class, args.seed)
    suffix = "csv" if args.format == "csv" else "jsonl"
    writer = (
        synth.write_events_csv if args.format == "csv" else synth.write_events_jsonl
    )
    events_path = f"{args.output}.events.{suffix}"
    labels_path = f"{args.output}.labels.csv"
    _atomic_write_all(
        {
            events_path: _render(writer, traces),
            labels_path: _render(write_labels, labels),
        }
    )
    print(
        f"generated {len(traces)} traces "
        f"({args.per_class} per class) -> {events_path}, {labels_path}"
    )
    return 0


def _cmd_featurize(args) -> int:
    with open(args.input, "rb") as fh:
        events = parse_events(fh, args.format)
    traces = build_traces(events)
    kept = filter_popular(
        traces,
        min_retweets=args.min_retweets,
        min_popular_urls_per_author=args.min_popular_urls,
    )
    vectors = [featurize(tr) for tr in kept.values()]
    _atomic_write_all({args.output: _render(write_features, vectors)})
    print(
        f"parsed {len(events)} events into {len(traces)} traces; "
        f"{len(kept)} passed filters -> {args.output}"
    )
    return 0


def _cmd_train(args) -> int:
    vectors = _read_feature_file(args.input)
    if args.model == "gmm":
        k = args.k if args.k is not None else 5
        model = fit_standardized_gmm(vectors, k=k, seed=args.seed)
        desc = f"gmm (k={k})"
    else:
        if not args.labels:
            raise ValueError(f"--labels is required to train {args.model}")
        labels_by_url = _read_label_file(args.labels)
        vectors, labels, _, _ = _join_features_labels(vectors, labels_by_url)
        if args.model == "knn":
            k = args.k if args.k is not None else 3
            model = train_knn(vectors, labels, k=k)
            desc = f"knn (k={k})"
        else:
            model = train_svm(
                vectors,
                labels,
                C=args.C,
                gamma=args.gamma,
                threads=args.threads,
            )
            desc = f"svm (C={args.C}, gamma={args.gamma})"
    _atomic_write_all({args.output: _render(model_io.dump_model, model)})
    print(f"trained {desc} on {len(vectors)} traces -> {args.output}")
    return 0


def _cmd_predict(args) -> int:
    vectors = _read_feature_file(args.input)
    model = model_io.load_model(args.model_file)
    lines = ["url,predicted,score"]
    if isinstance(model, StandardizedGmm):
        ids, resp = model.assign(vectors)
        for v, cid, row in zip(vectors, ids, resp):
            lines.append(f"{v.url_id},{int(cid)},{row[int(cid)]:.6f}")
    else:
        labels = model.predict_labels(vectors)
        # the reported score is the winner's vote fraction (the refined
        # ROC scores live in the eval report, not here)
        if hasattr(model, "vote_fractions"):
            scores = model.vote_fractions(vectors)
        else:
            scores = model.predict_scores(vectors)
        class_pos = {c: i for i, c in enumerate(model.classes)}
        for v, label, row in zip(vectors, labels, scores):
            lines.append(f"{v.url_id},{label.value},{row[class_pos[label]]:.6f}")
    _atomic_write_all({args.output: "\n".join(lines) + "\n"})
    print(f"predicted {len(vectors)} traces -> {args.output}")
    return 0


def _cmd_cluster(args) -> int:
    vectors = _read_feature_file(args.input)
    k = args.k if args.k is not None else 5
    model = fit_standardized_gmm(vectors, k=k, seed=args.seed)
    ids, resp = model.assign(vectors)
    lines = ["url,cluster,top_responsibility"]
    for v, cid, row in zip(vectors, ids, resp):
        lines.append(f"{v.url_id},{int(cid)},{row[int(cid)]:.6f}")
    outputs = {args.output: "\n".join(lines) + "\n"}

    summary = (
        f"clustered {len(vectors)} traces into {k} components "
        f"-> {args.output}"
    )
    if args.labels:
        labels_by_url = _read_label_file(args.labels)
        pairs = [
            (int(cid), labels_by_url[v.url_id])
            for v, cid in zip(vectors, ids)
            if v.url_id in labels_by_url
        ]
        if pairs:
            conf = cluster_confusion([c for c, _ in pairs], [t for _, t in pairs])
            conf_path = args.output + ".confusion.csv"
            outputs[conf_path] = _render(conf.write_csv, "cluster")
            summary += (
                f"; purity {purity(conf):.4f} over {len(pairs)} labeled traces"
                f" -> {conf_path}"
            )
    _atomic_write_all(outputs)
    print(summary)
    return 0


def _cmd_select_k(args) -> int:
    vectors = _read_feature_file(args.input)
    standardizer = Standardizer.fit(feature_matrix(vectors))
    points = standardizer.apply(feature_matrix(vectors))
    best_k, gmm_model = em_select_k(
        points,
        k_max=args.k_max,
        folds=args.folds,
        seed=args.seed,
        scan_all=args.scan_all_k,
    )
    model = StandardizedGmm(standardizer=standardizer, gmm=gmm_model)
    _atomic_write_all({args.output: _render(model_io.dump_model, model)})
    print(
        f"selected k={best_k} by {args.folds}-fold cross-validated "
        f"likelihood over {len(vectors)} traces -> {args.output}"
    )
    return 0


def _cmd_eval(args) -> int:
    vectors = _read_feature_file(args.input)
    labels_by_url = _read_label_file(args.labels)
    vectors, labels, n_unknown, n_unlabeled = _join_features_labels(
        vectors, labels_by_url
    )
    spec = ClassifierSpec(
        kind=args.model, k=args.k if args.k is not None else 3,
        C=args.C, gamma=args.gamma,
    )
    report = cross_validate(
        spec, vectors, labels,
        folds=args.folds, seed=args.seed, threads=args.threads,
    )
    doc = report.to_json_dict()
    doc["labels_skipped_unknown_url"] = n_unknown
    doc["features_skipped_unlabeled"] = n_unlabeled
    table = report.to_text_table()
    _atomic_write_all(
        {
            f"{args.output}.json": json.dumps(doc, indent=2) + "\n",
            f"{args.output}.txt": table,
            f"{args.output}.confusion.csv": _render(
                report.confusion.write_csv, "predicted"
            ),
        }
    )
    print(table, end="")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_seed(p):
    p.add_argument(
        "--seed", type=int, default=DEFAULT_SEED,
        help=f"deterministic seed (default {DEFAULT_SEED})",
    )


def _positive_int(name):
    def parse(value):
        v = int(value)
        if v < 1:
            raise argparse.ArgumentTypeError(f"{name} must be >= 1, got {v}")
        return v

    return parse


def _positive_float(name):
    def parse(value):
        v = float(value)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"{name} must be > 0, got {v}")
        return v

    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="retrace",
        description=(
            "Entropy-based classification of per-URL retweeting traces: "
            "reconstruct traces from events, compute interval/user "
            "entropies, then classify or cluster them."
        ),
    )
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    p = sub.add_parser("synth", help="generate a labeled synthetic corpus")
    p.add_argument("--per-class", type=_positive_int("--per-class"), default=100)
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--output", required=True, help="output base path")
    _add_seed(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser(
        "featurize", help="events file -> per-trace entropy feature CSV"
    )
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--output", required=True)
    p.add_argument(
        "--min-retweets", type=_positive_int("--min-retweets"), default=100,
        help="popularity threshold on trace length (default 100)",
    )
    p.add_argument(
        "--min-popular-urls", type=_positive_int("--min-popular-urls"), default=2,
        help="popular URLs an author must hold (default 2)",
    )
    p.set_defaults(func=_cmd_featurize)

    p = sub.add_parser("train", help="train a model from features (+labels)")
    p.add_argument("--input", required=True, help="feature CSV")
    p.add_argument("--labels", help="labels CSV (required for knn/svm)")
    p.add_argument("--model", choices=("knn", "svm", "gmm"), required=True)
    p.add_argument("--output", required=True, help="model JSON path")
    p.add_argument("--k", type=_positive_int("--k"), default=None,
                   help="neighbors (knn, default 3) or components (gmm, default 5)")
    p.add_argument("--C", type=_positive_float("--C"), default=1.0)
    p.add_argument("--gamma", type=_positive_float("--gamma"), default=0.5)
    p.add_argument("--threads", type=_positive_int("--threads"), default=1)
    _add_seed(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="apply a trained model to features")
    p.add_argument("--input", required=True, help="feature CSV")
    p.add_argument("--model-file", required=True, help="trained model JSON")
    p.add_argument("--output", required=True, help="prediction CSV")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("cluster", help="EM-cluster features with fixed k")
    p.add_argument("--input", required=True, help="feature CSV")
    p.add_argument("--k", type=_positive_int("--k"), default=None,
                   help="component count (default 5)")
    p.add_argument("--labels", help="labels CSV for a purity/confusion report")
    p.add_argument("--output", required=True, help="assignments CSV")
    _add_seed(p)
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser(
        "select-k", help="pick the cluster count by cross-validated likelihood"
    )
    p.add_argument("--input", required=True, help="feature CSV")
    p.add_argument("--k-max", type=_positive_int("--k-max"), default=15)
    p.add_argument("--folds", type=_positive_int("--folds"), default=10)
    p.add_argument(
        "--scan-all-k", action="store_true",
        help="score every k up to --k-max instead of stopping at the first dip",
    )
    p.add_argument("--output", required=True, help="model JSON path")
    _add_seed(p)
    p.set_defaults(func=_cmd_select_k)

    p = sub.add_parser(
        "eval", help="stratified cross-validation report for knn or svm"
    )
    p.add_argument("--input", required=True, help="feature CSV")
    p.add_argument("--labels", required=True, help="labels CSV")
    p.add_argument("--model", choices=("knn", "svm"), required=True)
    p.add_argument("--folds", type=_positive_int("--folds"), default=10)
    p.add_argument("--k", type=_positive_int("--k"), default=None)
    p.add_argument("--C", type=_positive_float("--C"), default=1.0)
    p.add_argument("--gamma", type=_positive_float("--gamma"), default=0.5)
    p.add_argument("--threads", type=_positive_int("--threads"), default=1)
    p.add_argument("--output", required=True, help="report base path")
    _add_seed(p)
    p.set_defaults(func=_cmd_eval)

    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, EventParseError, RuntimeError, OSError) as exc:
        print(f"retrace: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
