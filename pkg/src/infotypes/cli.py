"""Command line entry point: ``infotypes <command> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis, experiments
from .calibrate import (
    ThresholdProfile,
    apply_thresholds,
    labeled_examples,
    optimal_thresholds,
    read_type_labels,
)
from .classify import PredictionCache, classify_corpus, read_predictions, write_predictions
from .config import RunConfig, load_config, with_overrides
from .errors import ConfigError, DataError, InfoTypesError
from .ingest import load_documents
from .llm import make_client
from .metrics import evaluate_label_sets
from .models import subset_dims
from .typology import TYPE_NAMES

log = logging.getLogger("infotypes")

EXIT_OK = 0
EXIT_CONFIG = 3
EXIT_DATA = 4
EXIT_PARTIAL = 5

KINDS = ("reviews", "summaries", "scored")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--seed", type=int, help="root seed for splits, bootstrap and SGD")
    p.add_argument("--subset", action="append", dest="subsets",
                   help="feature subset (repeatable): all, coarse, a group, or t1+t2")
    p.add_argument("--n-reps", type=int, dest="n_repetitions", help="queries per (sentence, type)")
    p.add_argument("--endpoint", dest="endpoint_url", help="completion endpoint URL")
    p.add_argument("--replay", help="replay log (JSONL) instead of a live endpoint")
    p.add_argument("--out", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="infotypes", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", parents=[common], help="score every sentence for all 24 types")
    p.add_argument("--corpus", required=True)
    p.add_argument("--kind", choices=KINDS, default="reviews")
    p.add_argument("--cache", help="prediction cache (JSONL); default <out>/cache.jsonl")

    p = sub.add_parser("calibrate", parents=[common], help="fit per-type thresholds on a dev file")
    p.add_argument("--labels", required=True)
    p.add_argument("--predictions", required=True, action="append")

    p = sub.add_parser("eval-typology", parents=[common], help="evaluate thresholds on a test file")
    p.add_argument("--labels", required=True)
    p.add_argument("--predictions", required=True, action="append")
    p.add_argument("--thresholds", required=True)

    task = sub.add_parser("task", help="downstream prediction tasks")
    tsub = task.add_subparsers(dest="task", required=True)
    for name in ("helpful-reviews", "sentiment"):
        p = tsub.add_parser(name, parents=[common])
        p.add_argument("--corpus", required=True)
        p.add_argument("--predictions", required=True, action="append")
    p = tsub.add_parser("helpful-sentences", parents=[common])
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--predictions", required=True, action="append")
    p = tsub.add_parser("type-benchmark", parents=[common])
    p.add_argument("--type", required=True, dest="info_type")
    p.add_argument("--labels", required=True)
    p.add_argument("--test-labels")
    p.add_argument("--predictions", required=True, action="append")
    p.add_argument("--train-size", type=int)
    p.add_argument("--method", choices=("youden", "grid"))
    p.add_argument("--iterations", type=int)

    an = sub.add_parser("analyze", help="profile analyses")
    asub = an.add_subparsers(dest="analysis", required=True)
    p = asub.add_parser("compare", parents=[common])
    for side in ("a", "b"):
        p.add_argument(f"--{side}", required=True, help=f"corpus file for side {side}")
        p.add_argument(f"--{side}-kind", choices=KINDS, default="reviews")
        p.add_argument(f"--{side}-filter", default="all")
    p.add_argument("--predictions", required=True, action="append")
    p = asub.add_parser("categories", parents=[common])
    p.add_argument("--corpus", required=True)
    p.add_argument("--kind", choices=KINDS, default="reviews")
    p.add_argument("--predictions", required=True, action="append")
    p = asub.add_parser("structure", parents=[common])
    p.add_argument("--corpus", required=True)
    p.add_argument("--kind", choices=KINDS, default="summaries")
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--predictions", required=True, action="append")
    return parser


# -- helpers -------------------------------------------------------------------

def _load_vectors(paths) -> dict[str, np.ndarray]:
    vectors: dict[str, np.ndarray] = {}
    for path in paths:
        try:
            preds = read_predictions(path)
        except OSError as exc:
            raise DataError(f"cannot read predictions {path}: {exc}") from None
        except (ValueError, KeyError) as exc:
            raise DataError(f"malformed predictions file {path}: {exc}") from None
        vectors.update({sid: p.vector for sid, p in preds.items()})
    return vectors


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _fmt_ci(d: dict) -> str:
    lo, hi = d["ci"]
    return f"{100 * d['mean']:6.1f}  [{100 * lo:5.1f}, {100 * hi:5.1f}]"


def _classification_text(title: str, rep: dict) -> str:
    lines = [title, f"rows: {rep['n_rows']}  positive rate: {rep['positive_rate']:.3f}",
             f"{'Random':<24}{100 * rep['random']:6.1f}",
             f"{'Random (proportion known)':<24}{100 * rep['random_proportion_known']:6.1f}"]
    for s in rep["subsets"]:
        lines.append(f"{s['subset']:<24}{_fmt_ci(s)}")
    return "\n".join(lines)


def _sentences_text(rep: dict) -> str:
    lo, hi = rep["tertile_borders"]
    lines = [f"helpful sentences  train={rep['n_train']} test={rep['n_test']}  "
             f"tertile borders {lo:.3f}/{hi:.3f}",
             f"{'Subset':<24}{'MSE':>8}{'PC':>8}{'N@1':>8}{'SVM acc':>9}"]
    for s in rep["subsets"]:
        lines.append(f"{s['subset']:<24}{s['mse']:8.3f}{s['pearson']:8.2f}"
                     f"{s['ndcg_at_1']:8.2f}{100 * s['svm_accuracy']:9.1f}")
    return "\n".join(lines)


def _benchmark_text(rep: dict) -> str:
    lines = [f"type benchmark: {rep['type']} ({rep['method']}, {rep['iterations']} iterations)",
             f"{'F1':<10}{_fmt_ci(rep['f1'])}"]
    for k, v in rep["recall_at_precision"].items():
        lines.append(f"{'R@P' + k:<10}{_fmt_ci(v)}")
    return "\n".join(lines)


def _emit(out: Path, name: str, report: dict, text: str) -> None:
    _write_json(out / f"{name}.json", report)
    (out / f"{name}.txt").write_text(text + "\n", encoding="utf-8")
    print(text)


# -- commands --------------------------------------------------------------------

def cmd_classify(args, cfg: RunConfig, out: Path) -> int:
    typology = cfg.typology()
    client = make_client(cfg.model, cfg.replay)  # config errors surface before any work
    docs = load_documents(args.corpus, args.kind)
    sentences = [s for d in docs for s in d.sentences]
    cache = PredictionCache(args.cache or cfg.cache or out / "cache.jsonl")
    result = classify_corpus(sentences, client, cfg.model, cfg.n_repetitions, cache, typology)
    write_predictions(out / "predictions.jsonl", result.predictions)
    with open(out / "failures.jsonl", "w", encoding="utf-8") as f:
        for rec in result.failures:
            f.write(json.dumps(rec, sort_keys=True) + "\n")
    print(f"classified {len(result.predictions)} sentence(s), {result.n_failed} failure(s)")
    return EXIT_PARTIAL if result.n_failed else EXIT_OK


def cmd_calibrate(args, cfg, out) -> int:
    dev = labeled_examples(read_type_labels(args.labels), _load_vectors(args.predictions))
    profile = optimal_thresholds(dev, provenance=str(args.labels))
    profile.save(out / "thresholds.json")
    for t in TYPE_NAMES:
        print(f"{t:<28}{profile.thresholds[t]:.1f}  dev F1 {100 * profile.f1[t]:5.1f}")
    return EXIT_OK


def cmd_eval(args, cfg, out) -> int:
    profile = ThresholdProfile.load(args.thresholds)
    test = labeled_examples(read_type_labels(args.labels), _load_vectors(args.predictions))
    report = evaluate_label_sets([ex.gold for ex in test],
                                 [apply_thresholds(ex.vector, profile) for ex in test])
    _emit(out, "report", report.to_dict(), report.to_text())
    return EXIT_OK


def cmd_task(args, cfg, out) -> int:
    vectors = _load_vectors(args.predictions)
    if args.task == "helpful-reviews":
        rep = experiments.run_helpful_reviews(load_documents(args.corpus, "reviews"), vectors,
                                              cfg.subsets, cfg.task, cfg.seed)
        text = _classification_text("helpful vs. unhelpful reviews (SVM accuracy)", rep)
    elif args.task == "sentiment":
        rep = experiments.run_sentiment(load_documents(args.corpus, "reviews"), vectors,
                                        cfg.subsets, cfg.task, cfg.seed)
        text = _classification_text("positive vs. negative reviews (SVM accuracy)", rep)
    elif args.task == "helpful-sentences":
        rep = experiments.run_helpful_sentences(
            load_documents(args.train, "scored"), load_documents(args.test, "scored"),
            vectors, cfg.subsets, cfg.task, cfg.seed)
        text = _sentences_text(rep)
    else:
        test = experiments.read_binary_labels(args.test_labels) if args.test_labels else None
        rep = experiments.run_type_benchmark(args.info_type, experiments.read_binary_labels(args.labels),
                                             vectors, cfg.task, cfg.seed, test)
        text = _benchmark_text(rep)
    rep["seed"] = cfg.seed
    _emit(out, "report", rep, text)
    return EXIT_OK


def _doc_vectors(docs, vectors):
    return [experiments.document_vectors(d, vectors) for d in docs]


def cmd_analyze(args, cfg, out) -> int:
    vectors = _load_vectors(args.predictions)
    if args.analysis == "compare":
        sides = {}
        for side in ("a", "b"):
            docs = load_documents(getattr(args, side), getattr(args, f"{side}_kind"))
            docs = experiments.filter_documents(docs, getattr(args, f"{side}_filter"), cfg.task)
            sides[side] = analysis.corpus_profile(_doc_vectors(docs, vectors))
        try:
            cmp = analysis.compare_profiles(sides["a"], sides["b"])
            deltas, r = cmp.deltas, cmp.pearson
        except analysis.UndefinedComparison as exc:
            log.warning("%s", exc)
            deltas, r = exc.deltas, None
        a_idx = dict(zip(TYPE_NAMES, sides["a"].vector))
        b_idx = dict(zip(TYPE_NAMES, sides["b"].vector))
        analysis.write_tidy(out / "deltas.csv",
                            [(t, float(a_idx[t]), float(b_idx[t]), d) for t, d in deltas],
                            ("type", "a", "b", "delta"))
        analysis.write_tidy(out / "profiles.csv",
                            analysis.tidy_rows({"a": sides["a"].vector, "b": sides["b"].vector}))
        _write_json(out / "comparison.json", {
            "pearson": r, "n_units_a": sides["a"].n_units, "n_units_b": sides["b"].n_units,
        })
        print(f"pearson r = {r if r is None else f'{r:.4f}'}")
        for t, d in deltas[:5]:
            print(f"  {t:<28}{d:+.3f}")
        return EXIT_OK
    docs = load_documents(args.corpus, args.kind)
    if args.analysis == "categories":
        grouped: dict[str, list] = {}
        for d in docs:
            grouped.setdefault(d.category_id, []).append(experiments.document_vectors(d, vectors))
        profiles = analysis.category_profiles(grouped)
        units = {c: p.vector for c, p in profiles.items()}
        analysis.write_tidy(out / "category_profiles.csv", analysis.tidy_rows(units))
        keep = analysis.visible_types(np.stack(list(units.values())), cfg.task.min_visible)
        analysis.write_tidy(out / "category_profiles_visible.csv", analysis.tidy_rows(units, keep))
        print(f"{len(profiles)} categories: {', '.join(profiles)}")
        return EXIT_OK
    prof = analysis.positional_profile(_doc_vectors(docs, vectors), args.length)
    units = {str(i): v for i, v in enumerate(prof.vectors)}
    analysis.write_tidy(out / "positional.csv", analysis.tidy_rows(units))
    keep = analysis.visible_types(prof.vectors, cfg.task.min_visible)
    analysis.write_tidy(out / "positional_visible.csv", analysis.tidy_rows(units, keep))
    print(f"{prof.n_documents} document(s) of length {args.length}; "
          f"{len(keep)} type(s) above {cfg.task.min_visible}")
    return EXIT_OK


COMMANDS = {
    "classify": cmd_classify, "calibrate": cmd_calibrate, "eval-typology": cmd_eval,
    "task": cmd_task, "analyze": cmd_analyze,
}


def _prepare(args) -> RunConfig:
    cfg = load_config(args.config)
    cfg = with_overrides(cfg, endpoint_url=args.endpoint_url, seed=args.seed,
                         n_repetitions=args.n_repetitions, replay=args.replay,
                         out=args.out, subsets=args.subsets)
    if cfg.n_repetitions < 1:
        raise ConfigError("--n-reps must be >= 1")
    for s in cfg.subsets:
        try:
            subset_dims(s)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    task = getattr(args, "task", None)
    if task == "type-benchmark":
        if args.train_size is not None:
            cfg.task.benchmark_train_size = args.train_size
        if args.method:
            cfg.task.benchmark_method = args.method
        if args.iterations is not None:
            cfg.task.benchmark_iterations = args.iterations
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _prepare(args)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        cfg.write_snapshot(out)
        return COMMANDS[args.command](args, cfg, out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InfoTypesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
