"""Downstream task protocols: join predictions with derived labels, build feature
rows, and run the classifiers, regressors and single-type benchmarks."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .calibrate import grid_f1_threshold, youden_threshold
from .config import TaskConfig
from .errors import DataError
from .ingest import (
    EXCLUDED,
    HELPFUL,
    NEGATIVE,
    POSITIVE,
    UNHELPFUL,
    Document,
    compute_tertile_borders,
    derive_review_helpfulness,
    derive_sentiment,
    derive_tertile_label,
)
from .metrics import (
    BinaryCounts,
    UndefinedCorrelation,
    bootstrap_ci,
    f1,
    mse,
    ndcg_at_k,
    pearson,
    random_accuracy,
    recall_at_precision,
)
from .models import (
    FeatureRow,
    SvmConfig,
    cross_validate,
    select_features,
    svm_accuracy,
    train_regression,
    train_svm,
)
from .typology import TYPE_INDEX, parse_type

log = logging.getLogger(__name__)

PRECISION_TARGETS = (0.75, 0.80, 0.85)


def document_vectors(doc: Document, vectors: Mapping[str, np.ndarray]) -> list[np.ndarray]:
    return [vectors[s.sentence_id] for s in doc.sentences if s.sentence_id in vectors]


def document_rows(
    docs: Sequence[Document],
    vectors: Mapping[str, np.ndarray],
    labeler: Callable[[Document], float | None],
) -> list[FeatureRow]:
    """One row per labeled document: mean of its classified sentence vectors."""
    rows, unclassified = [], 0
    for doc in docs:
        target = labeler(doc)
        if target is None:
            continue
        vecs = document_vectors(doc, vectors)
        if not vecs:
            unclassified += 1
            continue
        rows.append(FeatureRow(doc.unit_id, np.mean(vecs, axis=0), float(target)))
    if unclassified:
        log.warning("%d labeled document(s) have no classified sentences; skipped", unclassified)
    if not rows:
        raise DataError("no labeled documents with predictions")
    return rows


def _review_of(doc: Document):
    if doc.review is None:
        raise DataError(f"unit {doc.unit_id} is not a review")
    return doc.review


def helpfulness_labeler(task: TaskConfig):
    def label(doc: Document):
        y = derive_review_helpfulness(_review_of(doc), task.min_helpful_votes, task.min_unhelpful_votes)
        return None if y == EXCLUDED else float(y == HELPFUL)
    return label


def sentiment_labeler(task: TaskConfig):
    def label(doc: Document):
        return float(derive_sentiment(_review_of(doc), task.positive_ratings) == POSITIVE)
    return label


@dataclass
class SubsetResult:
    subset: str
    metrics: dict

    def to_dict(self) -> dict:
        return {"subset": self.subset, **self.metrics}


def _svm_trainer(task: TaskConfig, seed: int, subset: str):
    cfg = SvmConfig(task.svm_lambda, task.svm_epochs, seed)
    return lambda rows: train_svm(rows, cfg, subset)


def run_classification(
    rows: Sequence[FeatureRow], subsets: Sequence[str], task: TaskConfig, seed: int
) -> dict:
    """Repeated-split SVM accuracy per feature subset. Every subset sees the
    same splits (same seed), so reports can be compared pairwise."""
    p = float(np.mean([r.target > 0 for r in rows]))
    out = {
        "n_rows": len(rows),
        "positive_rate": p,
        "random": random_accuracy(p, False),
        "random_proportion_known": random_accuracy(p, True),
        "majority": max(p, 1 - p),
        "subsets": [],
    }
    for subset in subsets:
        sub_rows = select_features(rows, subset)
        rep = cross_validate(
            sub_rows, _svm_trainer(task, seed, subset), svm_accuracy,
            n=task.cv_iterations, frac=task.train_fraction, seed=seed, label=subset,
        )
        out["subsets"].append(SubsetResult(subset, rep.to_dict()).to_dict())
    return out


def run_helpful_reviews(docs, vectors, subsets, task: TaskConfig, seed: int) -> dict:
    return run_classification(document_rows(docs, vectors, helpfulness_labeler(task)),
                              subsets, task, seed)


def run_sentiment(docs, vectors, subsets, task: TaskConfig, seed: int) -> dict:
    return run_classification(document_rows(docs, vectors, sentiment_labeler(task)),
                              subsets, task, seed)


def _scored_rows(docs: Sequence[Document], vectors) -> tuple[list[FeatureRow], dict[str, str]]:
    rows = document_rows(docs, vectors, lambda d: d.score)
    products = {d.unit_id: d.product_id for d in docs}
    return rows, products


def run_helpful_sentences(
    train_docs: Sequence[Document], test_docs: Sequence[Document], vectors,
    subsets: Sequence[str], task: TaskConfig, seed: int,
) -> dict:
    """Fixed train/test files. Regression on the raw score (MSE, Pearson,
    NDCG@1 per product) and SVM on tertile labels (neutral dropped)."""
    train, _ = _scored_rows(train_docs, vectors)
    test, products = _scored_rows(test_docs, vectors)
    if task.tertile_borders is not None:
        lo, hi = task.tertile_borders
    else:
        lo, hi = compute_tertile_borders([r.target for r in train])

    def tertile(rows):
        out = []
        for r in rows:
            y = derive_tertile_label(r.target, lo, hi)
            if y != "neutral":
                out.append(FeatureRow(r.id, r.features, float(y == HELPFUL)))
        return out

    train_bin, test_bin = tertile(train), tertile(test)
    if not test_bin:
        raise DataError("no helpful/unhelpful sentences in the test file")
    p = float(np.mean([r.target for r in test_bin]))
    out = {
        "n_train": len(train), "n_test": len(test),
        "tertile_borders": [lo, hi],
        "n_train_binary": len(train_bin), "n_test_binary": len(test_bin),
        "random_proportion_known": random_accuracy(p, True),
        "subsets": [],
    }
    for subset in subsets:
        tr, te = select_features(train, subset), select_features(test, subset)
        model = train_regression(tr, task.ridge, subset)
        pred = model.predict(np.stack([r.features for r in te]), clip=(0.0, 2.0))
        gold = np.array([r.target for r in te])
        try:
            pc = pearson(pred, gold)
        except UndefinedCorrelation:
            log.warning("pearson undefined for subset %s", subset)
            pc = float("nan")
        groups: dict[str, list[tuple[float, float]]] = {}
        for r, s in zip(te, pred):
            groups.setdefault(products[r.id], []).append((float(s), r.target))
        svm = train_svm(select_features(train_bin, subset),
                        SvmConfig(task.svm_lambda, task.svm_epochs, seed), subset)
        acc = svm_accuracy(svm, select_features(test_bin, subset))
        out["subsets"].append({
            "subset": subset, "mse": mse(pred, gold), "pearson": pc,
            "ndcg_at_1": ndcg_at_k(list(groups.values()), 1), "svm_accuracy": acc,
        })
    return out


# -- single-type benchmarks --------------------------------------------------

def read_binary_labels(path: str | Path) -> dict[str, int]:
    out = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                sid, y = str(rec["sentence_id"]), int(rec["label"])
            except (ValueError, KeyError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: bad label record ({exc})") from None
            if y not in (0, 1):
                raise DataError(f"{path}:{lineno}: label must be 0 or 1")
            out[sid] = y
    return out


def _join(labels: Mapping[str, int], vectors, column: int) -> tuple[np.ndarray, np.ndarray]:
    ids = sorted(labels)
    missing = [i for i in ids if i not in vectors]
    if missing:
        raise DataError(f"{len(missing)} labeled sentence(s) have no prediction, e.g. {missing[0]!r}")
    s = np.array([vectors[i][column] for i in ids], dtype=float)
    y = np.array([labels[i] for i in ids], dtype=bool)
    return s, y


def _pick_threshold(method: str, s, y) -> float:
    if method == "grid":
        return grid_f1_threshold(s, y)
    return youden_threshold(s, y).threshold


def run_type_benchmark(
    info_type: str, labels: Mapping[str, int], vectors, task: TaskConfig, seed: int,
    test_labels: Mapping[str, int] | None = None, max_redraws: int = 10,
) -> dict:
    """Tune one type's threshold on train, score F1 and Recall@Precision on test.

    Without a test file, each iteration balances the classes (all positives,
    as many sampled negatives) and splits them. ``benchmark_train_size``
    subsamples the training part to a fixed size.
    """
    col = TYPE_INDEX[parse_type(info_type)]
    s_all, y_all = _join(labels, vectors, col)
    fixed_test = _join(test_labels, vectors, col) if test_labels is not None else None
    rng = np.random.default_rng(seed)
    f1s, thresholds = [], []
    rap: dict[float, list[float]] = {t: [] for t in PRECISION_TARGETS}
    for _ in range(task.benchmark_iterations):
        for _attempt in range(max_redraws + 1):
            if fixed_test is None:
                pos = np.flatnonzero(y_all)
                neg = np.flatnonzero(~y_all)
                k = min(len(pos), len(neg))
                chosen = rng.permutation(np.r_[rng.choice(pos, k, replace=False),
                                               rng.choice(neg, k, replace=False)])
                n_tr = int(round(task.benchmark_train_fraction * len(chosen)))
                tr, te = chosen[:n_tr], chosen[n_tr:]
                s_te, y_te = s_all[te], y_all[te]
            else:
                tr = rng.permutation(len(s_all))
                s_te, y_te = fixed_test
            if task.benchmark_train_size is not None:
                if task.benchmark_train_size > len(tr):
                    raise DataError(f"train size {task.benchmark_train_size} exceeds the "
                                    f"{len(tr)} available training examples")
                tr = tr[: task.benchmark_train_size]
            s_tr, y_tr = s_all[tr], y_all[tr]
            if 0 < y_tr.sum() < len(y_tr) and y_te.any():
                break
        else:
            raise DataError("could not draw a split with both classes in train and a positive in test")
        th = _pick_threshold(task.benchmark_method, s_tr, y_tr)
        thresholds.append(th)
        f1s.append(f1(BinaryCounts.from_arrays(s_te >= th, y_te)))
        for t in PRECISION_TARGETS:
            rap[t].append(recall_at_precision(s_te, y_te, t))

    def summary(values):
        v = np.array(values)
        ci = bootstrap_ci(np.mean, v, task.bootstrap_alpha, task.bootstrap_resamples, seed)
        return {"mean": float(v.mean()), "ci": list(ci)}

    return {
        "type": parse_type(info_type).value,
        "method": task.benchmark_method,
        "iterations": task.benchmark_iterations,
        "train_size": task.benchmark_train_size,
        "n_labeled": len(s_all),
        "f1": summary(f1s),
        "recall_at_precision": {f"{int(round(100 * t))}": summary(rap[t]) for t in PRECISION_TARGETS},
        "thresholds": thresholds,
    }


# -- corpus filters for analysis ---------------------------------------------

def filter_documents(docs: Sequence[Document], name: str | None, task: TaskConfig) -> list[Document]:
    """Select a slice of a corpus: helpful/unhelpful/positive/negative or all."""
    if not name or name == "all":
        return list(docs)
    if name in (HELPFUL, UNHELPFUL):
        if docs and docs[0].score is not None:
            lo, hi = task.tertile_borders or compute_tertile_borders([d.score for d in docs])
            return [d for d in docs if derive_tertile_label(d.score, lo, hi) == name]
        return [d for d in docs if derive_review_helpfulness(
            _review_of(d), task.min_helpful_votes, task.min_unhelpful_votes) == name]
    if name in (POSITIVE, NEGATIVE):
        return [d for d in docs if derive_sentiment(_review_of(d), task.positive_ratings) == name]
    raise DataError(f"unknown filter {name!r}; expected all, helpful, unhelpful, positive or negative")
