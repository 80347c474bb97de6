"""Evaluation math: classification and ranking metrics, agreement, random
baselines and bootstrap intervals.

Zero-denominator convention, used everywhere: precision, recall and F1 are 0
when their denominator is 0.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .typology import GROUP_NAMES, TYPE_NAMES, coarse_project_labels, parse_type

log = logging.getLogger(__name__)


class UndefinedCorrelation(ValueError):
    pass


@dataclass(frozen=True)
class BinaryCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @classmethod
    def from_arrays(cls, predicted, gold) -> "BinaryCounts":
        p = np.asarray(predicted, dtype=bool)
        g = np.asarray(gold, dtype=bool)
        return cls(int(np.sum(p & g)), int(np.sum(p & ~g)), int(np.sum(~p & g)), int(np.sum(~p & ~g)))


def precision(c: BinaryCounts) -> float:
    d = c.tp + c.fp
    return c.tp / d if d else 0.0


def recall(c: BinaryCounts) -> float:
    d = c.tp + c.fn
    return c.tp / d if d else 0.0


def f1_from_pr(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def f1(c: BinaryCounts) -> float:
    # integer form, so equal F1 values compare equal when breaking ties
    d = 2 * c.tp + c.fp + c.fn
    return 2 * c.tp / d if c.tp else 0.0


def macro_f1(per_type_f1: Sequence[float]) -> float:
    vals = np.asarray(per_type_f1, dtype=float)
    if vals.size == 0:
        raise ValueError("macro_f1 of no values")
    return float(vals.mean())


def accuracy(predicted, gold) -> float:
    p, g = np.asarray(predicted), np.asarray(gold)
    if p.shape != g.shape or p.size == 0:
        raise ValueError("accuracy needs two equal-length, non-empty sequences")
    return float(np.mean(p == g))


def mse(predicted, gold) -> float:
    p, g = np.asarray(predicted, dtype=float), np.asarray(gold, dtype=float)
    if p.shape != g.shape or p.size == 0:
        raise ValueError("mse needs two equal-length, non-empty sequences")
    return float(np.mean((p - g) ** 2))


def pearson(xs, ys) -> float:
    x, y = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("pearson needs two equal-length sequences of length >= 2")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelation("correlation undefined: an input has zero variance")
    r = float(dx @ dy) / np.sqrt(sxx * syy)
    return float(np.clip(r, -1.0, 1.0))


def _dcg(gains: np.ndarray, k: int) -> float:
    g = gains[:k]
    return float(np.sum(g / np.log2(np.arange(2, g.size + 2))))


def ndcg_at_k(groups: Iterable[Sequence[tuple[float, float]]], k: int) -> float:
    """Mean NDCG@k over groups of (predicted_score, gain) pairs.

    Items are ranked by predicted score, descending (stable on ties). A group
    whose gains are all zero scores 1.0.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = []
    for group in groups:
        if len(group) == 0:
            raise ValueError("empty NDCG group")
        pred = np.array([p for p, _ in group], dtype=float)
        gain = np.array([g for _, g in group], dtype=float)
        if np.any(gain < 0):
            raise ValueError("NDCG gains must be non-negative")
        ideal = _dcg(np.sort(gain)[::-1], k)
        if ideal == 0:
            scores.append(1.0)
            continue
        order = np.argsort(-pred, kind="stable")
        scores.append(_dcg(gain[order], k) / ideal)
    if not scores:
        raise ValueError("ndcg_at_k needs at least one group")
    return float(np.mean(scores))


def recall_at_precision(scores, labels, target_precision: float) -> float:
    """Best recall over thresholds (predict score >= t) whose precision meets the target."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=bool)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise ValueError("recall_at_precision needs at least one positive")
    order = np.argsort(-s, kind="stable")
    s_sorted, y_sorted = s[order], y[order]
    tp = np.cumsum(y_sorted)
    k = np.arange(1, s.size + 1)
    # operating points sit at the last index of each run of equal scores
    last = np.r_[s_sorted[1:] != s_sorted[:-1], True]
    prec = tp[last] / k[last]
    rec = tp[last] / n_pos
    ok = prec >= target_precision
    return float(rec[ok].max()) if ok.any() else 0.0


def cohen_kappa(
    ann_a: Sequence[Iterable[str]], ann_b: Sequence[Iterable[str]],
    types: Sequence[str] = TYPE_NAMES,
) -> float:
    """Multi-label agreement: binary kappa per type, averaged over types where it is defined."""
    if len(ann_a) != len(ann_b):
        raise ValueError("annotation lists differ in length")
    if not ann_a:
        raise ValueError("no annotations")
    sets_a = [set(map(str, a)) for a in ann_a]
    sets_b = [set(map(str, b)) for b in ann_b]
    kappas = []
    for t in types:
        a = np.array([t in s for s in sets_a])
        b = np.array([t in s for s in sets_b])
        p_o = float(np.mean(a == b))
        pa, pb = a.mean(), b.mean()
        p_e = float(pa * pb + (1 - pa) * (1 - pb))
        if p_e >= 1.0:
            log.warning("kappa undefined for type %s (constant marginals); skipped", t)
            continue
        kappas.append((p_o - p_e) / (1 - p_e))
    if not kappas:
        raise ValueError("kappa undefined for every type")
    return float(np.mean(kappas))


# -- random baselines --------------------------------------------------------

def random_accuracy(p: float, proportion_known: bool) -> float:
    """Expected accuracy of a guesser on binary labels with positive rate p."""
    if not 0 <= p <= 1:
        raise ValueError("proportion must be in [0, 1]")
    return p * p + (1 - p) * (1 - p) if proportion_known else 0.5


def random_type_f1(q: float) -> float:
    """Expected per-type F1 of a 50-50 guesser at prevalence q, averaged over
    the positive and negative class (each class contributes share/(share+0.5))."""
    return 0.5 * (q / (q + 0.5) + (1 - q) / (1 - q + 0.5))


def random_macro_f1(prevalences: Sequence[float]) -> float:
    qs = np.asarray(prevalences, dtype=float)
    return float(np.mean([random_type_f1(q) for q in qs]))


def random_baselines(labels, distribution_known: bool) -> float:
    """Binary labels (0/1 or bool) -> expected accuracy;
    a list of label sets -> expected 50-50 macro-F1 over the 24 types."""
    labels = list(labels)
    if labels and isinstance(labels[0], (set, frozenset, list, tuple)):
        n = len(labels)
        prev = [sum(t in set(map(str, s)) for s in labels) / n for t in TYPE_NAMES]
        return random_macro_f1(prev)
    y = np.asarray(labels, dtype=float)
    return random_accuracy(float(y.mean()), distribution_known)


def simulate_random_accuracy(
    p: float, n: int, proportion_known: bool, trials: int = 10_000, seed: int = 0
) -> tuple[float, float]:
    """Monte-Carlo mean accuracy and its standard error."""
    rng = np.random.default_rng(seed)
    gold = rng.random((trials, n)) < p
    guess_p = p if proportion_known else 0.5
    guess = rng.random((trials, n)) < guess_p
    acc = (gold == guess).mean(axis=1)
    return float(acc.mean()), float(acc.std(ddof=1) / np.sqrt(trials))


def simulate_random_macro_f1(
    positives: Sequence[int], n: int, trials: int = 10_000, seed: int = 0
) -> float:
    """Monte-Carlo macro-F1 of a 50-50 guesser against fixed gold counts."""
    rng = np.random.default_rng(seed)
    per_type = []
    for pos in positives:
        gold = np.zeros(n, dtype=bool)
        gold[:pos] = True
        guess = rng.random((trials, n)) < 0.5
        tp = (guess & gold).sum(axis=1)
        fp = (guess & ~gold).sum(axis=1)
        fn = pos - tp
        tn = (n - pos) - fp

        def _f1(tp, fp, fn):
            d = 2 * tp + fp + fn
            return np.where(d > 0, 2 * tp / np.maximum(d, 1), 0.0)

        per_type.append(np.mean(0.5 * (_f1(tp, fp, fn) + _f1(tn, fn, fp))))
    return float(np.mean(per_type))


# -- bootstrap ---------------------------------------------------------------

def bootstrap_ci(
    metric_fn: Callable[[np.ndarray], float],
    samples,
    alpha: float = 0.025,
    n_resamples: int = 1000,
    seed: int = 0,
) -> tuple[float, float]:
    """Percentile interval [alpha, 1 - alpha] of metric_fn over resamples with replacement."""
    data = np.asarray(samples)
    if len(data) == 0:
        raise ValueError("bootstrap_ci needs samples")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(data), size=(n_resamples, len(data)))
    stats = np.array([metric_fn(data[i]) for i in idx], dtype=float)
    lo, hi = np.quantile(stats, [alpha, 1 - alpha])
    return float(lo), float(hi)


# -- multi-label evaluation report --------------------------------------------

@dataclass
class EvalReport:
    types: list[str]
    precision: list[float]
    recall: list[float]
    f1: list[float]
    support: list[int]
    predicted: list[int]
    macro_f1: float
    coarse_f1: dict[str, float] = field(default_factory=dict)
    coarse_macro_f1: float = 0.0
    n_examples: int = 0

    def to_dict(self) -> dict:
        return {
            "n_examples": self.n_examples,
            "macro_f1": self.macro_f1,
            "macro_recall": float(np.mean(self.recall)),
            "macro_precision": float(np.mean(self.precision)),
            "coarse_macro_f1": self.coarse_macro_f1,
            "per_type": [
                {"type": t, "f1": f, "recall": r, "precision": p, "support": s, "predicted": k}
                for t, f, r, p, s, k in zip(self.types, self.f1, self.recall, self.precision,
                                            self.support, self.predicted)
            ],
            "coarse": self.coarse_f1,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        w = max(len(t) for t in self.types + ["ALL (Avg.)"])
        lines = [f"{'Type':<{w}}  {'F1':>6}  {'Recall':>6}  {'Prec.':>6}  {'Gold':>5}  {'Pred':>5}"]
        for t, f, r, p, s, k in zip(self.types, self.f1, self.recall, self.precision,
                                    self.support, self.predicted):
            lines.append(f"{t:<{w}}  {100*f:6.1f}  {100*r:6.1f}  {100*p:6.1f}  {s:5d}  {k:5d}")
        lines.append(
            f"{'ALL (Avg.)':<{w}}  {100*self.macro_f1:6.1f}  {100*np.mean(self.recall):6.1f}  "
            f"{100*np.mean(self.precision):6.1f}  {self.n_examples:5d}"
        )
        lines.append(f"coarse-grained macro-F1: {100*self.coarse_macro_f1:.1f}")
        return "\n".join(lines)


def evaluate_label_sets(
    gold: Sequence[Iterable[str]], predicted: Sequence[Iterable[str]]
) -> EvalReport:
    if len(gold) != len(predicted):
        raise ValueError("gold and predicted differ in length")
    gsets = [{parse_type(t).value for t in g} for g in gold]
    psets = [{parse_type(t).value for t in p} for p in predicted]
    prec, rec, f1s, sup, npred = [], [], [], [], []
    for t in TYPE_NAMES:
        c = BinaryCounts.from_arrays([t in p for p in psets], [t in g for g in gsets])
        prec.append(precision(c))
        rec.append(recall(c))
        f1s.append(f1(c))
        sup.append(c.tp + c.fn)
        npred.append(c.tp + c.fp)
    gc = [coarse_project_labels(g) for g in gsets]
    pc = [coarse_project_labels(p) for p in psets]
    coarse = {
        g: f1(BinaryCounts.from_arrays([g in p for p in pc], [g in s for s in gc]))
        for g in GROUP_NAMES
    }
    return EvalReport(
        types=list(TYPE_NAMES), precision=prec, recall=rec, f1=f1s, support=sup,
        predicted=npred, macro_f1=macro_f1(f1s), coarse_f1=coarse,
        coarse_macro_f1=macro_f1(list(coarse.values())), n_examples=len(gsets),
    )
