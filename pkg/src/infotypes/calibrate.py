"""Per-type threshold tuning on a labeled development set, and Youden's J for
single-type benchmarks."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError
from .metrics import BinaryCounts, f1
from .typology import TYPE_NAMES, labels_to_indicator, parse_type, type_vector

log = logging.getLogger(__name__)

THRESHOLD_GRID: tuple[float, ...] = tuple(k / 10 for k in range(1, 11))


@dataclass
class LabeledExample:
    sentence_id: str
    gold: frozenset[str]
    vector: np.ndarray

    def __post_init__(self):
        self.gold = frozenset(parse_type(t).value for t in self.gold)
        if not self.gold:
            raise DataError(f"example {self.sentence_id}: gold label set is empty")
        self.vector = type_vector(self.vector)


@dataclass
class ThresholdProfile:
    thresholds: dict[str, float]
    provenance: str = ""
    f1: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        missing = [t for t in TYPE_NAMES if t not in self.thresholds]
        if missing:
            raise DataError(f"threshold profile is missing types: {', '.join(missing)}")
        for t, th in self.thresholds.items():
            parse_type(t)
            if not any(abs(th - g) < 1e-9 for g in THRESHOLD_GRID):
                raise DataError(f"threshold {th} for {t} is not on the 0.1..1.0 grid")

    def as_array(self) -> np.ndarray:
        return np.array([self.thresholds[t] for t in TYPE_NAMES])

    def to_json(self) -> str:
        return json.dumps({"provenance": self.provenance, "thresholds": self.thresholds}, indent=2)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ThresholdProfile":
        rec = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls({k: float(v) for k, v in rec["thresholds"].items()}, rec.get("provenance", ""))


def _f1_at(probs: np.ndarray, gold: np.ndarray, theta: float) -> float:
    return f1(BinaryCounts.from_arrays(probs >= theta, gold))


def optimal_thresholds(
    dev: Sequence[LabeledExample], provenance: str = ""
) -> ThresholdProfile:
    """Pick, per type, the grid threshold with the highest dev F1 (smallest wins ties)."""
    if not dev:
        raise DataError("development set is empty")
    X = np.stack([ex.vector for ex in dev])
    G = np.stack([labels_to_indicator(ex.gold) for ex in dev]).astype(bool)
    thresholds, scores = {}, {}
    for i, t in enumerate(TYPE_NAMES):
        if not G[:, i].any():
            log.warning("type %s has no gold positives in the dev set; threshold set to 1.0", t)
            thresholds[t], scores[t] = 1.0, 0.0
            continue
        best_theta, best = THRESHOLD_GRID[0], -1.0
        for theta in THRESHOLD_GRID:
            score = _f1_at(X[:, i], G[:, i], theta)
            if score > best:
                best_theta, best = theta, score
        thresholds[t], scores[t] = best_theta, best
    return ThresholdProfile(thresholds, provenance, scores)


def apply_thresholds(vector, profile: ThresholdProfile) -> set[str]:
    v = np.asarray(vector, dtype=float)
    return {t for t, x, th in zip(TYPE_NAMES, v, profile.as_array()) if x >= th}


@dataclass(frozen=True)
class YoudenResult:
    threshold: float
    j: float


def youden_threshold(scores, labels) -> YoudenResult:
    """Threshold maximizing TPR - FPR for the rule 'positive iff score >= threshold'.

    Candidates are midpoints between adjacent distinct scores plus -inf and
    +inf; ties go to the smallest threshold.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=bool)
    if s.shape != y.shape or s.size == 0:
        raise DataError("scores and labels must be equal-length and non-empty")
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise DataError("Youden's J needs both classes")
    distinct = np.unique(s)
    candidates = np.r_[-np.inf, (distinct[1:] + distinct[:-1]) / 2, np.inf]
    best_t, best_j = candidates[0], -np.inf
    for t in candidates:
        pred = s >= t
        j = (pred & y).sum() / n_pos - (pred & ~y).sum() / n_neg
        if j > best_j + 1e-12:
            best_t, best_j = t, j
    return YoudenResult(float(best_t), float(best_j))


def grid_f1_threshold(scores, labels) -> float:
    """Single-type analogue of optimal_thresholds, used by the type benchmarks."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=bool)
    best_theta, best = THRESHOLD_GRID[0], -1.0
    for theta in THRESHOLD_GRID:
        score = _f1_at(s, y, theta)
        if score > best:
            best_theta, best = theta, score
    return best_theta


def labeled_examples(
    labels: Iterable[tuple[str, Iterable[str]]], vectors: dict[str, np.ndarray]
) -> list[LabeledExample]:
    """Join (sentence_id, gold) pairs with predicted vectors; unmatched ids are an error."""
    out, missing = [], []
    for sid, gold in labels:
        if sid not in vectors:
            missing.append(sid)
            continue
        out.append(LabeledExample(sid, frozenset(gold), vectors[sid]))
    if missing:
        raise DataError(
            f"{len(missing)} labeled sentence(s) have no prediction, e.g. {missing[0]!r}"
        )
    return out



def read_type_labels(path: str | Path) -> list[tuple[str, list[str]]]:
    """JSONL records {"sentence_id": ..., "types": [...]}, in file order."""
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out.append((str(rec["sentence_id"]), [str(t) for t in rec["types"]]))
            except (ValueError, KeyError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: bad label record ({exc})") from None
    return out
