"""Profiles over classified documents: corpus means, comparisons, category and
positional (rhetorical structure) views, plus tidy table emission."""
from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError
from .metrics import UndefinedCorrelation, pearson
from .typology import N_TYPES, TYPE_NAMES

log = logging.getLogger(__name__)

TIDY_COLUMNS = ("unit", "type", "value")


@dataclass
class Profile:
    vector: np.ndarray
    n_units: int
    level: str = "review-set"


@dataclass
class PositionalProfile:
    length: int
    vectors: np.ndarray  # (length, 24)
    n_documents: int


def aggregate_mean(vectors: Sequence[np.ndarray]) -> np.ndarray:
    if len(vectors) == 0:
        raise DataError("cannot average an empty list of vectors")
    arr = np.asarray(vectors, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != N_TYPES:
        raise DataError(f"expected vectors of length {N_TYPES}")
    return arr.mean(axis=0)


def corpus_profile(docs: Sequence[Sequence[np.ndarray]], level: str = "review-set") -> Profile:
    """Two-stage mean: sentences -> document vector, documents -> corpus vector."""
    doc_vectors = []
    skipped = 0
    for doc in docs:
        if len(doc) == 0:
            skipped += 1
            continue
        doc_vectors.append(aggregate_mean(doc))
    if skipped:
        log.warning("%d document(s) without classified sentences excluded", skipped)
    if not doc_vectors:
        raise DataError("no documents with classified sentences")
    return Profile(aggregate_mean(doc_vectors), len(doc_vectors), level)


@dataclass
class Comparison:
    deltas: list[tuple[str, float]]  # (type, b - a), largest |delta| first
    pearson: float


class UndefinedComparison(UndefinedCorrelation):
    """Correlation is undefined; the per-type deltas are still attached."""

    def __init__(self, message: str, deltas: list[tuple[str, float]]):
        super().__init__(message)
        self.deltas = deltas


def compare_profiles(a: Profile, b: Profile) -> Comparison:
    va, vb = np.asarray(a.vector, float), np.asarray(b.vector, float)
    if va.shape != vb.shape:
        raise DataError("profiles have different dimensions")
    delta = vb - va
    order = sorted(range(len(delta)), key=lambda i: (-abs(delta[i]), i))
    deltas = [(TYPE_NAMES[i], float(delta[i])) for i in order]
    try:
        r = pearson(va, vb)
    except UndefinedCorrelation as exc:
        raise UndefinedComparison(str(exc), deltas) from None
    return Comparison(deltas, r)


def length_histogram(docs: Iterable[Sequence]) -> dict[int, int]:
    return dict(sorted(Counter(len(d) for d in docs).items()))


def positional_profile(docs: Sequence[Sequence[np.ndarray]], length: int) -> PositionalProfile:
    """Mean sentence vector at each position over documents of exactly ``length`` sentences."""
    chosen = [np.asarray(d, dtype=float) for d in docs if len(d) == length]
    if not chosen:
        hist = ", ".join(f"{k}: {v}" for k, v in length_histogram(docs).items())
        raise DataError(f"no documents with {length} sentences; available lengths {{{hist}}}")
    return PositionalProfile(length, np.mean(np.stack(chosen), axis=0), len(chosen))


def category_profiles(
    grouped: Mapping[str, Sequence[Sequence[np.ndarray]]], level: str = "review-set"
) -> dict[str, Profile]:
    """corpus_profile per category, in sorted category order; empty categories are dropped."""
    out = {}
    for cat in sorted(grouped):
        docs = [d for d in grouped[cat] if len(d) > 0]
        if not docs:
            log.warning("category %s has no classified documents; omitted", cat)
            continue
        out[cat] = corpus_profile(docs, level)
    return out


def visible_types(matrix: np.ndarray, min_value: float = 0.2) -> list[str]:
    """Types whose value exceeds ``min_value`` in at least one row of the (rows, 24) matrix."""
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    return [t for i, t in enumerate(TYPE_NAMES) if np.any(m[:, i] > min_value)]


def tidy_rows(units: Mapping[str, np.ndarray], types: Sequence[str] | None = None) -> list[tuple[str, str, float]]:
    keep = set(types) if types is not None else None
    rows = []
    for unit, vec in units.items():
        for t, v in zip(TYPE_NAMES, np.asarray(vec, dtype=float)):
            if keep is None or t in keep:
                rows.append((unit, t, float(v)))
    return rows


def write_tidy(path: str | Path, rows: Iterable[Sequence], columns: Sequence[str] = TIDY_COLUMNS) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(columns)
        for r in rows:
            w.writerow([f"{x:.6f}" if isinstance(x, float) else x for x in r])
