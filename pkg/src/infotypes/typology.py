"""The 24 review-sentence information types, their coarse groups and prompt fragments."""
from __future__ import annotations

import re
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import DataError


class InfoType(str, Enum):
    OPINION = "opinion"
    OPINION_WITH_REASON = "opinion_with_reason"
    IMPROVEMENT_DESIRE = "improvement_desire"
    COMPARATIVE = "comparative"
    COMPARATIVE_GENERAL = "comparative_general"
    BUY_DECISION = "buy_decision"
    SPECULATIVE = "speculative"
    PERSONAL_USAGE = "personal_usage"
    SITUATION = "situation"
    SETUP = "setup"
    TIP = "tip"
    PRODUCT_USAGE = "product_usage"
    PRODUCT_DESCRIPTION = "product_description"
    PRICE = "price"
    COMPATIBILITY = "compatibility"
    PERSONAL_INFO = "personal_info"
    GENERAL_INFO = "general_info"
    COMPARATIVE_SELLER = "comparative_seller"
    SELLER_EXPERIENCE = "seller_experience"
    DELIVERY_EXPERIENCE = "delivery_experience"
    IMAGERY = "imagery"
    SARCASM = "sarcasm"
    RHETORICAL = "rhetorical"
    INAPPROPRIATE = "inappropriate"

    def __str__(self) -> str:
        return self.value


# canonical order; every TypeVector is indexed by this
TYPES: tuple[InfoType, ...] = tuple(InfoType)
TYPE_NAMES: tuple[str, ...] = tuple(t.value for t in TYPES)
N_TYPES = len(TYPES)
TYPE_INDEX: dict[InfoType, int] = {t: i for i, t in enumerate(TYPES)}

GROUPS: dict[str, tuple[InfoType, ...]] = {
    "subjective": (
        InfoType.OPINION,
        InfoType.OPINION_WITH_REASON,
        InfoType.IMPROVEMENT_DESIRE,
        InfoType.BUY_DECISION,
        InfoType.SPECULATIVE,
        InfoType.SELLER_EXPERIENCE,
        InfoType.DELIVERY_EXPERIENCE,
    ),
    "opinions": (InfoType.OPINION, InfoType.OPINION_WITH_REASON),
    "objective": (
        InfoType.COMPARATIVE,
        InfoType.COMPARATIVE_GENERAL,
        InfoType.PERSONAL_USAGE,
        InfoType.SITUATION,
        InfoType.SETUP,
        InfoType.TIP,
        InfoType.PRODUCT_USAGE,
        InfoType.PRODUCT_DESCRIPTION,
        InfoType.PRICE,
        InfoType.COMPATIBILITY,
        InfoType.GENERAL_INFO,
        InfoType.COMPARATIVE_SELLER,
    ),
    "description": (
        InfoType.SETUP,
        InfoType.TIP,
        InfoType.PRODUCT_USAGE,
        InfoType.PRODUCT_DESCRIPTION,
        InfoType.PRICE,
        InfoType.COMPATIBILITY,
    ),
    "comparisons": (
        InfoType.COMPARATIVE,
        InfoType.COMPARATIVE_GENERAL,
        InfoType.COMPARATIVE_SELLER,
    ),
    "personal": (InfoType.PERSONAL_USAGE, InfoType.PERSONAL_INFO),
    "non_product": (
        InfoType.PERSONAL_INFO,
        InfoType.GENERAL_INFO,
        InfoType.COMPARATIVE_SELLER,
        InfoType.SELLER_EXPERIENCE,
        InfoType.DELIVERY_EXPERIENCE,
    ),
    "stylistic": (
        InfoType.IMAGERY,
        InfoType.SARCASM,
        InfoType.RHETORICAL,
        InfoType.INAPPROPRIATE,
    ),
}
GROUP_NAMES: tuple[str, ...] = tuple(GROUPS)
N_GROUPS = len(GROUPS)

_GROUP_INDEX = [np.array([TYPE_INDEX[t] for t in GROUPS[g]]) for g in GROUP_NAMES]


def _read_tsv(name: str) -> dict[str, str]:
    text = resources.files("infotypes.data").joinpath(name).read_text(encoding="utf-8")
    return _parse_tsv(text)


def _parse_tsv(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        key, _, value = line.partition("\t")
        out[key.strip()] = value.strip()
    return out


_QUESTIONS: dict[InfoType, str] = {InfoType(k): v for k, v in _read_tsv("typology.tsv").items()}
_CATEGORIES: dict[str, str] = _read_tsv("categories.tsv")


def parse_type(name: str | InfoType) -> InfoType:
    try:
        return InfoType(name)
    except ValueError:
        raise ValueError(
            f"unknown information type {name!r}; valid types: {', '.join(TYPE_NAMES)}"
        ) from None


def question_for(info_type: InfoType | str) -> str:
    """Prompt question asked of the model for one type."""
    return _QUESTIONS[parse_type(info_type)]


class Typology:
    """Question and category-subprompt tables, optionally with overrides.

    The 24 types and their grouping are fixed; only the question text and
    the category subprompts can be replaced.
    """

    def __init__(
        self,
        questions: Mapping[str, str] | None = None,
        categories: Mapping[str, str] | None = None,
    ):
        self.questions = dict(_QUESTIONS)
        for name, q in (questions or {}).items():
            if not q or not q.strip():
                raise ValueError(f"empty question for type {name!r}")
            self.questions[parse_type(name)] = q.strip()
        self.categories = dict(_CATEGORIES)
        for key, sub in (categories or {}).items():
            if not sub or not sub.strip():
                raise ValueError(f"empty subprompt for category {key!r}")
            self.categories[normalize_category(key)] = sub.strip()

    @classmethod
    def from_files(
        cls, questions_file: str | Path | None = None, categories_file: str | Path | None = None
    ) -> "Typology":
        q = _parse_tsv(Path(questions_file).read_text(encoding="utf-8")) if questions_file else None
        c = _parse_tsv(Path(categories_file).read_text(encoding="utf-8")) if categories_file else None
        return cls(q, c)

    def question(self, info_type: InfoType | str) -> str:
        return self.questions[parse_type(info_type)]

    def subprompt(self, category_id: str) -> str:
        key = normalize_category(category_id)
        try:
            return self.categories[key]
        except KeyError:
            raise DataError(
                f"no subprompt registered for category {category_id!r}; "
                f"known: {', '.join(sorted(self.categories))}"
            ) from None


def normalize_category(category_id: str) -> str:
    """'Toys and Games' -> 'toys_and_games'."""
    key = category_id.strip().lower().replace("&", "and")
    return re.sub(r"[^a-z0-9]+", "_", key).strip("_")


def category_subprompt(category_id: str) -> str:
    return Typology().subprompt(category_id)


def type_vector(values: Iterable[float]) -> np.ndarray:
    """Validate and return a 24-dim probability vector."""
    v = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
    if v.shape != (N_TYPES,):
        raise ValueError(f"type vector must have {N_TYPES} entries, got shape {v.shape}")
    if np.any(~np.isfinite(v)) or np.any(v < 0) or np.any(v > 1):
        raise ValueError("type vector entries must lie in [0, 1]")
    return v


def coarse_project(vector: np.ndarray) -> np.ndarray:
    """Group value = max over member type probabilities. Works on (24,) or (n, 24)."""
    v = np.asarray(vector, dtype=float)
    return np.stack([v[..., idx].max(axis=-1) for idx in _GROUP_INDEX], axis=-1)


def coarse_project_labels(labels: Iterable[InfoType | str]) -> set[str]:
    present = {parse_type(t) for t in labels}
    return {g for g in GROUP_NAMES if present.intersection(GROUPS[g])}


def labels_to_indicator(labels: Iterable[InfoType | str]) -> np.ndarray:
    v = np.zeros(N_TYPES)
    for t in labels:
        v[TYPE_INDEX[parse_type(t)]] = 1.0
    return v


def resolve_subset(name: str) -> tuple[InfoType, ...]:
    """Resolve a group name, 'all', a type name, or a '+'-joined type list."""
    key = name.strip()
    if key == "all":
        return TYPES
    if key in GROUPS:
        members = set(GROUPS[key])
        return tuple(t for t in TYPES if t in members)
    parts = [p.strip() for p in key.split("+") if p.strip()]
    if not parts:
        raise ValueError("empty feature subset")
    try:
        chosen = {InfoType(p) for p in parts}
    except ValueError:
        raise ValueError(
            f"unknown feature subset {name!r}; valid names: all, coarse, "
            f"{', '.join(GROUP_NAMES)}, or '+'-joined types from: {', '.join(TYPE_NAMES)}"
        ) from None
    return tuple(t for t in TYPES if t in chosen)
