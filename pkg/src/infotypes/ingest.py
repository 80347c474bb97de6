"""Corpus readers, sentence splitting and task-label derivation."""
from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence
from xml.sax.saxutils import unescape

from .errors import DataError

log = logging.getLogger(__name__)

ABBREVIATIONS = frozenset(
    {
        "mr.", "mrs.", "ms.", "dr.", "prof.", "sr.", "jr.", "st.", "mt.",
        "etc.", "vs.", "e.g.", "i.e.", "inc.", "ltd.", "co.", "corp.",
        "approx.", "no.", "fig.", "vol.", "ft.", "oz.", "lb.", "lbs.",
    }
)
_ENTITIES = {"&quot;": '"', "&apos;": "'"}
OPENING_QUOTES = "\"'“‘"
CLOSING_MARKS = "\"')]”’"

# terminal punctuation run, optional closing quotes/brackets, whitespace, then a sentence opener
_BOUNDARY = re.compile(
    r"[.!?]+[" + re.escape(CLOSING_MARKS) + r"]*(?=\s+[A-Z0-9" + re.escape(OPENING_QUOTES) + r"])"
)
_WORD = re.compile(r"\w+")


def normalize_text(text: str) -> str:
    """Decode the five XML entities, trim, collapse whitespace runs."""
    return " ".join(unescape(text, _ENTITIES).split())


def _is_abbreviation(text: str, end: int) -> bool:
    # token ending at the period, e.g. "(e.g." -> "e.g."
    start = text.rfind(" ", 0, end) + 1
    token = text[start:end].lstrip("(\"'“‘[").lower()
    return token in ABBREVIATIONS


def split_sentences(text: str) -> list[str]:
    """Rule-based sentence segmentation.

    Splits after runs of '.', '!' or '?' that are followed by whitespace and
    an uppercase letter, digit or opening quote, unless the token ending in
    '.' is a known abbreviation. Segments with fewer than two word tokens are
    merged into the preceding segment.
    """
    norm = normalize_text(text)
    if not norm:
        return []
    pieces: list[str] = []
    start = 0
    for m in _BOUNDARY.finditer(norm):
        punct_end = m.start() + len(m.group(0).rstrip(CLOSING_MARKS))
        if norm[punct_end - 1] == "." and _is_abbreviation(norm, punct_end):
            continue
        pieces.append(norm[start:m.end()].strip())
        start = m.end()
    pieces.append(norm[start:].strip())

    out: list[str] = []
    for p in pieces:
        if not p:
            continue
        if out and len(_WORD.findall(p)) < 2:
            out[-1] = f"{out[-1]} {p}"
        else:
            out.append(p)
    return out


@dataclass(frozen=True)
class Review:
    review_id: str
    product_id: str
    category_id: str
    text: str
    rating: int | None = None
    helpful_votes: int | None = None
    unhelpful_votes: int | None = None

    def __post_init__(self):
        if self.rating is not None and self.rating not in (1, 2, 3, 4, 5):
            raise DataError(f"review {self.review_id}: rating {self.rating} not in 1..5")
        for name in ("helpful_votes", "unhelpful_votes"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise DataError(f"review {self.review_id}: negative {name}")


@dataclass(frozen=True)
class Sentence:
    sentence_id: str
    unit_id: str
    position: int
    text: str
    category_id: str = "general"
    product_id: str = ""


@dataclass(frozen=True)
class SummaryDoc:
    product_id: str
    verdict: tuple[str, ...]
    pros: tuple[str, ...]
    cons: tuple[str, ...]
    category_id: str = "general"

    def sentences(self) -> list[Sentence]:
        """Summary sentences in verdict -> pros -> cons order."""
        texts = [normalize_text(s) for s in (*self.verdict, *self.pros, *self.cons)]
        texts = [t for t in texts if t]
        uid = f"summary:{self.product_id}"
        return [
            Sentence(f"{uid}#{i}", uid, i, t, self.category_id, self.product_id)
            for i, t in enumerate(texts)
        ]


@dataclass(frozen=True)
class ScoredSentence:
    sentence: Sentence
    helpfulness_score: float

    def __post_init__(self):
        if not 0.0 <= self.helpfulness_score <= 2.0:
            raise DataError(
                f"sentence {self.sentence.sentence_id}: score {self.helpfulness_score} outside [0, 2]"
            )


def review_sentences(review: Review) -> list[Sentence]:
    return [
        Sentence(f"{review.review_id}#{i}", review.review_id, i, t, review.category_id, review.product_id)
        for i, t in enumerate(split_sentences(review.text))
    ]


def _iter_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise DataError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, rec


def _require(rec: dict, key: str, where: str):
    if key not in rec:
        raise DataError(f"{where}: missing field {key!r}")
    return rec[key]


def _opt_int(rec: dict, key: str) -> int | None:
    v = rec.get(key)
    return None if v is None else int(v)


def read_reviews(path: str | Path) -> list[Review]:
    reviews: list[Review] = []
    seen: set[str] = set()
    for lineno, rec in _iter_jsonl(path):
        where = f"{path}:{lineno}"
        rid = str(_require(rec, "review_id", where))
        if rid in seen:
            raise DataError(f"{where}: duplicate review_id {rid!r}")
        seen.add(rid)
        reviews.append(
            Review(
                review_id=rid,
                product_id=str(_require(rec, "product_id", where)),
                category_id=str(_require(rec, "category_id", where)),
                text=str(_require(rec, "text", where)),
                rating=_opt_int(rec, "rating"),
                helpful_votes=_opt_int(rec, "helpful_votes"),
                unhelpful_votes=_opt_int(rec, "unhelpful_votes"),
            )
        )
    return reviews


def read_summaries(path: str | Path) -> list[SummaryDoc]:
    docs = []
    for lineno, rec in _iter_jsonl(path):
        where = f"{path}:{lineno}"
        docs.append(
            SummaryDoc(
                product_id=str(_require(rec, "product_id", where)),
                verdict=tuple(rec.get("verdict") or ()),
                pros=tuple(rec.get("pros") or ()),
                cons=tuple(rec.get("cons") or ()),
                category_id=str(rec.get("category_id", "general")),
            )
        )
    return docs


def text_sentence_id(text: str) -> str:
    return "s:" + hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def read_scored_sentences(path: str | Path) -> list[ScoredSentence]:
    """Read {sentence, product_id, helpfulness_score} records.

    Records without a sentence_id get a content-derived one so separately
    classified train and test files line up with their predictions.
    """
    out = []
    for lineno, rec in _iter_jsonl(path):
        where = f"{path}:{lineno}"
        raw = rec.get("sentence", rec.get("text"))
        if raw is None:
            raise DataError(f"{where}: missing field 'sentence'")
        text = normalize_text(str(raw))
        if not text:
            raise DataError(f"{where}: empty sentence")
        sid = str(rec.get("sentence_id") or text_sentence_id(text))
        product = str(_require(rec, "product_id", where))
        sent = Sentence(sid, sid, 0, text, str(rec.get("category_id", "general")), product)
        out.append(ScoredSentence(sent, float(_require(rec, "helpfulness_score", where))))
    return out


@dataclass
class Document:
    """A review, summary or standalone sentence, as a unit of aggregation."""

    unit_id: str
    category_id: str
    product_id: str
    sentences: list[Sentence] = field(default_factory=list)
    review: Review | None = None
    score: float | None = None


def load_documents(path: str | Path, kind: str) -> list[Document]:
    if kind == "reviews":
        return [
            Document(r.review_id, r.category_id, r.product_id, review_sentences(r), review=r)
            for r in read_reviews(path)
        ]
    if kind == "summaries":
        return [
            Document(f"summary:{s.product_id}", s.category_id, s.product_id, s.sentences())
            for s in read_summaries(path)
        ]
    if kind == "scored":
        return [
            Document(s.sentence.sentence_id, s.sentence.category_id, s.sentence.product_id,
                     [s.sentence], score=s.helpfulness_score)
            for s in read_scored_sentences(path)
        ]
    raise DataError(f"unknown corpus kind {kind!r}; expected reviews, summaries or scored")


# -- label derivation ------------------------------------------------------

HELPFUL, UNHELPFUL, EXCLUDED, NEUTRAL = "helpful", "unhelpful", "excluded", "neutral"
POSITIVE, NEGATIVE = "positive", "negative"


def derive_review_helpfulness(
    review: Review, min_helpful: int = 9, min_unhelpful: int = 3
) -> str:
    h, u = review.helpful_votes, review.unhelpful_votes
    if h is None or u is None:
        log.warning("review %s has no vote counts; excluded", review.review_id)
        return EXCLUDED
    if h >= min_helpful and u == 0:
        return HELPFUL
    if u >= min_unhelpful and h == 0:
        return UNHELPFUL
    return EXCLUDED


def derive_sentiment(review: Review, positive_ratings: Sequence[int] = (4, 5)) -> str:
    if review.rating is None:
        raise DataError(f"review {review.review_id} has no rating and cannot be labeled")
    return POSITIVE if review.rating in positive_ratings else NEGATIVE


def compute_tertile_borders(scores: Sequence[float]) -> tuple[float, float]:
    """Nearest-rank 33.33rd and 66.67th percentiles."""
    xs = sorted(float(s) for s in scores)
    n = len(xs)
    if n < 3:
        raise DataError(f"need at least 3 scores for tertile borders, got {n}")
    lo_rank = -(-n // 3)
    hi_rank = -(-2 * n // 3)
    return xs[lo_rank - 1], xs[hi_rank - 1]


def derive_tertile_label(score: float | ScoredSentence, lo: float, hi: float) -> str:
    if isinstance(score, ScoredSentence):
        score = score.helpfulness_score
    if lo > hi:
        raise ValueError(f"tertile borders out of order: {lo} > {hi}")
    if score >= hi:
        return HELPFUL
    if score <= lo:
        return UNHELPFUL
    return NEUTRAL
