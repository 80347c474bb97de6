"""Per-type prompting, repeated querying and the prediction cache."""
from __future__ import annotations

import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InfoTypesError, LowValidityError
from .ingest import Sentence
from .llm import (
    NO,
    YES,
    CompletionClient,
    CompletionRequest,
    ModelConfig,
    parse_yes_no,
    prompt_sha256,
)
from .typology import N_TYPES, TYPES, InfoType, Typology, parse_type

log = logging.getLogger(__name__)

PROMPT_TEMPLATE = (
    "Given that this sentence is from a product review about {subprompt}, {question}? "
    'Answer yes or no. The sentence is: "{sentence}"'
)
DEFAULT_REPETITIONS = 10


def _typographic_quotes(text: str) -> str:
    out, opening = [], True
    for ch in text:
        if ch == '"':
            out.append("“" if opening else "”")
            opening = not opening
        else:
            out.append(ch)
    return "".join(out)


def build_prompt(sentence: str, subprompt: str, question: str) -> str:
    """Fill the fixed template. Straight double quotes in the sentence become
    typographic quotes so the quoted sentence stays unambiguous."""
    if not sentence:
        raise ValueError("empty sentence")
    return PROMPT_TEMPLATE.format(
        subprompt=subprompt, question=question, sentence=_typographic_quotes(sentence)
    )


def prompt_for(sentence: str, category_id: str, info_type: InfoType | str,
               typology: Typology | None = None) -> str:
    typology = typology or Typology()
    return build_prompt(sentence, typology.subprompt(category_id), typology.question(info_type))


def min_valid(n: int) -> int:
    return -(-n // 2)


# -- cache -----------------------------------------------------------------

@dataclass(frozen=True)
class CacheKey:
    prompt_sha256: str
    info_type: str
    model_id: str
    temperature: float
    n_repetitions: int


class PredictionCache:
    """Append-only JSON-lines store of (yes_count, valid_count) per query.

    The whole file is indexed in memory on open; later lines win. Writes go
    through one lock so concurrent workers never interleave records.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self._index: dict[CacheKey, tuple[int, int, float]] = {}
        self._lock = threading.Lock()
        if self.path and self.path.exists():
            self._load()

    def _load(self) -> None:
        with open(self.path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    key = CacheKey(rec["prompt_sha256"], rec["type"], rec["model_id"],
                                   float(rec["temperature"]), int(rec["n"]))
                    self._index[key] = (int(rec["yes"]), int(rec["valid"]), float(rec["timestamp"]))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                    # a torn final line from a crash is skipped, not fatal
                    log.warning("%s:%d: unreadable cache record skipped", self.path, lineno)

    def __len__(self) -> int:
        return len(self._index)

    def get(self, key: CacheKey) -> tuple[int, int] | None:
        hit = self._index.get(key)
        return None if hit is None else hit[:2]

    @staticmethod
    def _record(key: CacheKey, yes: int, valid: int, ts: float) -> str:
        return json.dumps({
            "prompt_sha256": key.prompt_sha256, "type": key.info_type, "model_id": key.model_id,
            "temperature": key.temperature, "n": key.n_repetitions,
            "yes": yes, "valid": valid, "timestamp": ts,
        })

    def put(self, key: CacheKey, yes: int, valid: int) -> None:
        ts = time.time()
        with self._lock:
            self._index[key] = (yes, valid, ts)
            if self.path:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as f:
                    f.write(self._record(key, yes, valid, ts) + "\n")
                    f.flush()

    def compact(self) -> None:
        """Rewrite the file with one line per key."""
        if not self.path:
            return
        with self._lock:
            tmp = self.path.with_suffix(self.path.suffix + ".tmp")
            with open(tmp, "w", encoding="utf-8") as f:
                for key, (yes, valid, ts) in self._index.items():
                    f.write(self._record(key, yes, valid, ts) + "\n")
            os.replace(tmp, self.path)


# -- scoring ---------------------------------------------------------------

@dataclass(frozen=True)
class TypeScore:
    probability: float
    yes: int
    valid: int


@dataclass
class SentencePrediction:
    sentence_id: str
    model_id: str
    temperature: float
    n_repetitions: int
    vector: np.ndarray
    valid_counts: list[int]
    failed: dict[str, tuple[int, int]] = field(default_factory=dict)

    @property
    def partial(self) -> bool:
        return bool(self.failed)

    def to_record(self) -> dict:
        return {
            "sentence_id": self.sentence_id,
            "model_id": self.model_id,
            "temperature": self.temperature,
            "n": self.n_repetitions,
            "probs": [float(x) for x in self.vector],
            "valid_counts": list(self.valid_counts),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "SentencePrediction":
        probs = np.asarray(rec["probs"], dtype=float)
        if probs.shape != (N_TYPES,):
            raise ValueError(f"prediction {rec.get('sentence_id')!r} has {probs.size} probabilities")
        return cls(str(rec["sentence_id"]), rec["model_id"], float(rec["temperature"]),
                   int(rec["n"]), probs, [int(c) for c in rec["valid_counts"]])


def score_type(
    sentence: str,
    category_id: str,
    info_type: InfoType | str,
    client: CompletionClient,
    config: ModelConfig,
    n: int = DEFAULT_REPETITIONS,
    cache: PredictionCache | None = None,
    typology: Typology | None = None,
) -> TypeScore:
    """Query one prompt n times; probability = yes / (yes + no) over valid answers."""
    if n < 1:
        raise ValueError("n must be >= 1")
    info_type = parse_type(info_type)
    prompt = prompt_for(sentence, category_id, info_type, typology)
    key = CacheKey(prompt_sha256(prompt), info_type.value, config.model_id,
                   float(config.temperature), n)
    hit = cache.get(key) if cache is not None else None
    if hit is not None:
        yes, valid = hit
    else:
        yes = valid = 0
        for rep in range(n):
            resp = client.complete(
                CompletionRequest(prompt, config.temperature, config.max_tokens, rep)
            )
            answer = parse_yes_no(resp.text)
            if answer == YES:
                yes += 1
                valid += 1
            elif answer == NO:
                valid += 1
    if valid < min_valid(n):
        raise LowValidityError(info_type.value, yes, valid, n)
    if hit is None and cache is not None:
        cache.put(key, yes, valid)
    return TypeScore(yes / valid, yes, valid)


def classify_sentence(
    sentence: Sentence,
    client: CompletionClient,
    config: ModelConfig,
    n: int = DEFAULT_REPETITIONS,
    cache: PredictionCache | None = None,
    typology: Typology | None = None,
) -> SentencePrediction:
    """Score all 24 types. Types that fail the validity rule are recorded in
    ``failed`` and left as NaN; such a prediction is partial."""
    typology = typology or Typology()
    vec = np.full(N_TYPES, np.nan)
    counts = [0] * N_TYPES
    failed: dict[str, tuple[int, int]] = {}
    for i, t in enumerate(TYPES):
        try:
            s = score_type(sentence.text, sentence.category_id, t, client, config, n, cache, typology)
        except LowValidityError as exc:
            failed[t.value] = (exc.yes, exc.valid)
            counts[i] = exc.valid
            continue
        vec[i] = s.probability
        counts[i] = s.valid
    return SentencePrediction(sentence.sentence_id, config.model_id, float(config.temperature),
                              n, vec, counts, failed)


@dataclass
class CorpusResult:
    predictions: list[SentencePrediction]
    failures: list[dict]

    @property
    def n_failed(self) -> int:
        return len(self.failures)


def classify_corpus(
    sentences: Sequence[Sentence],
    client: CompletionClient,
    config: ModelConfig,
    n: int = DEFAULT_REPETITIONS,
    cache: PredictionCache | None = None,
    typology: Typology | None = None,
    max_workers: int | None = None,
) -> CorpusResult:
    """Classify sentences with bounded parallelism; failures are collected, not raised."""
    typology = typology or Typology()
    workers = max_workers or config.max_parallel
    unique: dict[str, Sentence] = {}
    for s in sentences:
        unique.setdefault(s.sentence_id, s)

    def work(s: Sentence):
        try:
            return classify_sentence(s, client, config, n, cache, typology)
        except InfoTypesError as exc:
            return {"sentence_id": s.sentence_id, "error": type(exc).__name__, "message": str(exc)}

    if workers <= 1:
        results = [work(s) for s in unique.values()]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, unique.values()))

    preds, failures = [], []
    for r in results:
        if isinstance(r, dict):
            failures.append(r)
        elif r.partial:
            failures.append({
                "sentence_id": r.sentence_id, "error": "LowValidityError",
                "message": f"{len(r.failed)} type(s) below validity floor",
                "partial_counts": {t: {"yes": y, "valid": v} for t, (y, v) in r.failed.items()},
            })
        else:
            preds.append(r)
    preds.sort(key=lambda p: p.sentence_id)
    failures.sort(key=lambda f: f["sentence_id"])
    return CorpusResult(preds, failures)


def write_predictions(path: str | Path, predictions: Iterable[SentencePrediction]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for p in sorted(predictions, key=lambda p: p.sentence_id):
            f.write(json.dumps(p.to_record()) + "\n")


def read_predictions(path: str | Path) -> dict[str, SentencePrediction]:
    out: dict[str, SentencePrediction] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                p = SentencePrediction.from_record(json.loads(line))
                out[p.sentence_id] = p
    return out

