"""Ransom-note detection by word-level n-gram fragment matching.

A pool of scored fragments is distilled from known notes; a document is
flagged when the summed scores of its matching fragments cross a threshold.
"""
from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

DEFAULT_NGRAM_SIZE = 3
DEFAULT_POOL_CAPACITY = 300
DEFAULT_TAU_SIM = 0.21

Fragment = tuple[str, ...]


class EmptyCorpus(ValueError):
    """No note contributed a single fragment."""


class DegenerateLabels(ValueError):
    """A sweep needs both classes present."""


@dataclass(frozen=True, slots=True)
class TokenizedNote:
    """Normalized word sequence of one document."""

    words: tuple[str, ...]

    @property
    def k(self) -> int:
        return len(self.words)


def _strip_punct(token: str) -> str:
    start, end = 0, len(token)
    while start < end and unicodedata.category(token[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(token[end - 1]).startswith("P"):
        end -= 1
    return token[start:end]


def tokenize(text: str) -> TokenizedNote:
    """Split on whitespace, strip leading/trailing punctuation, lowercase.

    Punctuation is any Unicode category-P character; interior punctuation is
    kept ("don't" survives, "ENCRYPTED!" becomes "encrypted"). Empty tokens
    are dropped.
    """
    words = []
    for raw in text.split():
        tok = _strip_punct(raw).lower()
        if tok:
            words.append(tok)
    return TokenizedNote(tuple(words))


def ngrams(note: TokenizedNote, n: int) -> list[Fragment]:
    """All sliding n-word sequences, max(0, k - n + 1) of them, in order."""
    if n < 1:
        raise ValueError("n must be at least 1")
    words = note.words
    return [words[i : i + n] for i in range(len(words) - n + 1)]


@dataclass(frozen=True)
class GenePool:
    """Ranked, normalized n-gram fragments of known ransom notes.

    Scores are normalized over the full fragment count set *before* the pool
    is truncated to its capacity, so a retained score keeps its global
    meaning across rebuilds. ``fragments`` preserves descending-score order
    (ties broken lexicographically).
    """

    n: int
    top_k: Optional[int]
    fragments: dict[Fragment, float]
    source_count: int

    def __len__(self) -> int:
        return len(self.fragments)

    def to_json(self) -> str:
        payload = {
            "n": self.n,
            "top_k": self.top_k,
            "source_count": self.source_count,
            "fragments": [{"words": list(frag), "f": score} for frag, score in self.fragments.items()],
        }
        return json.dumps(payload, separators=(",", ":"), ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> "GenePool":
        payload = json.loads(text)
        fragments = {tuple(item["words"]): float(item["f"]) for item in payload["fragments"]}
        return cls(int(payload["n"]), payload["top_k"], fragments, int(payload["source_count"]))

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "GenePool":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def build_pool(
    notes: Sequence[TokenizedNote],
    n: int = DEFAULT_NGRAM_SIZE,
    top_k: Optional[int] = DEFAULT_POOL_CAPACITY,
) -> GenePool:
    """Count fragments over all notes, normalize, keep the top_k highest.

    Raises EmptyCorpus when no note is at least n words long. top_k=None
    keeps every fragment (then the retained scores sum to 1 exactly).
    """
    counts: dict[Fragment, int] = {}
    for note in notes:
        for frag in ngrams(note, n):
            counts[frag] = counts.get(frag, 0) + 1
    if not counts:
        raise EmptyCorpus(f"no fragments of size {n} in {len(notes)} notes")
    total = sum(counts.values())
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    if top_k is not None:
        ranked = ranked[:top_k]
    fragments = {frag: count / total for frag, count in ranked}
    return GenePool(n, top_k, fragments, len(notes))


@dataclass(frozen=True, slots=True)
class SimilarityVerdict:
    score: float
    matched: tuple[tuple[Fragment, float], ...]
    is_note: bool
    threshold: float


def similarity(doc: TokenizedNote, pool: GenePool, tau: float = DEFAULT_TAU_SIM) -> SimilarityVerdict:
    """Sum the scores of pool fragments present in the document.

    Set semantics: each distinct pool fragment counts at most once no matter
    how often it repeats in the document.
    """
    if not pool.fragments:
        raise ValueError("gene pool is empty")
    doc_fragments = set(ngrams(doc, pool.n))
    matched = tuple((frag, score) for frag, score in pool.fragments.items() if frag in doc_fragments)
    score = sum(s for _, s in matched)
    return SimilarityVerdict(score, matched, score >= tau, tau)


def match_count(doc: TokenizedNote, pool: GenePool) -> int:
    """Number of distinct pool fragments present in the document."""
    doc_fragments = set(ngrams(doc, pool.n))
    return sum(1 for frag in pool.fragments if frag in doc_fragments)


@dataclass(frozen=True, slots=True)
class ThresholdPoint:
    tau: float
    precision: float
    recall: float
    fpr: float


def sweep_threshold(
    pool: GenePool,
    labeled_docs: Sequence[tuple[TokenizedNote, bool]],
    taus: Iterable[float],
) -> list[ThresholdPoint]:
    """Classification metrics per candidate threshold.

    Scores are computed once; each tau reclassifies. Precision is reported
    as 1.0 when nothing is flagged. Raises DegenerateLabels unless both
    classes are present.
    """
    positives = sum(1 for _, is_note in labeled_docs if is_note)
    negatives = len(labeled_docs) - positives
    if positives == 0 or negatives == 0:
        raise DegenerateLabels("labeled docs must contain both classes")
    scored = [(similarity(doc, pool, tau=0.0).score, is_note) for doc, is_note in labeled_docs]
    points = []
    for tau in taus:
        tp = sum(1 for s, is_note in scored if is_note and s >= tau)
        fp = sum(1 for s, is_note in scored if not is_note and s >= tau)
        precision = tp / (tp + fp) if (tp + fp) > 0 else 1.0
        points.append(ThresholdPoint(tau, precision, tp / positives, fp / negatives))
    return points


@dataclass(frozen=True, slots=True)
class WindowPoint:
    n: int
    threshold: int
    recall: float


def sweep_window(
    notes: Sequence[TokenizedNote],
    benign_docs: Sequence[TokenizedNote],
    n_values: Iterable[int] = range(1, 7),
    top_k: Optional[int] = DEFAULT_POOL_CAPACITY,
) -> list[WindowPoint]:
    """Window-size sensitivity: per n, the zero-false-positive count threshold.

    For each n a pool is built from the notes; a document is flagged when its
    distinct matched-fragment count exceeds the threshold, and the threshold
    is the smallest value producing zero flags on the benign corpus (i.e. the
    maximum benign match count). Recall is then measured on the notes.
    """
    if not notes or not benign_docs:
        raise DegenerateLabels("both corpora must be non-empty")
    points = []
    for n in n_values:
        try:
            pool = build_pool(notes, n=n, top_k=top_k)
        except EmptyCorpus:
            points.append(WindowPoint(n, 0, 0.0))
            continue
        threshold = max(match_count(doc, pool) for doc in benign_docs)
        hits = sum(1 for note in notes if match_count(note, pool) > threshold)
        points.append(WindowPoint(n, threshold, hits / len(notes)))
    return points
