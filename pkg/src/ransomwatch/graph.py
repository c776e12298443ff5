"""Bipartite operation-parameter behavior graph and its hashed embedding.

Every event connects its operation node to three parameter nodes: the file
extension, a path-depth bucket, and a filename-pattern class. The graph is
folded into a fixed-width vector with signed feature hashing; the hash seed
and width are part of the model contract and travel inside model files.
"""
from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass

import numpy as np

from .events import ProcessWindow, basename_of, dirname_of

DEFAULT_EMBEDDING_DIMS = 64
DEFAULT_HASH_SEED = 0x9E3779B97F4A7C15
MAX_DEPTH_BUCKET = 7


class BadDim(ValueError):
    """Embedding width must be a power of two, at least 8."""


_NOTE_NAME_RE = re.compile(
    r"how[\s_-]*to|read[\s_-]*me|readme|decrypt|encrypt|recover|restore|unlock"
    r"|ransom|instruction|important|attention|warning|help",
    re.IGNORECASE,
)
_WORDS_RE = re.compile(r"[a-z]+(?:[ _\-][a-z]+)*")
_HEX_RE = re.compile(r"[0-9a-f]{8,}")

# Known-extension vocabulary for parameter labels. Anything else collapses to
# one rare-extension node: per-file random suffixes would otherwise spray
# one-off hash buckets that never generalize across windows.
EXTENSION_VOCABULARY = frozenset(
    (
        "", "7z", "avi", "bak", "bat", "bmp", "cfg", "cpp", "css", "csv",
        "dat", "db", "dll", "doc", "docx", "eml", "exe", "gif", "gz", "hta",
        "htm", "html", "ini", "iso", "jpeg", "jpg", "js", "json", "lock",
        "log", "md", "mov", "mp3", "mp4", "msg", "odt", "pdf", "png", "ppt",
        "pptx", "ps1", "py", "rar", "rtf", "sql", "svg", "sys", "tar", "tif",
        "tmp", "txt", "wav", "xls", "xlsx", "xml", "zip",
    )
)
RARE_EXTENSION_LABEL = "ext:#rare"


def name_pattern_class(file_name: str) -> str:
    """Classify a filename into {note, hash, word, other}."""
    stem = basename_of(file_name)
    dot = stem.rfind(".")
    if dot > 0:
        stem = stem[:dot]
    low = stem.lower()
    if _NOTE_NAME_RE.search(low):
        return "note"
    if _HEX_RE.fullmatch(low):
        return "hash"
    compact = low.replace("-", "").replace("_", "")
    if len(compact) >= 10 and compact.isalnum() and sum(c.isdigit() for c in compact) >= 3:
        return "hash"
    if _WORDS_RE.fullmatch(low):
        return "word"
    return "other"


def path_depth_bucket(file_name: str) -> int:
    """Directory depth of a path, clamped to MAX_DEPTH_BUCKET."""
    directory = dirname_of(file_name)
    if not directory:
        return 0
    parts = [p for p in re.split(r"[/\\]+", directory) if p and not p.endswith(":")]
    return min(len(parts), MAX_DEPTH_BUCKET)


@dataclass(frozen=True)
class BehaviorGraph:
    """Bipartite graph: operation labels on one side, parameter labels on the other.

    ``edges`` maps (op, param) to its co-occurrence count. Construction via
    ``build_graph`` is the only path that creates edges, so an op-op or
    param-param edge cannot be expressed.
    """

    op_nodes: frozenset[str]
    param_nodes: frozenset[str]
    edges: dict[tuple[str, str], int]

    def edge_count(self) -> int:
        return sum(self.edges.values())


def event_params(file_name: str, file_type: str) -> tuple[str, str, str]:
    ext = f"ext:{file_type}" if file_type in EXTENSION_VOCABULARY else RARE_EXTENSION_LABEL
    return (
        ext,
        f"depth:{path_depth_bucket(file_name)}",
        f"name:{name_pattern_class(file_name)}",
    )


def build_graph(window: ProcessWindow) -> BehaviorGraph:
    """One op node per distinct operation, three parameter edges per event."""
    ops: set[str] = set()
    params: set[str] = set()
    edges: dict[tuple[str, str], int] = {}
    for ev in window.events:
        op = ev.operation.value
        ops.add(op)
        for param in event_params(ev.file_name, ev.file_type):
            params.add(param)
            key = (op, param)
            edges[key] = edges.get(key, 0) + 1
    return BehaviorGraph(frozenset(ops), frozenset(params), edges)


@dataclass(frozen=True)
class PatternEmbedding:
    dims: int
    values: np.ndarray

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


def _edge_hash(op: str, param: str, seed: int) -> int:
    key = seed.to_bytes(8, "little", signed=False)
    digest = hashlib.blake2b(f"{op}|{param}".encode("utf-8"), digest_size=8, key=key).digest()
    return int.from_bytes(digest, "little")


def encode(graph: BehaviorGraph, dims: int = DEFAULT_EMBEDDING_DIMS, seed: int = DEFAULT_HASH_SEED) -> PatternEmbedding:
    """Fold the edge multiset into ``dims`` buckets with signed hashing.

    Each edge lands in one bucket with sign taken from an independent hash
    bit and magnitude log1p(count); the result is scaled down if its L2 norm
    exceeds sqrt(dims). Deterministic across runs and platforms.
    """
    if dims < 8 or dims & (dims - 1) != 0:
        raise BadDim(f"dims must be a power of two >= 8, got {dims}")
    values = np.zeros(dims, dtype=np.float64)
    for (op, param), count in graph.edges.items():
        h = _edge_hash(op, param, seed)
        bucket = h & (dims - 1)
        sign = 1.0 if (h >> 63) & 1 else -1.0
        values[bucket] += sign * math.log1p(count)
    limit = math.sqrt(dims)
    norm = float(np.linalg.norm(values))
    if norm > limit:
        values *= limit / norm
    return PatternEmbedding(dims, values)
