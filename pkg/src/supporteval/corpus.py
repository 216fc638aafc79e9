"""Corpus preparation: sentence windows and near-duplicate removal.

Documents are split into sentences, chunked into overlapping
sentence windows (default: 10 sentences, stride 5), and deduplicated
with MinHash signatures over word-level 9-gram shingles bucketed by
locality-sensitive hashing.

Everything here is deterministic for a fixed seed, including across
platforms: shingle hashing uses blake2b, and the MinHash permutation
family is derived from a seeded numpy generator.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .model import Passage

#: Bump when the sentence-splitting rules change; recorded in output
#: metadata so passage files are reproducible.
SPLITTER_VERSION = "1"

DEFAULT_WINDOW = 10
DEFAULT_STRIDE = 5
DEFAULT_SHINGLE_GRAM = 9
DEFAULT_NUM_PERM = 128
DEFAULT_BANDS = 16
DEFAULT_ROWS = 8
DEFAULT_MIN_JACCARD = 0.8
DEFAULT_SEED = 920353

# Tokens that end with a period without ending a sentence. Deliberately
# excludes single initials ("A.") so enumerations like "A. B. C." split.
_ABBREVIATIONS = frozenset(
    {
        "mr.", "mrs.", "ms.", "dr.", "prof.", "sr.", "jr.", "st.", "mt.",
        "vs.", "etc.", "e.g.", "i.e.", "cf.", "al.", "inc.", "ltd.", "co.",
        "corp.", "dept.", "univ.", "assn.", "bros.", "no.", "nos.", "vol.",
        "fig.", "figs.", "eq.", "sec.", "ch.", "pp.", "ed.", "est.",
        "approx.", "jan.", "feb.", "mar.", "apr.", "jun.", "jul.", "aug.",
        "sep.", "sept.", "oct.", "nov.", "dec.", "mon.", "tue.", "wed.",
        "thu.", "fri.", "sat.", "sun.", "u.s.", "u.k.", "u.n.", "a.m.",
        "p.m.",
    }
)

# A sentence boundary: terminal punctuation, optional closing quotes or
# brackets, then whitespace.
_BOUNDARY = re.compile(r"[.!?]+[\"'”’)\]]*\s+")


class DegenerateDocumentError(ValueError):
    """Raised for a document from which no sentences can be extracted."""


class EmptyShingleSetError(ValueError):
    """Raised when a MinHash signature is requested for zero shingles."""


@dataclass(frozen=True, slots=True)
class RawDocument:
    """An input document before chunking."""

    doc_id: str
    title: str
    body: str

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise ValueError("doc_id must be non-empty")
        if not self.body:
            raise ValueError(f"document {self.doc_id!r}: body must be non-empty")


@dataclass(frozen=True, slots=True)
class PassageChunk:
    """A passage plus its provenance within the source document."""

    id: str
    title: str
    text: str
    doc_id: str
    start_sentence: int
    end_sentence: int

    def to_passage(self) -> Passage:
        return Passage(id=self.id, title=self.title, text=self.text)


@dataclass(frozen=True, slots=True)
class MinHashSignature:
    """Per-permutation minima of hashed shingles.

    Two signatures built with the same (num_perm, seed) estimate the
    Jaccard similarity of their shingle sets as the fraction of equal
    slots.
    """

    values: tuple[int, ...]
    num_perm: int
    seed: int

    def __post_init__(self) -> None:
        if len(self.values) != self.num_perm:
            raise ValueError("signature length must equal num_perm")

    def jaccard(self, other: "MinHashSignature") -> float:
        """Estimated Jaccard similarity against another signature."""
        if (self.num_perm, self.seed) != (other.num_perm, other.seed):
            raise ValueError("signatures built with different parameters")
        equal = sum(a == b for a, b in zip(self.values, other.values))
        return equal / self.num_perm


def _sentence_spans(text: str) -> list[tuple[int, int]]:
    """(start, end) character spans of sentences, in order."""
    spans: list[tuple[int, int]] = []
    start = 0
    for match in _BOUNDARY.finditer(text):
        end = match.start() + len(match.group().rstrip())
        candidate = text[start:end]
        last_word = candidate.rsplit(None, 1)[-1] if candidate.split() else ""
        if last_word.lower() in _ABBREVIATIONS:
            continue
        if candidate.strip():
            spans.append((start, end))
        start = match.end()
    if text[start:].strip():
        tail = text.rstrip()
        spans.append((start, len(tail)))
    return spans


def split_sentences(text: str) -> list[str]:
    """Split text into sentences with a rule-based boundary detector.

    Splits after terminal punctuation followed by whitespace, except
    when the preceding token is a known abbreviation. The concatenation
    of the result covers the input up to whitespace normalization.
    """
    if not text or not text.strip():
        raise ValueError("text must be non-empty")
    return [text[s:e].strip() for s, e in _sentence_spans(text)]


def chunk_document(
    doc: RawDocument,
    window: int = DEFAULT_WINDOW,
    stride: int = DEFAULT_STRIDE,
) -> list[PassageChunk]:
    """Chunk a document into overlapping sentence windows.

    Candidate windows start at sentence 0, stride, 2*stride, ... and
    span up to ``window`` sentences. A trailing window whose sentences
    are all contained in the previously emitted window is dropped, so
    no passage is a subset of its predecessor while every sentence
    still appears in at least one passage.

    Passage ids are ``{doc_id}#{ordinal}_{char_offset}`` where
    char_offset is the window's starting character in the body.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    if not 1 <= stride <= window:
        raise ValueError("stride must satisfy 1 <= stride <= window")
    spans = _sentence_spans(doc.body)
    n = len(spans)
    if n == 0:
        raise DegenerateDocumentError(f"document {doc.doc_id!r} has no sentences")

    chunks: list[PassageChunk] = []
    prev_end = 0
    for start in range(0, n, stride):
        end = min(start + window, n)
        if chunks and end <= prev_end:
            continue
        char_start = spans[start][0]
        char_end = spans[end - 1][1]
        chunks.append(
            PassageChunk(
                id=f"{doc.doc_id}#{len(chunks)}_{char_start}",
                title=doc.title,
                text=doc.body[char_start:char_end],
                doc_id=doc.doc_id,
                start_sentence=start,
                end_sentence=end,
            )
        )
        prev_end = end
    return chunks


def _hash_tokens(tokens: tuple[str, ...]) -> int:
    digest = hashlib.blake2b(" ".join(tokens).encode("utf-8"), digest_size=8)
    return int.from_bytes(digest.digest(), "big")


def shingle(text: str, gram: int = DEFAULT_SHINGLE_GRAM) -> set[int]:
    """Hashes of each contiguous ``gram``-token run of the text.

    Tokens come from lowercased whitespace splitting. Text shorter than
    ``gram`` tokens yields one shingle over the whole token sequence;
    empty text yields the empty set.
    """
    if gram < 1:
        raise ValueError("gram must be >= 1")
    tokens = text.lower().split()
    if not tokens:
        return set()
    if len(tokens) <= gram:
        return {_hash_tokens(tuple(tokens))}
    return {
        _hash_tokens(tuple(tokens[i : i + gram]))
        for i in range(len(tokens) - gram + 1)
    }


@lru_cache(maxsize=8)
def _permutation_keys(num_perm: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, 1 << 64, size=num_perm, dtype=np.uint64)


def _mix64(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer; wraps mod 2^64 like any uint64 arithmetic."""
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def minhash(
    shingles: set[int],
    num_perm: int = DEFAULT_NUM_PERM,
    seed: int = DEFAULT_SEED,
) -> MinHashSignature:
    """MinHash signature of a shingle set.

    Slot i holds the minimum over shingles of hash_i(shingle), where
    hash_i is a keyed 64-bit bit mixer whose key i comes from the
    seeded generator. Deterministic across platforms for a fixed
    (shingle set, num_perm, seed).
    """
    if not shingles:
        raise EmptyShingleSetError("cannot build a signature from zero shingles")
    keys = _permutation_keys(num_perm, seed)
    x = np.fromiter(shingles, dtype=np.uint64, count=len(shingles))
    hashed = _mix64(x[None, :] ^ keys[:, None])
    values = hashed.min(axis=1)
    return MinHashSignature(tuple(int(v) for v in values), num_perm, seed)


@dataclass(frozen=True, slots=True)
class DedupRemoval:
    removed_id: str
    kept_id: str
    estimated_jaccard: float


def lsh_dedup(
    docs: list[RawDocument],
    bands: int = DEFAULT_BANDS,
    rows: int = DEFAULT_ROWS,
    min_jaccard: float = DEFAULT_MIN_JACCARD,
    gram: int = DEFAULT_SHINGLE_GRAM,
    seed: int = DEFAULT_SEED,
) -> tuple[list[RawDocument], list[DedupRemoval]]:
    """Remove near-duplicate documents via banded MinHash LSH.

    Documents sharing any band bucket become candidate pairs; a pair
    whose estimated Jaccard reaches ``min_jaccard`` is merged, keeping
    the lexicographically smallest doc_id of each duplicate cluster.
    Returns (kept documents in input order, removals).
    """
    num_perm = bands * rows
    by_id: dict[str, RawDocument] = {}
    for doc in docs:
        if doc.doc_id in by_id:
            raise ValueError(f"duplicate doc_id {doc.doc_id!r}")
        by_id[doc.doc_id] = doc

    signatures: dict[str, MinHashSignature] = {}
    for doc in docs:
        shingles = shingle(doc.body, gram=gram)
        if shingles:
            signatures[doc.doc_id] = minhash(shingles, num_perm=num_perm, seed=seed)

    buckets: dict[tuple[int, tuple[int, ...]], list[str]] = {}
    for doc in docs:
        sig = signatures.get(doc.doc_id)
        if sig is None:
            continue
        for band in range(bands):
            key = (band, sig.values[band * rows : (band + 1) * rows])
            buckets.setdefault(key, []).append(doc.doc_id)

    candidates: set[tuple[str, str]] = set()
    for members in buckets.values():
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                left, right = sorted((members[i], members[j]))
                candidates.add((left, right))

    parent: dict[str, str] = {}

    def find(x: str) -> str:
        root = x
        while parent.get(root, root) != root:
            root = parent[root]
        while parent.get(x, x) != x:
            parent[x], x = root, parent[x]
        return root

    for left, right in sorted(candidates):
        if signatures[left].jaccard(signatures[right]) >= min_jaccard:
            ra, rb = find(left), find(right)
            if ra != rb:
                keep, drop = min(ra, rb), max(ra, rb)
                parent[drop] = keep

    removals: list[DedupRemoval] = []
    for doc_id in sorted(signatures):
        kept_id = find(doc_id)
        if kept_id != doc_id:
            removals.append(
                DedupRemoval(
                    removed_id=doc_id,
                    kept_id=kept_id,
                    estimated_jaccard=signatures[doc_id].jaccard(signatures[kept_id]),
                )
            )
    removed_ids = {r.removed_id for r in removals}
    kept = [doc for doc in docs if doc.doc_id not in removed_ids]
    return kept, removals
