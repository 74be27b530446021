"""Document model, gold clusterings, CoNLL-2012 / JSONL ingestion and span enumeration."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

# Distinguished dummy antecedent: a span with no antecedent points at EPSILON.
EPSILON = "eps"

Span = tuple[int, int]  # (start, end), token indices, end inclusive


class ConllParseError(ValueError):
    """Raised on malformed coreference markup; message names the offending line."""


@dataclass(frozen=True)
class Document:
    doc_id: str
    tokens: tuple[str, ...]
    sentences: tuple[tuple[int, int], ...]  # half-open (start, end) token ranges
    speakers: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if not self.tokens:
            raise ValueError(f"{self.doc_id}: document has no tokens")
        pos = 0
        for start, end in self.sentences:
            if start != pos or end <= start:
                raise ValueError(f"{self.doc_id}: sentences do not partition the token range")
            pos = end
        if pos != len(self.tokens):
            raise ValueError(f"{self.doc_id}: sentences do not cover all tokens")
        if self.speakers is not None and len(self.speakers) != len(self.tokens):
            raise ValueError(f"{self.doc_id}: speakers length mismatch")

    def span_text(self, span: Span) -> str:
        return " ".join(self.tokens[span[0] : span[1] + 1])


@dataclass(frozen=True)
class GoldAnnotation:
    """Gold entity clusters for one document; clusters are pairwise disjoint span sets."""

    clusters: tuple[frozenset[Span], ...]

    def __post_init__(self):
        seen: set[Span] = set()
        for cluster in self.clusters:
            for span in cluster:
                if span in seen:
                    raise ValueError(f"span {span} appears in more than one gold cluster")
                seen.add(span)

    @property
    def mentions(self) -> set[Span]:
        return {s for c in self.clusters for s in c}

    def cluster_of(self, span: Span) -> Optional[frozenset[Span]]:
        for cluster in self.clusters:
            if span in cluster:
                return cluster
        return None


@dataclass(frozen=True)
class CandidateSet:
    """Candidate antecedents for one span: up to K preceding spans plus the dummy EPSILON."""

    span: Span
    candidates: tuple[Span, ...]  # document order, excludes EPSILON

    def __post_init__(self):
        for c in self.candidates:
            if not (c < self.span):
                raise ValueError(f"candidate {c} does not precede span {self.span}")

    @property
    def outcomes(self) -> tuple:
        """All outcomes including the dummy antecedent, EPSILON last."""
        return self.candidates + (EPSILON,)


@dataclass
class Corpus:
    documents: list[Document] = field(default_factory=list)
    gold: dict[str, GoldAnnotation] = field(default_factory=dict)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def __len__(self) -> int:
        return len(self.documents)

    def doc(self, doc_id: str) -> Document:
        for d in self.documents:
            if d.doc_id == doc_id:
                return d
        raise KeyError(doc_id)


# ---------------------------------------------------------------------------
# CoNLL-2012 ingestion


def _resolve_coref_column(doc_id: str, cells: list[tuple[int, str]]) -> list[list[Span]]:
    """Resolve the parenthesized coref column into clusters of (start, end) spans.

    `cells` holds (source line number, cell) pairs in token order. Openings and
    closings for the same cluster id may nest; a closing matches the most
    recent unmatched opening for that id.
    """
    open_stacks: dict[int, list[int]] = {}
    clusters: dict[int, list[Span]] = {}
    for tok_idx, (lineno, cell) in enumerate(cells):
        if cell in ("-", "_", ""):
            continue
        for part in cell.split("|"):
            opens = part.startswith("(")
            closes = part.endswith(")")
            try:
                cid = int(part.strip("()"))
            except ValueError:
                raise ConllParseError(f"line {lineno}: bad coref field {part!r}")
            if opens:
                open_stacks.setdefault(cid, []).append(tok_idx)
            if closes:
                stack = open_stacks.get(cid)
                if not stack:
                    raise ConllParseError(
                        f"line {lineno}: closing for cluster {cid} with no matching opening"
                    )
                start = stack.pop()
                clusters.setdefault(cid, []).append((start, tok_idx))
    for cid, stack in open_stacks.items():
        if stack:
            raise ConllParseError(
                f"document {doc_id}: cluster {cid} opened at token {stack[-1]} never closed"
            )
    return [clusters[cid] for cid in sorted(clusters)]


def parse_coref_column(column: Iterable[str], doc_id: str = "<column>") -> list[list[Span]]:
    """Resolve a bare coref column (one cell per token) into clusters."""
    return _resolve_coref_column(doc_id, [(i + 1, c) for i, c in enumerate(column)])


def ingest_conll(path: str, drop_singletons: bool = False) -> Corpus:
    """Read a CoNLL-2012 skeleton file: coref markup in the final column.

    Singleton clusters, should the file contain any, are kept; scoring drops
    them later.
    """
    corpus = Corpus()
    doc_id = None
    part = 0
    tokens: list[str] = []
    speakers: list[str] = []
    sentences: list[tuple[int, int]] = []
    sent_start = 0
    cells: list[tuple[int, str]] = []

    def flush_document():
        nonlocal tokens, speakers, sentences, sent_start, cells
        if not tokens:
            return
        if len(tokens) > sent_start:  # close a sentence with no trailing blank
            sentences.append((sent_start, len(tokens)))
        clusters = _resolve_coref_column(f"{doc_id}_{part}", cells)
        if drop_singletons:
            clusters = [c for c in clusters if len(c) > 1]
        spk = tuple(speakers) if any(s != "-" for s in speakers) else None
        doc = Document(
            doc_id=f"{doc_id}_{part}",
            tokens=tuple(tokens),
            sentences=tuple(sentences),
            speakers=spk,
        )
        corpus.documents.append(doc)
        corpus.gold[doc.doc_id] = GoldAnnotation(tuple(frozenset(c) for c in clusters))
        tokens, speakers, sentences, cells = [], [], [], []
        sent_start = 0

    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if line.startswith("#begin document"):
                doc_id = line.split("(", 1)[1].split(")", 1)[0] if "(" in line else line
                if "part" in line:
                    part = int(line.rsplit("part", 1)[1].strip())
                continue
            if line.startswith("#end document"):
                flush_document()
                continue
            if not line.strip():
                if len(tokens) > sent_start:
                    sentences.append((sent_start, len(tokens)))
                    sent_start = len(tokens)
                continue
            cols = line.split()
            if len(cols) < 3:
                raise ConllParseError(f"line {lineno}: expected CoNLL columns, got {line!r}")
            tokens.append(cols[3] if len(cols) > 3 else cols[1])
            speakers.append(cols[9] if len(cols) > 9 else "-")
            cells.append((lineno, cols[-1]))
    if len(tokens) > sent_start:
        sentences.append((sent_start, len(tokens)))
    flush_document()
    return corpus


# ---------------------------------------------------------------------------
# Native JSONL format


def write_jsonl(corpus: Corpus, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus.documents:
            gold = corpus.gold.get(doc.doc_id)
            record = {
                "doc_id": doc.doc_id,
                "tokens": list(doc.tokens),
                "sentences": [list(s) for s in doc.sentences],
                "speakers": list(doc.speakers) if doc.speakers else None,
                "clusters": [sorted(c) for c in gold.clusters] if gold else None,
            }
            fh.write(json.dumps(record) + "\n")


def read_jsonl(path: str) -> Corpus:
    corpus = Corpus()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            doc = Document(
                doc_id=record["doc_id"],
                tokens=tuple(record["tokens"]),
                sentences=tuple(tuple(s) for s in record["sentences"]),
                speakers=tuple(record["speakers"]) if record.get("speakers") else None,
            )
            corpus.documents.append(doc)
            if record.get("clusters") is not None:
                corpus.gold[doc.doc_id] = GoldAnnotation(
                    tuple(frozenset(tuple(s) for s in c) for c in record["clusters"])
                )
    return corpus


# ---------------------------------------------------------------------------
# Span enumeration


def candidate_spans(
    doc: Document,
    gold: GoldAnnotation,
    distractor_rate: float = 0.0,
    seed: int = 0,
) -> list[Span]:
    """Candidate mention spans in document order: the gold mentions, optionally
    with deterministically injected non-gold distractor spans.

    Distractors are sentence-internal ranges of length <= 5 that match no gold
    span; the draw depends only on (doc_id, seed).
    """
    gold_spans = sorted(gold.mentions)
    if distractor_rate <= 0:
        return gold_spans
    rng = random.Random(f"{doc.doc_id}:{seed}")
    gold_set = set(gold_spans)
    pool: list[Span] = []
    for s_start, s_end in doc.sentences:
        for start in range(s_start, s_end):
            for end in range(start, min(start + 5, s_end)):
                if (start, end) not in gold_set:
                    pool.append((start, end))
    n = min(len(pool), round(distractor_rate * len(gold_spans)))
    distractors = rng.sample(pool, n) if n else []
    return sorted(set(gold_spans) | set(distractors))


def antecedent_candidates(spans: list[Span], i: int, k: int) -> CandidateSet:
    """The min(i, K) spans immediately preceding position i, plus EPSILON."""
    if i >= len(spans):
        raise IndexError(f"span index {i} out of range")
    if k < 1:
        raise ValueError("K must be >= 1")
    return CandidateSet(span=spans[i], candidates=tuple(spans[max(0, i - k) : i]))
