"""Synthetic corpus generator for desk-scale simulations.

Entities get unique canonical names from a shared vocabulary; each repeat
mention reuses the canonical surface (learnable by string match), degrades to
the entity's alias (learnable only from lexical co-occurrence in training
docs, so scorer quality grows with labeled data), or degrades to an ambiguous
pronoun. Cluster sizes are geometric. Everything is deterministic in the seed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from itertools import product

from .corpus import Corpus, Document, GoldAnnotation, Span

_NAME_STEMS = [
    "acme", "baxter", "cobalt", "denver", "eleanor", "fairfax", "gideon", "harlow",
    "iris", "jasper", "kepler", "lumen", "marlow", "nolan", "orion", "packard",
    "quill", "rosetta", "sutton", "thorne", "ulric", "vesper", "walden", "xenia",
    "yarrow", "zephyr",
]
_NAME_SUFFIXES = ["", "ton", "field", "brook"]
# 104 canonical names; each document samples a subset, so lexical coverage of
# the vocabulary grows with the number of documents seen in training.
_NAME_VOCAB = [stem + suffix for suffix in _NAME_SUFFIXES for stem in _NAME_STEMS]
_PRONOUNS = ["it", "he", "she", "they"]


def alias_for(name: str) -> str:
    """Entity-specific second surface form; shares no tokens with the name, so
    linking alias mentions to the canonical ones is learnable only from
    (alias, name) co-occurrence in labeled documents."""
    return name[::-1]


def pronoun_for(name: str) -> str:
    """Each entity name agrees with one pronoun, consistently across documents,
    so pronoun resolution is learnable from co-occurrence rather than memorized
    per document."""
    head = name.split("-")[0]
    return _PRONOUNS[_NAME_VOCAB.index(head) % len(_PRONOUNS)]
_FILLER = ["the", "a", "report", "said", "that", "near", "town", "was", "seen",
           "again", "today", "while", "officials", "watched"]


@dataclass
class SynthConfig:
    n_docs: int = 60
    seed: int = 0
    min_mentions: int = 20
    max_mentions: int = 60
    cluster_geom_p: float = 0.45  # success prob of the geometric size distribution
    singleton_rate: float = 0.15
    noise: float = 0.3  # fraction of repeat mentions that degrade
    pronoun_share: float = 0.3  # degraded mentions: pronoun vs. entity alias


def _cluster_sizes(rng: random.Random, n_mentions: int, cfg: SynthConfig) -> list[int]:
    sizes: list[int] = []
    remaining = n_mentions
    while remaining > 0:
        if rng.random() < cfg.singleton_rate:
            size = 1
        else:
            size = 2
            while rng.random() > cfg.cluster_geom_p:
                size += 1
        size = min(size, remaining)
        sizes.append(size)
        remaining -= size
    return sizes


def _generate_document(doc_id: str, rng: random.Random, cfg: SynthConfig) -> tuple[Document, GoldAnnotation]:
    n_mentions = rng.randint(cfg.min_mentions, cfg.max_mentions)
    sizes = _cluster_sizes(rng, n_mentions, cfg)
    # Canonical names are unique within a document, sampled from the shared
    # vocabulary (single tokens first, two-token combinations as overflow).
    base = rng.sample(_NAME_VOCAB, len(_NAME_VOCAB))
    names: list[str] = list(base)
    names.extend(f"{u}-{v}" for u, v in product(base, base) if u != v)
    names = names[: len(sizes)]
    # Mention order: interleave entities while keeping each entity's first
    # mention where the shuffle puts it.
    entity_of: list[int] = []
    for ent, size in enumerate(sizes):
        entity_of.extend([ent] * size)
    rng.shuffle(entity_of)

    tokens: list[str] = []
    sentences: list[tuple[int, int]] = []
    speakers: list[str] = []
    spans_by_entity: dict[int, list[Span]] = {}
    seen: set[int] = set()
    sent_start = 0
    speaker = "spk0"
    for idx, ent in enumerate(entity_of):
        # A short filler prefix, the mention, then maybe a sentence break.
        for _ in range(rng.randint(1, 3)):
            tokens.append(rng.choice(_FILLER))
            speakers.append(speaker)
        name = names[ent]
        first = ent not in seen
        seen.add(ent)
        if first or rng.random() >= cfg.noise:
            mention_tokens = [name]
        elif rng.random() < cfg.pronoun_share:
            mention_tokens = [pronoun_for(name)]
        else:
            mention_tokens = [alias_for(name)]
        start = len(tokens)
        tokens.extend(mention_tokens)
        speakers.extend([speaker] * len(mention_tokens))
        spans_by_entity.setdefault(ent, []).append((start, len(tokens) - 1))
        if rng.random() < 0.5 or idx == len(entity_of) - 1:
            tokens.append(".")
            speakers.append(speaker)
            sentences.append((sent_start, len(tokens)))
            sent_start = len(tokens)
            speaker = "spk1" if speaker == "spk0" else "spk0"
    if sent_start < len(tokens):
        sentences.append((sent_start, len(tokens)))
    doc = Document(doc_id=doc_id, tokens=tuple(tokens), sentences=tuple(sentences),
                   speakers=tuple(speakers))
    gold = GoldAnnotation(tuple(frozenset(s) for s in spans_by_entity.values()))
    return doc, gold


def generate_corpus(cfg: SynthConfig) -> Corpus:
    corpus = Corpus()
    for i in range(cfg.n_docs):
        rng = random.Random(f"synth:{cfg.seed}:{i}")
        doc, gold = _generate_document(f"synth_{cfg.seed}_{i:03d}", rng, cfg)
        corpus.documents.append(doc)
        corpus.gold[doc.doc_id] = gold
    return corpus
