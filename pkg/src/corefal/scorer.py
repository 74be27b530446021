"""Antecedent scorers: an oracle-with-noise scorer, a small trainable feature
ranker, and committee averaging.

Every scorer produces, per candidate mention span, a normalized probability
distribution over its antecedent candidates (including the dummy EPSILON),
an argmax label, and the clusters induced by following non-EPSILON labels.
"""

from __future__ import annotations

import json
import random
import zlib
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .corpus import EPSILON, CandidateSet, Document, GoldAnnotation, Span, antecedent_candidates

PROB_TOL = 1e-9


@dataclass
class AntecedentDistribution:
    span: Span
    candidates: CandidateSet
    probs: dict  # outcome (Span or EPSILON) -> probability

    def validate(self):
        total = 0.0
        for outcome in self.candidates.outcomes:
            p = self.probs[outcome]
            if p < -PROB_TOL:
                raise ValueError(f"negative probability for {outcome}")
            total += p
        if abs(total - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {total}, not 1")

    def argmax(self):
        """Highest-probability outcome; ties go to the earliest candidate, EPSILON last."""
        best, best_p = None, -1.0
        for outcome in self.candidates.outcomes:
            p = self.probs[outcome]
            if p > best_p + PROB_TOL:
                best, best_p = outcome, p
        return best


def clusters_from_labels(labels: dict) -> list[frozenset[Span]]:
    """Connected components of non-EPSILON label links, multi-member only."""
    parent: dict[Span, Span] = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for span, ant in labels.items():
        if ant != EPSILON and ant is not None:
            ra, rb = find(span), find(ant)
            if ra != rb:
                parent[ra] = rb
    groups: dict[Span, set[Span]] = {}
    for x in parent:
        groups.setdefault(find(x), set()).add(x)
    return [frozenset(g) for g in groups.values() if len(g) > 1]


@dataclass
class ScorerOutput:
    doc_id: str
    spans: list[Span]
    distributions: list[AntecedentDistribution]
    labels: dict  # span -> argmax outcome
    predicted_clusters: list[frozenset[Span]]

    @classmethod
    def from_distributions(cls, doc_id: str, spans, distributions) -> "ScorerOutput":
        labels = {d.span: d.argmax() for d in distributions}
        return cls(
            doc_id=doc_id,
            spans=list(spans),
            distributions=distributions,
            labels=labels,
            predicted_clusters=clusters_from_labels(labels),
        )


@dataclass
class LabeledDoc:
    """A document with (possibly imperfect) cluster labels used for training."""

    doc: Document
    spans: list[Span]  # candidate spans, document order
    clusters: list[frozenset[Span]]

    def correct_outcomes(self, i: int, candidates: CandidateSet) -> set:
        """Candidates coreferent with span i per the labels; {EPSILON} if none."""
        span = self.spans[i]
        cluster = next((c for c in self.clusters if span in c), None)
        if cluster is None:
            return {EPSILON}
        correct = {y for y in candidates.candidates if y in cluster}
        return correct or {EPSILON}


class OracleNoiseScorer:
    """Gold labels corrupted at a configurable rate; stands in for a trained model.

    Per span, with probability (1 - noise_rate) the earliest in-window gold
    antecedent receives mass (1 - smoothing) with the rest spread uniformly;
    otherwise the peak lands on a uniformly drawn wrong candidate. noise_rate
    1.0 degenerates to the uniform distribution. Deterministic in the seed.
    """

    def __init__(self, gold: dict[str, GoldAnnotation], noise_rate: float, seed: int = 0,
                 smoothing: float = 0.05):
        if not 0.0 <= noise_rate <= 1.0:
            raise ValueError("noise_rate must be in [0, 1]")
        self.gold = gold
        self.noise_rate = noise_rate
        self.seed = seed
        self.smoothing = smoothing

    def fit(self, labeled: Sequence[LabeledDoc], **_kwargs):  # oracle state does not train
        return self

    def _gold_target(self, gold: GoldAnnotation, candidates: CandidateSet):
        cluster = gold.cluster_of(candidates.span)
        if cluster is None:
            return EPSILON
        for y in candidates.candidates:  # earliest in-window gold antecedent
            if y in cluster:
                return y
        return EPSILON

    def score_document(self, doc: Document, spans: list[Span], k: int) -> ScorerOutput:
        gold = self.gold[doc.doc_id]
        distributions = []
        for i in range(len(spans)):
            cands = antecedent_candidates(spans, i, k)
            outcomes = cands.outcomes
            rng = random.Random(f"{self.seed}:{doc.doc_id}:{i}")
            if self.noise_rate >= 1.0:
                probs = {y: 1.0 / len(outcomes) for y in outcomes}
            else:
                target = self._gold_target(gold, cands)
                if len(outcomes) > 1 and rng.random() < self.noise_rate:
                    target = rng.choice([y for y in outcomes if y != target])
                if len(outcomes) == 1:
                    probs = {outcomes[0]: 1.0}
                else:
                    rest = self.smoothing / (len(outcomes) - 1)
                    probs = {y: (1.0 - self.smoothing) if y == target else rest for y in outcomes}
            dist = AntecedentDistribution(span=cands.span, candidates=cands, probs=probs)
            dist.validate()
            distributions.append(dist)
        return ScorerOutput.from_distributions(doc.doc_id, spans, distributions)

    def to_json(self) -> str:
        return json.dumps({"version": 1, "kind": "oracle_noise",
                           "noise_rate": self.noise_rate, "seed": self.seed,
                           "smoothing": self.smoothing})


# ---------------------------------------------------------------------------
# Toy trainable mention ranker

_DIST_BUCKETS = [(1, 1), (2, 2), (3, 3), (4, 7), (8, 15), (16, None)]
_N_DENSE = 4 + len(_DIST_BUCKETS)  # string match, last-token match, speaker, eps bias
_N_HASH = 1024  # hashed (anaphor head, candidate head) lexical pairs
_N_FEATURES = _N_DENSE + _N_HASH


def _pair_slot(anaphor_head: str, candidate_head: str) -> tuple[int, float]:
    """Hashed slot and sign for a lexical pair; the sign hash makes colliding
    pairs cancel instead of accumulate."""
    key = f"{anaphor_head}|{candidate_head}".encode()
    sign = 1.0 if zlib.crc32(b"#" + key) % 2 else -1.0
    return _N_DENSE + zlib.crc32(key) % _N_HASH, sign


def _bucket_index(d: int) -> int:
    for idx, (lo, hi) in enumerate(_DIST_BUCKETS):
        if d >= lo and (hi is None or d <= hi):
            return idx
    raise ValueError(f"bad distance {d}")


class ToyRanker:
    """Linear mention ranker over surface features, trained with a multinomial
    ranking loss (negative log probability of any correct antecedent)."""

    def __init__(self, seed: int = 0, learning_rate: float = 0.5):
        self.seed = seed
        self.learning_rate = learning_rate
        rng = np.random.default_rng(seed)
        self.weights = rng.normal(0.0, 0.01, _N_FEATURES)
        self._accum = np.zeros(_N_FEATURES)  # Adagrad state, kept across fits

    # -- features ------------------------------------------------------------
    def _features(self, doc: Document, spans: list[Span], i: int,
                  cands: CandidateSet) -> np.ndarray:
        outcomes = cands.outcomes
        mat = np.zeros((len(outcomes), _N_FEATURES))
        span = spans[i]
        text = doc.span_text(span).lower()
        last = doc.tokens[span[1]].lower()
        spk = doc.speakers[span[0]] if doc.speakers else None
        index_of = {y: j for j, y in enumerate(spans[:i])}
        for row, y in enumerate(outcomes):
            if y == EPSILON:
                mat[row, 3] = 1.0
                continue
            if doc.span_text(y).lower() == text:
                mat[row, 0] = 1.0
            if doc.tokens[y[1]].lower() == last:
                mat[row, 1] = 1.0
            if spk is not None and doc.speakers[y[0]] == spk:
                mat[row, 2] = 1.0
            mat[row, 4 + _bucket_index(i - index_of[y])] = 1.0
            slot, sign = _pair_slot(last, doc.tokens[y[1]].lower())
            mat[row, slot] = sign
        return mat

    def _softmax(self, scores: np.ndarray) -> np.ndarray:
        z = scores - scores.max()
        e = np.exp(z)
        return e / e.sum()

    # -- training ------------------------------------------------------------
    def fit(self, labeled: Sequence[LabeledDoc], k: int = 100, max_epochs: int = 20,
            patience: int = 2) -> "ToyRanker":
        if not labeled:
            raise ValueError("empty training set")
        # Precompute feature matrices and correct-outcome masks once.
        examples = []
        for ld in labeled:
            for i in range(len(ld.spans)):
                cands = antecedent_candidates(ld.spans, i, k)
                feats = self._features(ld.doc, ld.spans, i, cands)
                correct = ld.correct_outcomes(i, cands)
                mask = np.array([y in correct for y in cands.outcomes], dtype=bool)
                examples.append((feats, mask))
        best_loss = float("inf")
        stall = 0
        self.loss_history: list[float] = []  # mean loss per epoch, last fit
        accum = self._accum  # Adagrad: rare lexical features need larger steps
        for _epoch in range(max_epochs):  # than dense ones; state persists so
            # continued training resumes with small steps instead of a shock
            loss = 0.0
            grad = np.zeros_like(self.weights)
            for feats, mask in examples:
                p = self._softmax(feats @ self.weights)
                p_correct = p[mask].sum()
                p_correct = max(p_correct, 1e-12)
                loss -= np.log(p_correct)
                q = np.where(mask, p / p_correct, 0.0)
                grad += feats.T @ (p - q)
            n = len(examples)
            g = grad / n
            accum += g * g
            self.weights -= self.learning_rate * g / (np.sqrt(accum) + 1e-8)
            loss /= n
            self.loss_history.append(loss)
            if loss < best_loss * (1.0 - 1e-4):  # relative plateau threshold
                best_loss = loss
                stall = 0
            else:
                stall += 1
                if stall >= patience:
                    break
        return self

    # -- scoring -------------------------------------------------------------
    def score_document(self, doc: Document, spans: list[Span], k: int) -> ScorerOutput:
        distributions = []
        for i in range(len(spans)):
            cands = antecedent_candidates(spans, i, k)
            p = self._softmax(self._features(doc, spans, i, cands) @ self.weights)
            probs = {y: float(p[j]) for j, y in enumerate(cands.outcomes)}
            dist = AntecedentDistribution(span=cands.span, candidates=cands, probs=probs)
            dist.validate()
            distributions.append(dist)
        return ScorerOutput.from_distributions(doc.doc_id, spans, distributions)

    # -- serialization -------------------------------------------------------
    def to_json(self) -> str:
        return json.dumps({"version": 1, "kind": "toy_ranker", "seed": self.seed,
                           "learning_rate": self.learning_rate,
                           "weights": self.weights.tolist(),
                           "accum": self._accum.tolist()})

    @classmethod
    def from_json(cls, blob: str) -> "ToyRanker":
        data = json.loads(blob)
        if data.get("kind") != "toy_ranker" or data.get("version") != 1:
            raise ValueError("not a version-1 toy ranker state")
        ranker = cls(seed=data["seed"], learning_rate=data["learning_rate"])
        ranker.weights = np.array(data["weights"])
        if "accum" in data:
            ranker._accum = np.array(data["accum"])
        return ranker


# ---------------------------------------------------------------------------
# Committee averaging


@dataclass
class EnsembleOutput:
    doc_id: str
    spans: list[Span]
    member_labels: list[dict]
    member_distributions: list[list[AntecedentDistribution]]
    mean: ScorerOutput  # averaged distributions with their argmax labels/clusters


def ensemble_average(members: list[ScorerOutput]) -> EnsembleOutput:
    if len(members) < 2:
        raise ValueError("committee needs at least 2 members")
    first = members[0]
    for m in members[1:]:
        if m.spans != first.spans:
            raise ValueError("committee members scored different spans")
        for da, db in zip(first.distributions, m.distributions):
            if da.candidates.outcomes != db.candidates.outcomes:
                raise ValueError("committee members disagree on candidate sets")
    mean_dists = []
    for dists in zip(*(m.distributions for m in members)):
        outcomes = dists[0].candidates.outcomes
        probs = {y: sum(d.probs[y] for d in dists) / len(dists) for y in outcomes}
        md = AntecedentDistribution(span=dists[0].span, candidates=dists[0].candidates,
                                    probs=probs)
        md.validate()
        mean_dists.append(md)
    return EnsembleOutput(
        doc_id=first.doc_id,
        spans=first.spans,
        member_labels=[m.labels for m in members],
        member_distributions=[m.distributions for m in members],
        mean=ScorerOutput.from_distributions(first.doc_id, first.spans, mean_dists),
    )
