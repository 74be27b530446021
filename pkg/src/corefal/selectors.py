"""Cluster-aggregated uncertainty and the mention selection strategies.

Antecedent probabilities are first revised against the must-link/cannot-link
store, then aggregated per cluster of the working partition (model clusters
overlaid with queried links). The dummy antecedent is kept as a virtual
"discourse new" outcome so the aggregated distribution stays normalized.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

from .corpus import EPSILON, Span
from .scorer import AntecedentDistribution, ScorerOutput

PROB_ONE_TOL = 1e-9


class Strategy(Enum):
    CLUSTERED_ENTROPY = "clustered_entropy"
    CLUSTERED_QBC = "clustered_qbc"
    LCC_MCU = "lcc_mcu"
    RANDOM = "random"
    RAW_ENTROPY = "raw_entropy"  # ablation: per-antecedent entropy, no clustering


@dataclass(frozen=True)
class SelectionResult:
    span: Span
    score: float
    strategy: Strategy


class ClusterView:
    """Working partition over spans: model-predicted clusters overlaid with
    queried must-links (which take precedence); everything else is a singleton."""

    def __init__(self):
        self._parent: dict[Span, Span] = {}
        self._members: dict[Span, set[Span]] = {}

    def _find(self, x: Span) -> Span:
        if x not in self._parent:
            self._parent[x] = x
            self._members[x] = {x}
            return x
        while self._parent[x] != x:
            self._parent[x] = self._parent[self._parent[x]]
            x = self._parent[x]
        return x

    def _union(self, a: Span, b: Span):
        ra, rb = self._find(a), self._find(b)
        if ra == rb:
            return
        if len(self._members[ra]) < len(self._members[rb]):
            ra, rb = rb, ra
        self._parent[rb] = ra
        self._members[ra] |= self._members.pop(rb)

    def cluster_of(self, span: Span) -> Span:
        """Cluster id for a span; unseen spans are singletons identified by themselves."""
        return self._find(span)

    def members_of(self, span: Span) -> set[Span]:
        return self._members[self._find(span)]

    def is_clustered(self, span: Span) -> bool:
        return len(self.members_of(span)) > 1


def build_cluster_view(predicted_clusters: Iterable[frozenset[Span]], links) -> ClusterView:
    """Overlay queried links on model clusters. Must-link classes are merged
    first; a model cluster merge is skipped when it would join two classes with
    a cannot-link between them."""
    from .constraints import Relation

    view = ClusterView()
    for cls in links.classes():
        members = sorted(cls)
        for other in members[1:]:
            view._union(members[0], other)
    for cluster in predicted_clusters:
        members = sorted(cluster)
        for other in members[1:]:
            ga = view.members_of(members[0])
            gb = view.members_of(other)
            if ga is gb:
                continue
            blocked = any(
                links.query_relation(x, y) == Relation.CL for x in ga for y in gb
            )
            if not blocked:
                view._union(members[0], other)
    return view


# ---------------------------------------------------------------------------
# Link-based probability revision


def revise_distribution_with_links(dist: AntecedentDistribution, links) -> AntecedentDistribution:
    """Apply the revision rules: a must-linked in-window antecedent (earliest,
    if several) takes all mass; cannot-linked candidates are zeroed and the
    rest renormalized; a confirmed discourse-new span gets all mass on EPSILON."""
    from .constraints import Relation

    span = dist.span
    outcomes = dist.candidates.outcomes
    if span in links.discourse_new:
        return AntecedentDistribution(span, dist.candidates,
                                      {y: (1.0 if y == EPSILON else 0.0) for y in outcomes})
    ml = links.ml_partner_in(span, dist.candidates.candidates)
    if ml is not None:
        return AntecedentDistribution(span, dist.candidates,
                                      {y: (1.0 if y == ml else 0.0) for y in outcomes})
    probs = dict(dist.probs)
    changed = False
    for y in dist.candidates.candidates:
        if probs[y] > 0 and links.query_relation(span, y) == Relation.CL:
            probs[y] = 0.0
            changed = True
    if changed:
        total = sum(probs.values())
        if total <= 0:
            probs = {y: (1.0 if y == EPSILON else 0.0) for y in outcomes}
        else:
            probs = {y: p / total for y, p in probs.items()}
    return AntecedentDistribution(span, dist.candidates, probs)


# ---------------------------------------------------------------------------
# Cluster aggregation


def grouped_probabilities(dist: AntecedentDistribution, view: ClusterView) -> dict:
    """Sum candidate probabilities per cluster id; EPSILON stays a virtual outcome."""
    grouped: dict = {}
    for y in dist.candidates.candidates:
        cid = view.cluster_of(y)
        grouped[cid] = grouped.get(cid, 0.0) + dist.probs[y]
    grouped[EPSILON] = grouped.get(EPSILON, 0.0) + dist.probs[EPSILON]
    return grouped


def cluster_probability(dist: AntecedentDistribution, cluster_id, view: ClusterView) -> float:
    if cluster_id == EPSILON:
        return dist.probs[EPSILON]
    return sum(dist.probs[y] for y in dist.candidates.candidates
               if view.cluster_of(y) == cluster_id)


def _entropy(values: Iterable[float]) -> float:
    return -sum(p * math.log(p) for p in values if p > 0.0)


def clustered_entropy(dist: AntecedentDistribution, view: ClusterView) -> float:
    return _entropy(grouped_probabilities(dist, view).values())


def raw_entropy(dist: AntecedentDistribution) -> float:
    return _entropy(dist.probs[y] for y in dist.candidates.outcomes)


# ---------------------------------------------------------------------------
# Strategies
#
# `eligible` is the caller's query pool: unqueried spans that can still form a
# question (at least one non-EPSILON candidate, not withdrawn as invalid).


def _argmax_span(scores: dict[Span, float]) -> Optional[tuple[Span, float]]:
    best = None
    for span in sorted(scores):  # earliest span wins ties
        if best is None or scores[span] > best[1] + 1e-12:
            best = (span, scores[span])
    return best


def clustered_entropy_select(dists: Sequence[AntecedentDistribution], view: ClusterView,
                             eligible: set[Span]) -> Optional[SelectionResult]:
    scores = {d.span: clustered_entropy(d, view) for d in dists if d.span in eligible}
    best = _argmax_span(scores)
    if best is None:
        return None
    return SelectionResult(span=best[0], score=best[1], strategy=Strategy.CLUSTERED_ENTROPY)


def raw_entropy_select(dists: Sequence[AntecedentDistribution],
                       eligible: set[Span]) -> Optional[SelectionResult]:
    scores = {d.span: raw_entropy(d) for d in dists if d.span in eligible}
    best = _argmax_span(scores)
    if best is None:
        return None
    return SelectionResult(span=best[0], score=best[1], strategy=Strategy.RAW_ENTROPY)


def revised_votes(span: Span, candidates, member_labels: Sequence[dict], links) -> dict:
    """Vote counts per outcome with the link revisions applied: an in-window
    must-link gets every vote, cannot-linked candidates get none."""
    from .constraints import Relation

    outcomes = candidates.outcomes
    m = len(member_labels)
    ml = links.ml_partner_in(span, candidates.candidates)
    if ml is not None:
        return {y: (m if y == ml else 0) for y in outcomes}
    if span in links.discourse_new:
        return {y: (m if y == EPSILON else 0) for y in outcomes}
    votes = {y: 0 for y in outcomes}
    for labels in member_labels:
        vote = labels.get(span, EPSILON)
        if vote in votes:
            votes[vote] += 1
    for y in candidates.candidates:
        if votes[y] and links.query_relation(span, y) == Relation.CL:
            votes[y] = 0
    return votes


def vote_entropy(span: Span, candidates, member_labels: Sequence[dict], view: ClusterView,
                 links) -> float:
    votes = revised_votes(span, candidates, member_labels, links)
    m = len(member_labels)
    grouped: dict = {}
    for y in candidates.candidates:
        cid = view.cluster_of(y)
        grouped[cid] = grouped.get(cid, 0) + votes[y]
    grouped[EPSILON] = grouped.get(EPSILON, 0) + votes[EPSILON]
    return _entropy(v / m for v in grouped.values() if v)


def clustered_qbc_select(dists: Sequence[AntecedentDistribution],
                         member_labels: Sequence[dict], view: ClusterView, links,
                         eligible: set[Span]) -> Optional[SelectionResult]:
    if len(member_labels) < 2:
        raise ValueError("query-by-committee needs at least 2 members")
    scores = {d.span: vote_entropy(d.span, d.candidates, member_labels, view, links)
              for d in dists if d.span in eligible}
    best = _argmax_span(scores)
    if best is None:
        return None
    return SelectionResult(span=best[0], score=best[1], strategy=Strategy.CLUSTERED_QBC)


def lcc_mcu_select(dists: Sequence[AntecedentDistribution], view: ClusterView,
                   eligible: set[Span], budget: int) -> list[SelectionResult]:
    """Least-coreferent clustered plus most-coreferent unclustered mentions.

    The per-document budget L splits as n = min(L/2, #clustered) to the
    clustered side and m = min(L - n, #unclustered) to the unclustered side.
    Spans whose aggregated distribution already has a probability-1 outcome
    are disregarded.
    """
    if budget <= 0:
        return []
    clustered: list[tuple[float, Span]] = []
    unclustered: list[tuple[float, Span]] = []
    for d in dists:
        if d.span not in eligible:
            continue
        grouped = grouped_probabilities(d, view)
        if any(p >= 1.0 - PROB_ONE_TOL for p in grouped.values()):
            continue
        if view.is_clustered(d.span):
            clustered.append((grouped.get(view.cluster_of(d.span), 0.0), d.span))
        else:
            best = max((p for cid, p in grouped.items() if cid != EPSILON), default=0.0)
            unclustered.append((best, d.span))
    n = min(budget // 2, len(clustered))
    m = min(budget - n, len(unclustered))
    clustered.sort(key=lambda t: (t[0], t[1]))
    unclustered.sort(key=lambda t: (-t[0], t[1]))
    picks = [(s, span) for s, span in clustered[:n]] + [(s, span) for s, span in unclustered[:m]]
    return [SelectionResult(span=span, score=s, strategy=Strategy.LCC_MCU) for s, span in picks]


def random_select(eligible: set[Span], rng: random.Random) -> Optional[SelectionResult]:
    if not eligible:
        return None
    span = rng.choice(sorted(eligible))
    return SelectionResult(span=span, score=0.0, strategy=Strategy.RANDOM)


def pairwise_entropy_select(dists: Sequence[AntecedentDistribution],
                            eligible: set[Span],
                            queried_pairs: set[frozenset]) -> Optional[tuple[Span, Span, float]]:
    """Baseline pair selection: the (mention, candidate) pair whose coreference
    probability has maximal binary entropy, skipping already-queried pairs."""
    best = None
    for d in dists:
        if d.span not in eligible:
            continue
        for y in d.candidates.candidates:
            if frozenset((d.span, y)) in queried_pairs:
                continue
            p = min(max(d.probs[y], 0.0), 1.0)
            h = _entropy([p, 1.0 - p])
            key = (h, y, d.span)
            if best is None or h > best[0] + 1e-12:
                best = (h, y, d.span)
    if best is None:
        return None
    return (best[2], best[1], best[0])
