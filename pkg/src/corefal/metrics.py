"""Coreference evaluation: MUC, B-cubed, CEAF-e, their average, and
mention-detection micro-F1. Predicted singleton clusters are dropped before
scoring, per the CoNLL convention."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .corpus import Span

Clustering = Sequence[Iterable[Span]]


@dataclass(frozen=True)
class ScoreTriple:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_pr(cls, p_num: float, p_den: float, r_num: float, r_den: float) -> "ScoreTriple":
        p = p_num / p_den if p_den else 0.0
        r = r_num / r_den if r_den else 0.0
        f1 = 2 * p * r / (p + r) if p + r else 0.0
        return cls(p, r, f1)


def _prep(clustering: Clustering) -> list[frozenset[Span]]:
    return [frozenset(c) for c in clustering if len(set(c)) > 1]


def muc(gold: Clustering, pred: Clustering) -> ScoreTriple:
    """Link-based metric: recall counts the links missing to reassemble each
    gold cluster from its partition by the prediction; precision is symmetric."""
    gold_c, pred_c = _prep(gold), _prep(pred)

    def side(sets: list[frozenset[Span]], other: list[frozenset[Span]]):
        num = den = 0
        for s in sets:
            partitions = {next((i for i, o in enumerate(other) if m in o), ("solo", m))
                          for m in s}
            num += len(s) - len(partitions)
            den += len(s) - 1
        return num, den

    r_num, r_den = side(gold_c, pred_c)
    p_num, p_den = side(pred_c, gold_c)
    return ScoreTriple.from_pr(p_num, p_den, r_num, r_den)


def b_cubed(gold: Clustering, pred: Clustering) -> ScoreTriple:
    gold_c, pred_c = _prep(gold), _prep(pred)
    gold_of = {m: c for c in gold_c for m in c}
    pred_of = {m: c for c in pred_c for m in c}
    p_num = sum(len(pred_of[m] & gold_of[m]) / len(pred_of[m])
                for m in pred_of if m in gold_of)
    r_num = sum(len(pred_of[m] & gold_of[m]) / len(gold_of[m])
                for m in gold_of if m in pred_of)
    return ScoreTriple.from_pr(p_num, len(pred_of), r_num, len(gold_of))


def _phi4(a: frozenset[Span], b: frozenset[Span]) -> float:
    return 2 * len(a & b) / (len(a) + len(b))


def ceaf_e(gold: Clustering, pred: Clustering) -> ScoreTriple:
    """Entity-based CEAF with similarity phi4, under the optimal one-to-one
    entity alignment (maximum-weight bipartite matching)."""
    gold_c, pred_c = _prep(gold), _prep(pred)
    if not gold_c or not pred_c:
        return ScoreTriple(0.0, 0.0, 0.0)
    sim = np.zeros((len(gold_c), len(pred_c)))
    for i, g in enumerate(gold_c):
        for j, p in enumerate(pred_c):
            sim[i, j] = _phi4(g, p)
    rows, cols = linear_sum_assignment(-sim)
    phi = float(sim[rows, cols].sum())
    return ScoreTriple.from_pr(phi, len(pred_c), phi, len(gold_c))


def avg_f1(gold: Clustering, pred: Clustering) -> float:
    return (muc(gold, pred).f1 + b_cubed(gold, pred).f1 + ceaf_e(gold, pred).f1) / 3


def mention_detection_f1(pairs: Sequence[tuple[Clustering, Clustering]]) -> float:
    """Document-micro span-set F1 between gold mentions and predicted clustered
    mentions; `pairs` holds (gold, pred) clusterings per document."""
    tp = n_gold = n_pred = 0
    for gold, pred in pairs:
        gold_m = {m for c in _prep(gold) for m in c}
        pred_m = {m for c in _prep(pred) for m in c}
        tp += len(gold_m & pred_m)
        n_gold += len(gold_m)
        n_pred += len(pred_m)
    p = tp / n_pred if n_pred else 0.0
    r = tp / n_gold if n_gold else 0.0
    return 2 * p * r / (p + r) if p + r else 0.0
