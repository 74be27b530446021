"""Annotation protocol: pairwise and discrete question flows, a gold-label
simulated annotator, and the state update for an accepted answer."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from .corpus import EPSILON, GoldAnnotation, Span


class Protocol(Enum):
    PAIRWISE = "pairwise"
    DISCRETE = "discrete"


class Verdict(Enum):
    COREFERENT = "coreferent"
    NOT_COREFERENT = "not_coreferent"


@dataclass(frozen=True)
class FirstAntecedent:
    span: Span


class Abstain(Enum):
    NO_ANTECEDENT = "abstain_no_antecedent"
    INVALID_MENTION = "abstain_invalid_mention"


Followup = Union[FirstAntecedent, Abstain]


@dataclass(frozen=True)
class Query:
    doc_id: str
    target: Span  # the mention m being asked about
    proposed: Span  # the model-predicted antecedent a
    protocol: Protocol = Protocol.DISCRETE

    def __post_init__(self):
        if not (self.proposed < self.target):
            raise ValueError("proposed antecedent must precede the target span")


@dataclass(frozen=True)
class Answer:
    verdict: Verdict
    followup: Optional[Followup] = None  # None = not asked
    initial_seconds: Optional[float] = None
    followup_seconds: Optional[float] = None

    def validate(self, protocol: Protocol):
        if self.verdict is Verdict.COREFERENT or protocol is Protocol.PAIRWISE:
            if self.followup is not None:
                raise ValueError("follow-up answer not expected here")
        elif self.followup is None:
            raise ValueError("discrete protocol requires a follow-up on a negative verdict")
        if isinstance(self.followup, FirstAntecedent):
            pass  # precedence checked against the query in apply_answer


def answer_pairwise(gold: GoldAnnotation, m: Span, a: Span) -> Verdict:
    cluster = gold.cluster_of(m)
    if cluster is not None and a in cluster:
        return Verdict.COREFERENT
    return Verdict.NOT_COREFERENT


def answer_followup(gold: GoldAnnotation, m: Span) -> Followup:
    """First gold antecedent of m, or the applicable abstention."""
    cluster = gold.cluster_of(m)
    if cluster is None:
        return Abstain.INVALID_MENTION
    preceding = sorted(s for s in cluster if s < m)
    if not preceding:
        return Abstain.NO_ANTECEDENT
    return FirstAntecedent(preceding[0])


class SimulatedAnnotator:
    """Answers queries from gold labels, as in the simulated experiments."""

    def __init__(self, gold: dict[str, GoldAnnotation]):
        self.gold = gold

    def answer(self, query: Query) -> Answer:
        gold = self.gold[query.doc_id]
        verdict = answer_pairwise(gold, query.target, query.proposed)
        if verdict is Verdict.COREFERENT or query.protocol is Protocol.PAIRWISE:
            return Answer(verdict=verdict)
        return Answer(verdict=verdict, followup=answer_followup(gold, query.target))


def apply_answer(query: Query, answer: Answer, links, labels: dict,
                 removed: set[Span]) -> None:
    """Fold an accepted answer into the link store and working labels.

    Coreferent: must-link (a, m). Not coreferent: cannot-link (a, m), then the
    follow-up either must-links the corrected antecedent, pins m as discourse
    new, or withdraws m from the query pool. Conflicts from the link store
    propagate to the caller; m is marked queried in all cases.
    """
    answer.validate(query.protocol)
    m, a = query.target, query.proposed
    if answer.verdict is Verdict.COREFERENT:
        links.add_must_link(a, m)
        labels[m] = a
    else:
        links.add_cannot_link(a, m)
        fu = answer.followup
        if isinstance(fu, FirstAntecedent):
            if not (fu.span < m):
                raise ValueError("corrected antecedent must precede the target span")
            links.add_must_link(fu.span, m)
            labels[m] = fu.span
        elif fu is Abstain.NO_ANTECEDENT:
            links.discourse_new.add(m)
            labels[m] = EPSILON
        elif fu is Abstain.INVALID_MENTION:
            labels[m] = EPSILON
            removed.add(m)
    links.queried.add(m)


# ---------------------------------------------------------------------------
# Append-only answer log


def _followup_record(fu: Optional[Followup]):
    if fu is None:
        return None
    if isinstance(fu, FirstAntecedent):
        return {"type": "first_antecedent", "span": list(fu.span)}
    return {"type": fu.value}


def _followup_from_record(rec) -> Optional[Followup]:
    if rec is None:
        return None
    if rec["type"] == "first_antecedent":
        return FirstAntecedent(tuple(rec["span"]))
    return Abstain(rec["type"])


def answer_record(query: Query, answer: Answer, timestamp: Optional[float] = None) -> dict:
    return {
        "doc_id": query.doc_id,
        "target": list(query.target),
        "proposed": list(query.proposed),
        "verdict": answer.verdict.value,
        "followup": _followup_record(answer.followup),
        "initial_seconds": answer.initial_seconds,
        "followup_seconds": answer.followup_seconds,
        "timestamp": timestamp if timestamp is not None else time.time(),
    }


@dataclass
class AnswerLog:
    """Durable JSONL log; every accepted answer is flushed before acknowledgment."""

    path: str
    _fh: object = field(default=None, repr=False)

    def append(self, query: Query, answer: Answer) -> None:
        if self._fh is None:
            self._fh = open(self.path, "a", encoding="utf-8")
        self._fh.write(json.dumps(answer_record(query, answer)) + "\n")
        self._fh.flush()

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def read_answer_log(path: str) -> list[tuple[Query, Answer]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            protocol = (Protocol.PAIRWISE
                        if rec["verdict"] == Verdict.NOT_COREFERENT.value
                        and rec.get("followup") is None else Protocol.DISCRETE)
            query = Query(doc_id=rec["doc_id"], target=tuple(rec["target"]),
                          proposed=tuple(rec["proposed"]), protocol=protocol)
            answer = Answer(verdict=Verdict(rec["verdict"]),
                            followup=_followup_from_record(rec.get("followup")),
                            initial_seconds=rec.get("initial_seconds"),
                            followup_seconds=rec.get("followup_seconds"))
            out.append((query, answer))
    return out
