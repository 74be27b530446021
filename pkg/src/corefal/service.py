"""HTTP annotation service: bridges live human answers into the annotation
session machinery. One outstanding query per session; every accepted answer is
appended to the JSONL log before it is acknowledged."""

from __future__ import annotations

import threading
import uuid
from typing import Literal, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field, model_validator

from .alloop import BudgetLedger, DocumentAnnotation
from .annotator import (Abstain, Answer, AnswerLog, FirstAntecedent, Protocol, Query,
                        Verdict, read_answer_log)
from .constraints import LinkStore
from .corpus import Corpus, candidate_spans
from .selectors import Strategy


class SessionRequest(BaseModel):
    doc_ids: Optional[list[str]] = None  # default: every corpus document
    protocol: Literal["pairwise", "discrete"] = "discrete"
    mode: Literal["live", "timing_study"] = "live"
    queries_per_doc: Optional[int] = Field(default=None, ge=0)


class SessionCreated(BaseModel):
    session_id: str


class QueryResponse(BaseModel):
    done: bool
    query_id: Optional[int] = None
    doc_id: Optional[str] = None
    tokens: Optional[list[str]] = None
    target: Optional[list[int]] = None
    proposed: Optional[list[int]] = None
    protocol: Optional[str] = None


class FollowupPayload(BaseModel):
    type: Literal["first_antecedent", "abstain_no_antecedent", "abstain_invalid_mention"]
    span: Optional[list[int]] = None

    @model_validator(mode="after")
    def _span_matches_type(self):
        if self.type == "first_antecedent" and (self.span is None or len(self.span) != 2):
            raise ValueError("first_antecedent requires a [start, end] span")
        if self.type != "first_antecedent" and self.span is not None:
            raise ValueError("abstentions carry no span")
        return self


class AnswerPayload(BaseModel):
    query_id: int
    doc_id: str
    target: list[int]
    proposed: list[int]
    verdict: Literal["coreferent", "not_coreferent"]
    followup: Optional[FollowupPayload] = None
    initial_seconds: Optional[float] = None
    followup_seconds: Optional[float] = None

    def to_answer(self, protocol: Protocol) -> Answer:
        fu = None
        if self.followup is not None:
            if self.followup.type == "first_antecedent":
                fu = FirstAntecedent(tuple(self.followup.span))
            else:
                fu = Abstain(self.followup.type)
        answer = Answer(verdict=Verdict(self.verdict), followup=fu,
                        initial_seconds=self.initial_seconds,
                        followup_seconds=self.followup_seconds)
        answer.validate(protocol)
        return answer


class AnswerAck(BaseModel):
    accepted: bool
    conflicts: list[str] = Field(default_factory=list)


class _Session:
    def __init__(self, session_id: str, corpus: Corpus, scorer, doc_ids: list[str],
                 protocol: Protocol, mode: str, k: int, queries_per_doc: Optional[int],
                 seed: int):
        self.session_id = session_id
        self.lock = threading.Lock()
        self.corpus = corpus
        self.scorer = scorer
        self.queue = list(doc_ids)
        self.protocol = protocol
        self.k = k
        self.queries_per_doc = queries_per_doc
        self.seed = seed
        # Live mode re-selects by clustered entropy after every answer; the
        # timing-study queue walks the document's spans in a shuffled order.
        self.strategy = Strategy.RANDOM if mode == "timing_study" else Strategy.CLUSTERED_ENTROPY
        self.ledger = BudgetLedger()
        self.current_doc: Optional[DocumentAnnotation] = None
        self.outstanding: Optional[tuple[int, Query]] = None
        self.query_counter = 0
        self.answered = 0

    def _advance_doc(self) -> Optional[DocumentAnnotation]:
        while self.queue:
            doc_id = self.queue.pop(0)
            doc = self.corpus.doc(doc_id)
            gold = self.corpus.gold[doc_id]
            spans = candidate_spans(doc, gold)
            output = self.scorer.score_document(doc, spans, self.k)
            session = DocumentAnnotation(
                doc=doc, distributions=output.distributions, strategy=self.strategy,
                protocol=self.protocol, query_budget=self.queries_per_doc, seed=self.seed)
            if session.next_query() is not None:
                return session
        return None

    def next_query(self) -> Optional[tuple[int, Query]]:
        if self.outstanding is not None:
            return self.outstanding
        if self.current_doc is None:
            self.current_doc = self._advance_doc()
            if self.current_doc is None:
                return None
        query = self.current_doc.next_query()
        if query is None:
            self.current_doc = self._advance_doc()
            if self.current_doc is None:
                return None
            query = self.current_doc.next_query()
            if query is None:
                return None
        self.query_counter += 1
        self.outstanding = (self.query_counter, query)
        return self.outstanding

    def progress(self) -> dict:
        links = self.current_doc.links if self.current_doc else LinkStore()
        return {
            "session_id": self.session_id,
            "answered": self.answered,
            "documents_remaining": len(self.queue) + (1 if self.current_doc else 0),
            "ledger": self.ledger.snapshot(),
            "constraints": {
                "ml_classes": [sorted(list(s) for s in cls) for cls in links.classes()],
                "cl_edges": [[list(a), list(b)] for a, b in links.cl_edges()],
                "discourse_new": sorted(list(s) for s in links.discourse_new),
                "queried": len(links.queried),
            },
        }


def create_app(corpus: Corpus, scorer, k: int = 20, seed: int = 0,
               log_path: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="corefal annotation service")
    sessions: dict[str, _Session] = {}
    log = AnswerLog(log_path) if log_path else None

    def get_session(session_id: str) -> _Session:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session

    @app.post("/sessions", response_model=SessionCreated)
    def create_session(request: SessionRequest):
        doc_ids = request.doc_ids or [d.doc_id for d in corpus.documents]
        for doc_id in doc_ids:
            if doc_id not in corpus.gold:
                raise HTTPException(status_code=422, detail=f"unknown document {doc_id}")
        session_id = uuid.uuid4().hex[:12]
        sessions[session_id] = _Session(
            session_id=session_id, corpus=corpus, scorer=scorer, doc_ids=doc_ids,
            protocol=Protocol(request.protocol), mode=request.mode, k=k,
            queries_per_doc=request.queries_per_doc, seed=seed)
        return SessionCreated(session_id=session_id)

    @app.get("/sessions/{session_id}/next", response_model=QueryResponse)
    def next_query(session_id: str):
        session = get_session(session_id)
        with session.lock:
            item = session.next_query()
            if item is None:
                return QueryResponse(done=True)
            query_id, query = item
            doc = corpus.doc(query.doc_id)
            return QueryResponse(
                done=False, query_id=query_id, doc_id=query.doc_id,
                tokens=list(doc.tokens), target=list(query.target),
                proposed=list(query.proposed), protocol=query.protocol.value)

    @app.post("/sessions/{session_id}/answer", response_model=AnswerAck)
    def post_answer(session_id: str, payload: AnswerPayload):
        session = get_session(session_id)
        with session.lock:
            if session.outstanding is None:
                raise HTTPException(status_code=409, detail="no outstanding query")
            query_id, query = session.outstanding
            if (payload.query_id != query_id or payload.doc_id != query.doc_id
                    or tuple(payload.target) != query.target
                    or tuple(payload.proposed) != query.proposed):
                raise HTTPException(status_code=409, detail="stale or mismatched query")
            try:
                answer = payload.to_answer(query.protocol)
            except ValueError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            if log is not None:  # durable before acknowledgment
                log.append(query, answer)
            from .constraints import LinkConflict
            try:
                session.current_doc.accept(query, answer, session.ledger)
            except LinkConflict as exc:
                return AnswerAck(accepted=False, conflicts=[str(exc)])
            session.outstanding = None
            session.answered += 1
            return AnswerAck(accepted=True)

    @app.get("/sessions/{session_id}/progress")
    def progress(session_id: str):
        session = get_session(session_id)
        with session.lock:
            return session.progress()

    return app


def replay_answer_log(path: str) -> dict[str, LinkStore]:
    """Rebuild per-document constraint state from an answer log."""
    from .annotator import apply_answer
    from .constraints import LinkConflict

    stores: dict[str, LinkStore] = {}
    labels: dict[str, dict] = {}
    for query, answer in read_answer_log(path):
        store = stores.setdefault(query.doc_id, LinkStore())
        try:
            apply_answer(query, answer, store, labels.setdefault(query.doc_id, {}), set())
        except LinkConflict:
            continue  # logged but rejected at accept time
    return stores
