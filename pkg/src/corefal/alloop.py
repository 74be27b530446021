"""Active-learning orchestration: the training loop, the per-document
annotation session, the calibrated budget model, the baselines, and the
learning-curve reports."""

from __future__ import annotations

import csv
import math
import random
import statistics
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .annotator import Protocol, Query, SimulatedAnnotator, Verdict
from .annotator import apply_answer as _apply_answer
from .constraints import LinkStore, ReferenceStore
from .corpus import EPSILON, Corpus, Document, GoldAnnotation, Span, candidate_spans
from .metrics import avg_f1, b_cubed, ceaf_e, mention_detection_f1, muc
from .scorer import (AntecedentDistribution, LabeledDoc, OracleNoiseScorer, ScorerOutput,
                     ToyRanker, clusters_from_labels, ensemble_average)
from .selectors import (Strategy, build_cluster_view, clustered_entropy_select,
                        clustered_qbc_select, lcc_mcu_select, pairwise_entropy_select,
                        random_select, raw_entropy_select, revise_distribution_with_links)

# Calibrated per-question costs, in seconds.
TIME_INITIAL = 15.96
TIME_FOLLOWUP = 15.57
TIME_ONLY_DISCRETE = 28.01
PAIRWISE_PER_NC = 0.976  # pairwise questions answerable per not-coreferent discrete one


def time_pairwise(p: int) -> float:
    return TIME_INITIAL * p


def time_discrete(d_c: int, d_nc: int) -> float:
    return TIME_INITIAL * d_c + TIME_FOLLOWUP * d_nc


def pairwise_equivalent(d_c: int, d_nc: int) -> float:
    """Pairwise question count answerable in the time of (d_c, d_nc) discrete ones."""
    return d_c + PAIRWISE_PER_NC * d_nc


def max_pairwise_questions(m: int, k: int) -> int:
    """Worst-case pairwise question count for m top spans and a K-antecedent window."""
    if k < 1:
        raise ValueError("K must be >= 1")
    if m < k:
        return m * (m - 1) // 2
    return k * (k - 1) // 2 + (m - k) * k


def full_label_cost_ratio(m: int, k: int, only_discrete: bool = False) -> float:
    """Worst-case exhaustive discrete labeling time (m questions, all answered
    not-coreferent, each costing initial plus follow-up) over worst-case
    pairwise labeling time. ``only_discrete`` switches to the standalone
    discrete question cost instead of the two-stage one."""
    pairs = max_pairwise_questions(m, k)
    if pairs == 0:
        raise ZeroDivisionError("no pairwise questions possible; ratio undefined")
    per_question = TIME_ONLY_DISCRETE if only_discrete else TIME_INITIAL + TIME_FOLLOWUP
    return (m * per_question) / (pairs * TIME_INITIAL)


@dataclass
class BudgetLedger:
    p: int = 0  # pairwise answers
    d_c: int = 0  # discrete answers, coreferent verdict
    d_nc: int = 0  # discrete answers, not-coreferent verdict

    @property
    def elapsed_seconds(self) -> float:
        return time_pairwise(self.p) + time_discrete(self.d_c, self.d_nc)

    def record(self, query: Query, verdict: Verdict) -> None:
        if query.protocol is Protocol.PAIRWISE:
            self.p += 1
        elif verdict is Verdict.COREFERENT:
            self.d_c += 1
        else:
            self.d_nc += 1

    def snapshot(self) -> dict:
        return {"p": self.p, "d_c": self.d_c, "d_nc": self.d_nc,
                "elapsed_seconds": self.elapsed_seconds}

    def snapshot_fields(self) -> dict:
        return {"p": self.p, "d_c": self.d_c, "d_nc": self.d_nc,
                "budget_seconds": self.elapsed_seconds}


class ConfigError(ValueError):
    def __init__(self, fieldname: str, message: str):
        super().__init__(f"config field {fieldname!r}: {message}")
        self.fieldname = fieldname


@dataclass
class LoopConfig:
    """Loop hyperparameters. Defaults are desk scale; the full-scale settings
    (seed 700, batch 280, K 100) remain reachable through the same fields."""

    strategy: Strategy = Strategy.CLUSTERED_ENTROPY
    protocol: Protocol = Protocol.DISCRETE
    seed_docs: int = 4
    batch_size: int = 8
    queries_per_doc: int = 40
    ensemble_size: int = 3
    max_epochs: int = 20
    patience: int = 2
    k: int = 20
    seed: int = 0
    dev_docs: int = 10
    scorer: str = "toy"  # "toy" | "oracle"
    scorer_noise: float = 0.3  # oracle scorer only
    distractor_rate: float = 0.0
    clustered: bool = True  # ablation switch: False = raw per-antecedent entropy
    incremental_closures: bool = True  # ablation switch: False = reference store

    def validate(self) -> "LoopConfig":
        if self.batch_size < 1:
            raise ConfigError("batch_size", "must be >= 1")
        if self.strategy is Strategy.CLUSTERED_QBC and self.ensemble_size < 2:
            raise ConfigError("ensemble_size", "must be >= 2 for clustered_qbc")
        if self.k < 1:
            raise ConfigError("k", "must be >= 1")
        if self.seed_docs < 1:
            raise ConfigError("seed_docs", "must be >= 1")
        if self.queries_per_doc < 0:
            raise ConfigError("queries_per_doc", "must be >= 0")
        if self.scorer not in ("toy", "oracle"):
            raise ConfigError("scorer", "must be 'toy' or 'oracle'")
        if not 0.0 <= self.scorer_noise <= 1.0:
            raise ConfigError("scorer_noise", "must be in [0, 1]")
        return self

    def to_dict(self) -> dict:
        d = self.__dict__.copy()
        d["strategy"] = self.strategy.value
        d["protocol"] = self.protocol.value
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "LoopConfig":
        data = dict(data)
        try:
            if "strategy" in data:
                data["strategy"] = Strategy(data["strategy"])
        except ValueError:
            raise ConfigError("strategy", f"unknown strategy {data['strategy']!r}")
        try:
            if "protocol" in data:
                data["protocol"] = Protocol(data["protocol"])
        except ValueError:
            raise ConfigError("protocol", f"unknown protocol {data['protocol']!r}")
        known = {f for f in cls.__dataclass_fields__}
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown config field")
        return cls(**data).validate()


@dataclass
class RoundReport:
    round_index: int
    p: int
    d_c: int
    d_nc: int
    budget_seconds: float
    muc_f1: float
    b3_f1: float
    ceafe_f1: float
    avg_f1: float
    mention_f1: float
    delta_f1: float


# ---------------------------------------------------------------------------
# Per-document annotation session


class DocumentAnnotation:
    """Mutable annotation state for one document: working labels, link store,
    and the select-propose-apply cycle. Used by both the simulation loop and
    the live annotation service."""

    def __init__(self, doc: Document, distributions: Sequence[AntecedentDistribution],
                 member_labels: Optional[Sequence[dict]] = None,
                 strategy: Strategy = Strategy.CLUSTERED_ENTROPY,
                 protocol: Protocol = Protocol.DISCRETE,
                 incremental_closures: bool = True,
                 query_budget: Optional[int] = None, seed: int = 0):
        self.doc = doc
        self.distributions = list(distributions)
        self.member_labels = list(member_labels) if member_labels else None
        self.strategy = strategy
        self.protocol = protocol
        self.links = LinkStore() if incremental_closures else ReferenceStore()
        self.labels = {d.span: d.argmax() for d in self.distributions}
        self.removed: set[Span] = set()
        self.queried_pairs: set[frozenset] = set()
        self.query_budget = query_budget
        self.n_asked = 0
        self._rng = random.Random(f"{seed}:{doc.doc_id}:select")

    def revised(self) -> list[AntecedentDistribution]:
        return [revise_distribution_with_links(d, self.links) for d in self.distributions]

    def _select(self, revised: Sequence[AntecedentDistribution]):
        eligible = {d.span for d in revised
                    if d.candidates.candidates and d.span not in self.removed
                    and d.span not in self.links.queried}
        if not eligible:
            return None
        view = build_cluster_view(clusters_from_labels(self.labels), self.links)
        if self.strategy is Strategy.CLUSTERED_ENTROPY:
            return clustered_entropy_select(revised, view, eligible)
        if self.strategy is Strategy.RAW_ENTROPY:
            return raw_entropy_select(revised, eligible)
        if self.strategy is Strategy.RANDOM:
            return random_select(eligible, self._rng)
        if self.strategy is Strategy.CLUSTERED_QBC:
            if not self.member_labels:
                raise ValueError("clustered_qbc needs committee member labels")
            return clustered_qbc_select(revised, self.member_labels, view, self.links, eligible)
        if self.strategy is Strategy.LCC_MCU:
            budget = (self.query_budget - self.n_asked if self.query_budget is not None
                      else len(eligible))
            picks = lcc_mcu_select(revised, view, eligible, budget)
            return picks[0] if picks else None
        raise ValueError(f"unhandled strategy {self.strategy}")

    def next_query(self) -> Optional[Query]:
        if self.query_budget is not None and self.n_asked >= self.query_budget:
            return None
        revised = self.revised()
        if self.protocol is Protocol.PAIRWISE:
            eligible = {d.span for d in revised
                        if d.candidates.candidates and d.span not in self.removed}
            pick = pairwise_entropy_select(revised, eligible, self.queried_pairs)
            if pick is None:
                return None
            m, a, _score = pick
            return Query(doc_id=self.doc.doc_id, target=m, proposed=a,
                         protocol=Protocol.PAIRWISE)
        sel = self._select(revised)
        if sel is None:
            return None
        dist = next(d for d in revised if d.span == sel.span)
        proposed = None
        best = -1.0
        for y in dist.candidates.candidates:  # argmax over non-dummy candidates
            if dist.probs[y] > best + 1e-12:
                proposed, best = y, dist.probs[y]
        return Query(doc_id=self.doc.doc_id, target=sel.span, proposed=proposed,
                     protocol=Protocol.DISCRETE)

    def accept(self, query: Query, answer, ledger: Optional[BudgetLedger] = None) -> None:
        _apply_answer(query, answer, self.links, self.labels, self.removed)
        if query.protocol is Protocol.PAIRWISE:
            self.queried_pairs.add(frozenset((query.target, query.proposed)))
        self.n_asked += 1
        if ledger is not None:
            ledger.record(query, answer.verdict)

    def clusters(self) -> list[frozenset[Span]]:
        return clusters_from_labels(self.labels)


# ---------------------------------------------------------------------------
# Training loop


def make_scorers(config: LoopConfig, corpus: Corpus) -> list:
    n = config.ensemble_size if config.strategy is Strategy.CLUSTERED_QBC else 1
    if config.scorer == "oracle":
        return [OracleNoiseScorer(corpus.gold, config.scorer_noise, seed=config.seed + i)
                for i in range(n)]
    return [ToyRanker(seed=config.seed + i) for i in range(n)]


def _fit_all(scorers, labeled: Sequence[LabeledDoc], config: LoopConfig):
    for i, s in enumerate(scorers):
        docs = labeled
        if len(scorers) > 1:
            # Committee members bootstrap-resample the training docs; a
            # deterministic full-batch fit would otherwise converge every
            # member to the same weights and zero out the vote entropy.
            rng = random.Random(f"{config.seed}:{i}:{len(labeled)}")
            docs = [labeled[rng.randrange(len(labeled))] for _ in range(len(labeled))]
        s.fit(docs, k=config.k, max_epochs=config.max_epochs, patience=config.patience)


def _score_doc(scorers, doc: Document, spans: list[Span], k: int):
    """Returns (mean ScorerOutput, member label dicts or None)."""
    outputs = [s.score_document(doc, spans, k) for s in scorers]
    if len(outputs) == 1:
        return outputs[0], None
    ens = ensemble_average(outputs)
    return ens.mean, ens.member_labels


def evaluate_dev(scorers, dev_docs: Sequence[Document], corpus: Corpus,
                 config: LoopConfig) -> dict:
    """Macro-averaged coreference F1s plus micro mention-detection F1 on dev."""
    if not dev_docs:
        return {"muc_f1": 0.0, "b3_f1": 0.0, "ceafe_f1": 0.0, "avg_f1": 0.0,
                "mention_f1": 0.0}
    mucs, b3s, ceafes = [], [], []
    pairs = []
    for doc in dev_docs:
        gold = corpus.gold[doc.doc_id]
        spans = candidate_spans(doc, gold, config.distractor_rate, config.seed)
        output, _ = _score_doc(scorers, doc, spans, config.k)
        pred = output.predicted_clusters
        gold_clusters = list(gold.clusters)
        mucs.append(muc(gold_clusters, pred).f1)
        b3s.append(b_cubed(gold_clusters, pred).f1)
        ceafes.append(ceaf_e(gold_clusters, pred).f1)
        pairs.append((gold_clusters, pred))
    result = {"muc_f1": statistics.mean(mucs), "b3_f1": statistics.mean(b3s),
              "ceafe_f1": statistics.mean(ceafes),
              "mention_f1": mention_detection_f1(pairs)}
    result["avg_f1"] = (result["muc_f1"] + result["b3_f1"] + result["ceafe_f1"]) / 3
    return result


def delta_f1(gold: GoldAnnotation, before: Sequence, after: Sequence) -> float:
    """F1 gain on one document from overlaying annotation on model predictions."""
    return avg_f1(list(gold.clusters), list(after)) - avg_f1(list(gold.clusters), list(before))


def _split(corpus: Corpus, config: LoopConfig):
    docs = corpus.documents
    if config.dev_docs >= len(docs):
        raise ConfigError("dev_docs", "dev split leaves no training documents")
    train = docs[: len(docs) - config.dev_docs] if config.dev_docs else list(docs)
    dev = docs[len(docs) - config.dev_docs:] if config.dev_docs else []
    if config.seed_docs >= len(train):
        raise ConfigError("seed_docs", "seed split leaves no unlabeled documents")
    return train[: config.seed_docs], list(train[config.seed_docs:]), dev


def _gold_labeled(corpus: Corpus, docs: Sequence[Document], config: LoopConfig) -> list[LabeledDoc]:
    out = []
    for doc in docs:
        gold = corpus.gold[doc.doc_id]
        spans = candidate_spans(doc, gold, config.distractor_rate, config.seed)
        out.append(LabeledDoc(doc=doc, spans=spans, clusters=list(gold.clusters)))
    return out


def annotate_document(doc: Document, scorers, corpus: Corpus, config: LoopConfig,
                      annotator, ledger: BudgetLedger) -> tuple[LabeledDoc, float]:
    """Run the per-document query cycle; returns the labeled document and its
    annotation F1 gain against gold."""
    gold = corpus.gold[doc.doc_id]
    spans = candidate_spans(doc, gold, config.distractor_rate, config.seed)
    output, member_labels = _score_doc(scorers, doc, spans, config.k)
    session = DocumentAnnotation(
        doc=doc, distributions=output.distributions, member_labels=member_labels,
        strategy=config.strategy, protocol=config.protocol,
        incremental_closures=config.incremental_closures,
        query_budget=config.queries_per_doc, seed=config.seed)
    while True:
        query = session.next_query()
        if query is None:
            break
        answer = annotator.answer(query)
        session.accept(query, answer, ledger)
    after = session.clusters()
    gain = delta_f1(gold, output.predicted_clusters, after)
    return LabeledDoc(doc=doc, spans=spans, clusters=after), gain


def run_active_learning(config: LoopConfig, corpus: Corpus,
                        annotator=None) -> list[RoundReport]:
    """The main loop: train on the labeled pool, annotate a batch of unlabeled
    documents with up to Q queries each, fold the batch into the pool, repeat;
    finish with a from-scratch retrain once everything is labeled."""
    config.validate()
    if annotator is None:
        annotator = SimulatedAnnotator(corpus.gold)
    seed_docs, pool, dev = _split(corpus, config)
    labeled: list[LabeledDoc] = _gold_labeled(corpus, seed_docs, config)
    scorers = make_scorers(config, corpus)
    ledger = BudgetLedger()
    reports: list[RoundReport] = []

    def emit(round_index: int, scores: dict, gain: float):
        reports.append(RoundReport(round_index=round_index, **ledger.snapshot_fields(),
                                   **scores, delta_f1=gain))

    _fit_all(scorers, labeled, config)
    emit(0, evaluate_dev(scorers, dev, corpus, config), 0.0)
    round_index = 1
    while pool:
        batch, pool = pool[: config.batch_size], pool[config.batch_size:]
        gains = []
        for doc in batch:
            labeled_doc, gain = annotate_document(doc, scorers, corpus, config,
                                                  annotator, ledger)
            labeled.append(labeled_doc)
            gains.append(gain)
        _fit_all(scorers, labeled, config)  # continue training with the new batch
        emit(round_index, evaluate_dev(scorers, dev, corpus, config),
             statistics.mean(gains) if gains else 0.0)
        round_index += 1
    # All documents added: retrain from scratch.
    scorers = make_scorers(config, corpus)
    _fit_all(scorers, labeled, config)
    emit(round_index, evaluate_dev(scorers, dev, corpus, config), 0.0)
    return reports


def run_qbc(config: LoopConfig, corpus: Corpus, annotator=None) -> list[RoundReport]:
    """Committee variant: selection by cluster vote entropy over member labels,
    proposals from the averaged distributions."""
    if config.strategy is not Strategy.CLUSTERED_QBC:
        config = LoopConfig(**{**config.__dict__, "strategy": Strategy.CLUSTERED_QBC})
    return run_active_learning(config, corpus, annotator)


# ---------------------------------------------------------------------------
# Baselines


def fully_labeled_baseline(config: LoopConfig, corpus: Corpus, budget_seconds: float,
                           only_discrete_cost: bool = False) -> RoundReport:
    """Random document subset whose simulated exhaustive discrete labeling cost
    fits the budget, trained to convergence with gold labels."""
    config.validate()
    seed_docs, pool, dev = _split(corpus, config)
    per_span = TIME_ONLY_DISCRETE if only_discrete_cost else TIME_INITIAL + TIME_FOLLOWUP
    costs = {doc.doc_id: per_span * len(corpus.gold[doc.doc_id].mentions) for doc in pool}
    if budget_seconds < min(costs.values(), default=math.inf):
        raise ValueError("budget too small to fully label any document")
    rng = random.Random(f"fully_labeled:{config.seed}")
    order = list(pool)
    rng.shuffle(order)
    chosen = []
    spent = 0.0
    for doc in order:
        if spent + costs[doc.doc_id] <= budget_seconds:
            chosen.append(doc)
            spent += costs[doc.doc_id]
    labeled = _gold_labeled(corpus, list(seed_docs) + chosen, config)
    scorers = make_scorers(config, corpus)
    _fit_all(scorers, labeled, config)
    scores = evaluate_dev(scorers, dev, corpus, config)
    n_spans = sum(len(corpus.gold[d.doc_id].mentions) for d in chosen)
    return RoundReport(round_index=0, p=0,
                       d_c=0 if not only_discrete_cost else n_spans,
                       d_nc=n_spans if not only_discrete_cost else 0,
                       budget_seconds=spent, delta_f1=0.0, **scores)


def pairwise_baseline(config: LoopConfig, corpus: Corpus, annotator=None) -> list[RoundReport]:
    cfg = LoopConfig(**{**config.__dict__, "protocol": Protocol.PAIRWISE})
    return run_active_learning(cfg, corpus, annotator)


def partially_labeled_baseline(config: LoopConfig, corpus: Corpus,
                               annotator=None) -> list[RoundReport]:
    cfg = LoopConfig(**{**config.__dict__, "strategy": Strategy.RANDOM})
    return run_active_learning(cfg, corpus, annotator)


# ---------------------------------------------------------------------------
# Curve output


CURVE_COLUMNS = ["run_id", "strategy", "protocol", "round", "budget_seconds",
                 "muc_f1", "b3_f1", "ceafe_f1", "avg_f1", "mention_f1", "delta_f1"]


def write_curve_csv(path: str, runs: Sequence[tuple[str, LoopConfig, Sequence[RoundReport]]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CURVE_COLUMNS)
        for run_id, config, reports in runs:
            for r in reports:
                writer.writerow([run_id, config.strategy.value, config.protocol.value,
                                 r.round_index, f"{r.budget_seconds:.2f}",
                                 f"{r.muc_f1:.6f}", f"{r.b3_f1:.6f}", f"{r.ceafe_f1:.6f}",
                                 f"{r.avg_f1:.6f}", f"{r.mention_f1:.6f}",
                                 f"{r.delta_f1:.6f}"])


def f1_at_budget(reports: Sequence[RoundReport], budget: float) -> float:
    """Step-wise learning-curve lookup: dev F1 of the last report whose spent
    budget does not exceed the checkpoint."""
    value = reports[0].avg_f1
    for r in reports:
        if r.budget_seconds <= budget + 1e-9:
            value = r.avg_f1
    return value
