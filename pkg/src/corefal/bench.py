"""Closure runtime benchmark: incremental maintenance versus recomputing the
full fixed point from the raw insertion history."""

from __future__ import annotations

import csv
import random
import statistics
import time
from dataclasses import dataclass

from .constraints import LinkStore, closure_from_scratch


def make_benchmark_history(n_insertions: int, seed: int = 0,
                           cluster_size: int = 40) -> list[tuple[str, int, int]]:
    """Simulated annotation of a single document: each span is linked to a
    random earlier span, must-link when they share an entity, cannot-link
    otherwise. Entity assignment is round-robin so classes grow steadily."""
    rng = random.Random(f"bench:{seed}")
    n_spans = max(2, n_insertions)
    entity = {s: s % max(2, n_spans // cluster_size) for s in range(n_spans)}
    history: list[tuple[str, int, int]] = []
    spans = list(range(n_spans))
    for i, s in enumerate(spans[1:], start=1):
        if len(history) >= n_insertions:
            break
        same = [t for t in spans[max(0, i - 200):i] if entity[t] == entity[s]]
        if same and rng.random() < 0.8:
            history.append(("ml", rng.choice(same), s))
        else:
            other = rng.choice(spans[:i])
            op = "ml" if entity[other] == entity[s] else "cl"
            history.append((op, other, s))
    while len(history) < n_insertions:
        a, b = rng.sample(spans, 2)
        history.append(("ml" if entity[a] == entity[b] else "cl", min(a, b), max(a, b)))
    return history[:n_insertions]


@dataclass
class BenchRow:
    insertion: int  # 1-based count of insertions applied so far
    incremental_seconds: float  # windowed median per-insertion incremental time
    recompute_seconds: float  # one full from-scratch closure at this point

    @property
    def ratio(self) -> float:
        return self.recompute_seconds / max(self.incremental_seconds, 1e-12)


def run_closure_bench(n_insertions: int, seed: int = 0, n_checkpoints: int = 16,
                      window: int = 25) -> list[BenchRow]:
    """Time every incremental insertion; recompute the closure from scratch only
    at checkpoints (it is the expensive side). The incremental figure per
    checkpoint is the median over the trailing window, to absorb timer noise."""
    if n_insertions < 1:
        raise ValueError("need at least one insertion")
    history = make_benchmark_history(n_insertions, seed=seed)
    checkpoints = sorted({max(1, round(n_insertions * (i + 1) / n_checkpoints))
                          for i in range(n_checkpoints)})
    store = LinkStore()
    incremental: list[float] = []
    rows: list[BenchRow] = []
    for idx, (op, a, b) in enumerate(history, start=1):
        t0 = time.perf_counter()
        if op == "ml":
            store.add_must_link(a, b)
        else:
            store.add_cannot_link(a, b)
        incremental.append(time.perf_counter() - t0)
        if idx in checkpoints:
            t0 = time.perf_counter()
            closure_from_scratch(history[:idx])
            recompute = time.perf_counter() - t0
            inc = statistics.median(incremental[-window:])
            rows.append(BenchRow(insertion=idx, incremental_seconds=inc,
                                 recompute_seconds=recompute))
    return rows


def write_bench_csv(rows: list[BenchRow], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["insertion", "incremental_seconds", "recompute_seconds", "ratio"])
        for row in rows:
            writer.writerow([row.insertion, f"{row.incremental_seconds:.9f}",
                             f"{row.recompute_seconds:.9f}", f"{row.ratio:.3f}"])
