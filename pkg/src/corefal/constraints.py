"""Must-link / cannot-link store closed under transitivity.

Two implementations with identical observable behavior:

* ``LinkStore`` keeps the must-link closure as a union-find partition and
  cannot-link as edges between class representatives; per-member pairs are
  never materialized, which is where the incremental speedup comes from.
* ``ReferenceStore`` materializes the closed pair sets explicitly and grows
  them by direct rule application per insertion. It is the correctness oracle
  for ``LinkStore``.

``closure_from_scratch`` recomputes the full fixed point from a raw insertion
history by repeated rule application; it is the recompute baseline the closure
benchmark compares against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Hashable, Iterable, Optional

from .corpus import Span


class Relation(Enum):
    ML = "ml"
    CL = "cl"
    UNKNOWN = "unknown"


class LinkConflict(ValueError):
    """A requested link contradicts the derivable closure; the store is unchanged."""

    def __init__(self, op: str, a, b):
        super().__init__(f"{op}({a}, {b}) contradicts existing links")
        self.op = op
        self.a = a
        self.b = b


@dataclass
class MergeSummary:
    representative: Hashable
    merged: tuple[Hashable, Hashable]  # old representatives
    inherited_cl: frozenset[Hashable]  # CL neighbors unioned onto the merged class


class LinkStore:
    """Incrementally closed ML/CL store (union-find + representative CL edges)."""

    def __init__(self):
        self._parent: dict[Hashable, Hashable] = {}
        self._rank: dict[Hashable, int] = {}
        self._cl: dict[Hashable, set[Hashable]] = {}  # rep -> CL-neighbor reps
        self.queried: set[Span] = set()
        self.discourse_new: set[Span] = set()

    # -- union-find ----------------------------------------------------------
    def _find(self, x) -> Hashable:
        if x not in self._parent:
            self._parent[x] = x
            self._rank[x] = 0
            return x
        root = x
        while self._parent[root] != root:
            root = self._parent[root]
        while self._parent[x] != root:
            self._parent[x], x = root, self._parent[x]
        return root

    # -- mutations -----------------------------------------------------------
    def add_must_link(self, a, b) -> Optional[MergeSummary]:
        if a == b:
            raise ValueError("must-link requires two distinct spans")
        ra, rb = self._find(a), self._find(b)
        if ra == rb:
            return None  # already derivable
        if rb in self._cl.get(ra, ()):
            raise LinkConflict("must_link", a, b)
        if self._rank[ra] < self._rank[rb]:
            ra, rb = rb, ra
        self._parent[rb] = ra
        if self._rank[ra] == self._rank[rb]:
            self._rank[ra] += 1
        # The merged class inherits the CL neighbors of both old classes.
        inherited = self._cl.pop(rb, set())
        for nb in inherited:
            self._cl[nb].discard(rb)
            self._cl[nb].add(ra)
            self._cl.setdefault(ra, set()).add(nb)
        return MergeSummary(representative=ra, merged=(ra, rb), inherited_cl=frozenset(inherited))

    def add_cannot_link(self, a, b) -> None:
        if a == b:
            raise ValueError("cannot-link requires two distinct spans")
        ra, rb = self._find(a), self._find(b)
        if ra == rb:
            raise LinkConflict("cannot_link", a, b)
        self._cl.setdefault(ra, set()).add(rb)
        self._cl.setdefault(rb, set()).add(ra)

    # -- queries -------------------------------------------------------------
    def query_relation(self, a, b) -> Relation:
        ra, rb = self._find(a), self._find(b)
        if ra == rb and a != b:
            return Relation.ML
        if rb in self._cl.get(ra, ()):
            return Relation.CL
        return Relation.UNKNOWN

    def ml_partner_in(self, a, candidates: Iterable) -> Optional[Hashable]:
        """Earliest candidate must-linked to `a`, or None."""
        ra = self._find(a)
        for y in candidates:
            if y != a and y in self._parent and self._find(y) == ra:
                return y
        return None

    def members(self, a) -> set:
        """All spans known to be must-linked with `a` (including `a` itself)."""
        ra = self._find(a)
        return {x for x in self._parent if self._find(x) == ra} | {a}

    def classes(self) -> list[set]:
        """Must-link classes with more than one member."""
        groups: dict[Hashable, set] = {}
        for x in list(self._parent):
            groups.setdefault(self._find(x), set()).add(x)
        return [g for g in groups.values() if len(g) > 1]

    def cl_edges(self) -> list[tuple[Hashable, Hashable]]:
        """Cannot-link edges between class representatives."""
        out = []
        for rep, neighbors in self._cl.items():
            for nb in neighbors:
                if rep < nb:
                    out.append((rep, nb))
        return out


class ReferenceStore:
    """Oracle twin of ``LinkStore``: closed ML/CL pair sets kept explicitly and
    extended by direct application of the transitivity rules per insertion."""

    def __init__(self):
        self.history: list[tuple[str, Hashable, Hashable]] = []
        self.ml_pairs: set[frozenset] = set()
        self.cl_pairs: set[frozenset] = set()
        self._ml_adj: dict[Hashable, set[Hashable]] = {}
        self._cl_adj: dict[Hashable, set[Hashable]] = {}
        self.queried: set[Span] = set()
        self.discourse_new: set[Span] = set()

    def members(self, a) -> set:
        return {a} | self._ml_adj.get(a, set())

    def add_must_link(self, a, b) -> None:
        if a == b:
            raise ValueError("must-link requires two distinct spans")
        if frozenset((a, b)) in self.cl_pairs:
            raise LinkConflict("must_link", a, b)
        if frozenset((a, b)) in self.ml_pairs:
            self.history.append(("ml", a, b))
            return
        cls_a, cls_b = self.members(a), self.members(b)
        new_ml = {frozenset((x, y)) for x in cls_a for y in cls_b} - self.ml_pairs
        if any(p in self.cl_pairs for p in new_ml):
            raise LinkConflict("must_link", a, b)
        merged = cls_a | cls_b
        cl_targets = {x for u in merged for x in self._cl_adj.get(u, ())}
        new_cl = {frozenset((v, x)) for v in merged for x in cl_targets} - self.cl_pairs
        self.history.append(("ml", a, b))
        self.ml_pairs |= new_ml
        for x in merged:
            self._ml_adj[x] = merged - {x}
        for pair in new_cl:
            self.cl_pairs.add(pair)
            u, v = tuple(pair)
            self._cl_adj.setdefault(u, set()).add(v)
            self._cl_adj.setdefault(v, set()).add(u)

    def add_cannot_link(self, a, b) -> None:
        if a == b:
            raise ValueError("cannot-link requires two distinct spans")
        if frozenset((a, b)) in self.ml_pairs:
            raise LinkConflict("cannot_link", a, b)
        cls_a, cls_b = self.members(a), self.members(b)
        self.history.append(("cl", a, b))
        for x in cls_a:
            for y in cls_b:
                self.cl_pairs.add(frozenset((x, y)))
                self._cl_adj.setdefault(x, set()).add(y)
                self._cl_adj.setdefault(y, set()).add(x)

    def query_relation(self, a, b) -> Relation:
        pair = frozenset((a, b))
        if pair in self.ml_pairs:
            return Relation.ML
        if pair in self.cl_pairs:
            return Relation.CL
        return Relation.UNKNOWN

    def ml_partner_in(self, a, candidates: Iterable) -> Optional[Hashable]:
        partners = self._ml_adj.get(a, ())
        for y in candidates:
            if y in partners:
                return y
        return None

    def classes(self) -> list[set]:
        seen: set = set()
        out = []
        for x, partners in self._ml_adj.items():
            if x in seen or not partners:
                continue
            group = {x} | partners
            seen |= group
            out.append(group)
        return out

    def cl_edges(self) -> list[tuple[Hashable, Hashable]]:
        return [tuple(sorted(pair)) for pair in self.cl_pairs]


def closure_from_scratch(history: Iterable[tuple[str, Hashable, Hashable]]
                         ) -> tuple[set[frozenset], set[frozenset]]:
    """Fixed point of the transitivity rules over materialized pair sets,
    recomputed from the raw insertion history by repeated rule application.
    Returns (ml_pairs, cl_pairs); a contradiction shows up as a nonempty
    intersection of the two."""
    ml: set[frozenset] = {frozenset((a, b)) for op, a, b in history if op == "ml"}
    cl: set[frozenset] = {frozenset((a, b)) for op, a, b in history if op == "cl"}
    changed = True
    while changed:
        changed = False
        ml_adj: dict[Hashable, set[Hashable]] = {}
        for pair in ml:
            i, j = tuple(pair)
            ml_adj.setdefault(i, set()).add(j)
            ml_adj.setdefault(j, set()).add(i)
        new_ml = set()
        for partners in ml_adj.values():
            for i in partners:
                for k in partners:
                    if i != k:
                        pair = frozenset((i, k))
                        if pair not in ml:
                            new_ml.add(pair)
        if new_ml:
            ml |= new_ml
            changed = True
        new_cl = set()
        for pair in cl:
            i, j = tuple(pair)
            for k in ml_adj.get(i, ()):
                if k != j:
                    p = frozenset((j, k))
                    if p not in cl:
                        new_cl.add(p)
            for k in ml_adj.get(j, ()):
                if k != i:
                    p = frozenset((i, k))
                    if p not in cl:
                        new_cl.add(p)
        if new_cl:
            cl |= new_cl
            changed = True
    return ml, cl


@dataclass
class ReplayResult:
    store: object
    conflicts: list[int] = field(default_factory=list)  # indices of rejected insertions


def replay(history: Iterable[tuple[str, Hashable, Hashable]], store=None) -> ReplayResult:
    """Apply an insertion history; conflicting insertions are skipped and their
    indices recorded, leaving the store unchanged by them."""
    if store is None:
        store = LinkStore()
    result = ReplayResult(store=store)
    for idx, (op, a, b) in enumerate(history):
        try:
            if op == "ml":
                store.add_must_link(a, b)
            elif op == "cl":
                store.add_cannot_link(a, b)
            else:
                raise ValueError(f"unknown op {op!r}")
        except LinkConflict:
            result.conflicts.append(idx)
    return result


def reference_closure(history: Iterable[tuple[str, Hashable, Hashable]]) -> ReplayResult:
    """Close an insertion history in a ``ReferenceStore``; the first conflicting
    insertion index, if any, is the first entry of ``conflicts``."""
    return replay(history, store=ReferenceStore())


# ---------------------------------------------------------------------------
# History serialization (JSONL, for replay and benchmarking)


def dump_history(history: Iterable[tuple[str, Span, Span]], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for op, a, b in history:
            fh.write(json.dumps({"op": op, "a": list(a), "b": list(b)}) + "\n")


def load_history(path: str) -> list[tuple[str, Span, Span]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            out.append((rec["op"], tuple(rec["a"]), tuple(rec["b"])))
    return out
