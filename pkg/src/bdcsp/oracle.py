"""Bounded-degree query access to an instance, with query accounting."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import IndexOutOfRange
from .hypergraph import StructureReport, structure_of_edges
from .instances import Instance


class Answer(NamedTuple):
    """A returned constraint.

    ``edge_id`` is a stable label for the constraint, ``vertices`` its
    ordered tuple, ``literal`` the encoded literal vector (or syndrome), and
    ``position`` the slot of the queried variable inside the tuple.
    """

    edge_id: int
    vertices: tuple[int, ...]
    literal: int
    position: int

    def to_json(self) -> dict:
        return {"id": self.edge_id, "vertices": list(self.vertices),
                "literal": format(self.literal, "x"), "position": self.position}


@dataclass(frozen=True)
class QueryRecord:
    v: int
    i: int
    answer: Answer | None


class QueryLog:
    """History bookkeeping shared by the oracle and the lazy processes."""

    k: int
    declared_d: int
    n: int

    def _init_log(self):
        self.history: list[QueryRecord] = []
        self._revealed: dict[int, Answer] = {}

    @property
    def query_count(self) -> int:
        return len(self.history)

    def _check(self, v: int, i: int):
        if not 0 <= v < self.n:
            raise IndexOutOfRange(f"variable {v} outside [0, {self.n})")
        if not 1 <= i <= self.declared_d:
            raise IndexOutOfRange(f"index {i} outside [1, {self.declared_d}]")

    def _record(self, v: int, i: int, ans: Answer | None) -> Answer | None:
        self.history.append(QueryRecord(v, i, ans))
        if ans is not None:
            self._revealed.setdefault(ans.edge_id, ans)
        return ans

    def revealed(self) -> list[Answer]:
        """Distinct answered constraints in order of first appearance."""
        return list(self._revealed.values())

    def history_edges(self) -> np.ndarray:
        rows = [a.vertices for a in self._revealed.values()]
        return np.array(rows, dtype=np.int64).reshape(-1, self.k)

    def history_stats(self) -> StructureReport:
        """Structure of the sub-hypergraph formed by answered constraints."""
        return structure_of_edges(self.history_edges(), self.k)

    def trace(self) -> list[dict]:
        return [{"v": r.v, "i": r.i, "answer": None if r.answer is None else r.answer.to_json()}
                for r in self.history]

    def trace_json(self) -> str:
        return json.dumps(self.trace())


class OracleSession(QueryLog):
    """Answers ``(v, i)`` with the ``i``-th constraint incident to ``v`` (1-indexed).

    The incidence order is the hypergraph's canonical order; passing
    ``shuffle_seed`` permutes every list independently instead.
    """

    def __init__(self, instance: Instance, shuffle_seed: int | None = None):
        self._inst = instance
        self.n = instance.n
        self.k = instance.k
        self.declared_d = instance.declared_d
        self._flat, self._start = instance.hypergraph.incidence_csr()
        if shuffle_seed is not None:
            rng = np.random.default_rng(shuffle_seed)
            flat = self._flat.copy()
            for v in range(self.n):
                a, b = self._start[v], self._start[v + 1]
                flat[a:b] = rng.permutation(flat[a:b])
            self._flat = flat
        self._init_log()

    def degree(self, v: int) -> int:
        return int(self._start[v + 1] - self._start[v])

    def query(self, v: int, i: int) -> Answer | None:
        self._check(v, i)
        if i > self.degree(v):
            return self._record(v, i, None)
        f = int(self._flat[self._start[v] + i - 1])
        e, pos = divmod(f, self.k)
        ans = Answer(e, tuple(self._inst.hypergraph.edges[e].tolist()), int(self._inst.literals[e]), pos)
        return self._record(v, i, ans)
