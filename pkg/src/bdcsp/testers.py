"""One-sided tester for k-EQU through a reduction to bipartiteness.

A k-EQU instance is expanded into pairwise equalities, which are turned into
a graph on literal vertices: vertex ``2u + s`` stands for the literal
``x_u + s``.  Each variable contributes the edge ``(x_u, not x_u)`` and each
pairwise constraint ``l1 = l2`` the two edges ``(l1, not l2)`` and
``(not l1, l2)``.  The instance is satisfiable iff the graph is bipartite.

Bipartiteness is tested with lazy random walks that look for a vertex
reached from a common start with both parities.  Such a collision yields an
odd closed walk and hence an odd cycle, which translates back into an
unsatisfiable set of source constraints, so rejections always carry a
checkable witness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .errors import BudgetExceeded, WrongPredicate
from .hypergraph import Hypergraph
from .instances import Instance
from .oracle import OracleSession
from .parity import ParityUnionFind
from .predicates import equ


def _require_equ(inst: Instance, k: int | None = None):
    P = inst.predicate
    if not P.is_equ() or (k is not None and P.k != k) or inst.generator is not None:
        raise WrongPredicate(f"expected {k or 'k'}-EQU, got {P.name}")


# --- reductions ---------------------------------------------------------------------


def phi(inst: Instance) -> Instance:
    """Expand every k-EQU constraint into its ``k(k-1)/2`` pairwise equalities.

    The result declares degree ``d(k-1)``, the largest degree the expansion
    can produce.  Constraint ``j`` of the output comes from constraint
    ``phi_sources(inst)[j]`` of the input.
    """
    _require_equ(inst)
    k = inst.k
    rows, lits = [], []
    for e in range(inst.m):
        verts, b = inst.constraint(e)
        for i in range(k):
            for j in range(i + 1, k):
                rows.append((verts[i], verts[j]))
                lits.append(((b >> i) & 1) | (((b >> j) & 1) << 1))
    H = Hypergraph(inst.n, 2, np.array(rows, dtype=np.int64).reshape(-1, 2))
    return Instance(equ(2), H, np.array(lits, dtype=np.int64), inst.declared_d * (k - 1), planted=inst.planted)


def phi_sources(inst: Instance) -> np.ndarray:
    k = inst.k
    return np.repeat(np.arange(inst.m), k * (k - 1) // 2)


def literal_vertex(u: int, s: int) -> int:
    return 2 * u + s


@dataclass(frozen=True)
class EdgeLabel:
    """Provenance of a graph edge: a variable edge, or a constraint edge from a source constraint."""

    kind: str
    variable: int = -1
    source: int = -1
    pair: tuple[int, int] = (-1, -1)


@dataclass(frozen=True, eq=False)
class ReducedGraph:
    """Literal graph of a 2-EQU instance with per-edge provenance.

    ``adj[v]`` lists ``(neighbour, label)`` in a fixed order: the variable
    edge first, then constraint edges in incidence order.
    """

    n_vars: int
    adj: tuple
    degree_bound: int

    @property
    def n(self) -> int:
        return 2 * self.n_vars

    def edges(self) -> list[tuple[int, int, EdgeLabel]]:
        out = []
        for v, row in enumerate(self.adj):
            for u, lab in row:
                if v < u or (v == u and lab.kind == "constraint"):
                    out.append((v, u, lab))
        return out

    def variable_edges(self) -> list:
        return [e for e in self.edges() if e[2].kind == "variable"]

    def constraint_edges(self) -> list:
        return [e for e in self.edges() if e[2].kind == "constraint"]

    def neighbor(self, v: int, j: int):
        row = self.adj[v]
        return row[j] if j < len(row) else None

    def is_bipartite(self) -> bool:
        return find_odd_cycle(self) is None


def phi_g(inst: Instance) -> ReducedGraph:
    """Literal graph of a 2-EQU instance (see module docstring)."""
    _require_equ(inst, 2)
    return _literal_graph(inst, sources=np.arange(inst.m))


def phi_g_of_kequ(inst: Instance) -> ReducedGraph:
    """Literal graph of the pairwise expansion of a k-EQU instance, with k-ary provenance.

    Adjacency follows the same order as the lazy oracle-backed graph.
    """
    _require_equ(inst)
    return _literal_graph(inst, sources=None)


def _literal_graph(inst: Instance, sources) -> ReducedGraph:
    k = inst.k
    flat, start = inst.hypergraph.incidence_csr()
    adj = []
    for u in range(inst.n):
        for s in (0, 1):
            row = [(literal_vertex(u, 1 - s), EdgeLabel("variable", variable=u))]
            for f in flat[start[u]:start[u + 1]].tolist():
                e, p = divmod(int(f), k)
                verts, b = inst.constraint(e)
                for q in range(k):
                    if q == p:
                        continue
                    w = verts[q]
                    t = s ^ ((b >> p) & 1) ^ ((b >> q) & 1) ^ 1
                    src = int(sources[e]) if sources is not None else e
                    row.append((literal_vertex(w, t), EdgeLabel("constraint", source=src, pair=(min(p, q), max(p, q)))))
            adj.append(tuple(row))
    return ReducedGraph(inst.n, tuple(adj), 1 + inst.declared_d * (k - 1))


class GraphOracle(Protocol):
    n: int
    degree_bound: int

    def neighbor(self, v: int, j: int): ...


class LazyKequGraph:
    """Literal graph of a k-EQU instance materialised on demand from a CSP oracle.

    Neighbour ``0`` of a literal vertex is its variable edge and costs no
    query.  Neighbour ``j >= 1`` comes from slot ``(j-1) // (k-1) + 1`` of
    the variable and costs exactly one CSP query.
    """

    def __init__(self, oracle: OracleSession):
        self.oracle = oracle
        self.k = oracle.k
        self.n = 2 * oracle.n
        self.degree_bound = 1 + oracle.declared_d * (self.k - 1)

    def neighbor(self, v: int, j: int):
        u, s = divmod(v, 2)
        if j == 0:
            return literal_vertex(u, 1 - s), EdgeLabel("variable", variable=u)
        slot, r = divmod(j - 1, self.k - 1)
        ans = self.oracle.query(u, slot + 1)
        if ans is None:
            return None
        p = ans.position
        q = r if r < p else r + 1
        b = ans.literal
        w = ans.vertices[q]
        t = s ^ ((b >> p) & 1) ^ ((b >> q) & 1) ^ 1
        return literal_vertex(w, t), EdgeLabel("constraint", source=ans.edge_id, pair=(min(p, q), max(p, q)))


class ListGraph:
    """Adjacency-list graph with a degree bound; edge labels are insertion indices."""

    def __init__(self, n: int, edges: Sequence[tuple[int, int]], degree_bound: int | None = None):
        self.n = n
        adj: list[list] = [[] for _ in range(n)]
        for i, (a, b) in enumerate(edges):
            adj[a].append((b, i))
            if a != b:
                adj[b].append((a, i))
        self.adj = adj
        self.degree_bound = degree_bound or max((len(r) for r in adj), default=0)
        self.queries = 0

    def neighbor(self, v: int, j: int):
        self.queries += 1
        row = self.adj[v]
        return row[j] if j < len(row) else None


def cycle_graph(n: int) -> ListGraph:
    return ListGraph(n, [(i, (i + 1) % n) for i in range(n)])


def disjoint_triangles(t: int) -> ListGraph:
    return ListGraph(3 * t, [(3 * i + a, 3 * i + (a + 1) % 3) for i in range(t) for a in range(3)])


# --- odd cycles -------------------------------------------------------------------------


def odd_cycle_from_closed_walk(vertices: Sequence[int], labels: Sequence) -> tuple[list[int], list]:
    """Extract a simple odd cycle from an odd closed walk.

    ``vertices[0] == vertices[-1]`` and ``labels[i]`` names the edge from
    ``vertices[i]`` to ``vertices[i+1]``.  Returns the cycle's vertices
    (first repeated at the end) and its edge labels.
    """
    if (len(vertices) - 1) % 2 == 0 or vertices[0] != vertices[-1]:
        raise ValueError("not an odd closed walk")
    vs, ls = list(vertices), list(labels)
    while True:
        first: dict[int, int] = {}
        found = None
        for i, v in enumerate(vs[:-1]):
            if v in first:
                found = (first[v], i)
                break
            first[v] = i
        if found is None:
            return vs, ls
        a, b = found
        inner_v, inner_l = vs[a:b + 1], ls[a:b]
        if (b - a) % 2 == 1:
            vs, ls = inner_v, inner_l
        else:
            vs, ls = vs[:a] + vs[b:], ls[:a] + ls[b:]


def is_odd_cycle_in(graph, cycle: Sequence[int], labels: Sequence) -> bool:
    """Check that consecutive vertices are joined by the labelled edges and the length is odd."""
    if len(cycle) < 2 or cycle[0] != cycle[-1] or (len(cycle) - 1) % 2 == 0:
        return False
    for a, b, lab in zip(cycle, cycle[1:], labels):
        ok = False
        for j in range(graph.degree_bound):
            nb = graph.neighbor(a, j)
            if nb is not None and nb[0] == b and nb[1] == lab:
                ok = True
                break
        if not ok:
            return False
    return True


def find_odd_cycle(graph) -> tuple[list[int], list] | None:
    """Exhaustive BFS 2-colouring; an odd cycle if one exists."""
    colour = [-1] * graph.n
    parent: list = [None] * graph.n
    for s in range(graph.n):
        if colour[s] != -1:
            continue
        colour[s] = 0
        queue = [s]
        for v in queue:
            for j in range(graph.degree_bound):
                nb = graph.neighbor(v, j)
                if nb is None:
                    continue
                u, lab = nb
                if colour[u] == -1:
                    colour[u] = 1 - colour[v]
                    parent[u] = (v, lab)
                    queue.append(u)
                elif colour[u] == colour[v]:
                    pv, lv = _path_to_root(parent, v)
                    pu, lu = _path_to_root(parent, u)
                    walk = pv[::-1] + [u] + pu[1:]
                    labs = lv[::-1] + [lab] + lu
                    return odd_cycle_from_closed_walk(walk, labs)
    return None


def _path_to_root(parent, v):
    """Vertices from ``v`` to its BFS root and the labels along the way."""
    vs, ls = [v], []
    while parent[v] is not None:
        v, lab = parent[v]
        ls.append(lab)
        vs.append(v)
    return vs, ls


# --- random-walk tester ---------------------------------------------------------------------


@dataclass(frozen=True)
class TesterConfig:
    """Walk schedule: ``rounds`` starts, ``walks`` walks per start, ``length`` steps per walk.

    ``walks = walks_scale * sqrt(N) * log(N)**walks_log_power / eps**eps_power``,
    ``length = length_scale * log(N)**length_log_power``,
    ``rounds = rounds_scale / eps**eps_power`` (all rounded up), where ``N``
    is the number of graph vertices.
    """

    walks_scale: float = 1.0
    walks_log_power: float = 0.0
    length_scale: float = 1.0
    length_log_power: float = 1.0
    rounds_scale: float = 4.0
    eps_power: float = 0.0

    def schedule(self, N: int, eps: float) -> tuple[int, int, int]:
        logn = math.log(max(N, 3))
        eps_f = eps ** self.eps_power
        walks = math.ceil(self.walks_scale * math.sqrt(N) * logn ** self.walks_log_power / eps_f)
        length = math.ceil(self.length_scale * logn ** self.length_log_power)
        rounds = math.ceil(self.rounds_scale / eps_f)
        return rounds, walks, length


@dataclass
class Verdict:
    accept: bool
    queries: int
    budget: int
    cycle: list = field(default_factory=list)
    cycle_labels: list = field(default_factory=list)
    witness: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"accept": self.accept, "queries": self.queries, "budget": self.budget,
                "cycle": self.cycle, "witness": [{"vertices": list(v), "literal": b} for v, b in self.witness]}


def _walk(graph, start: int, length: int, rng: np.random.Generator):
    """Lazy walk: stay with probability 1/2, else try a uniform neighbour slot (missing slots stay)."""
    vs, ls, par = [start], [], [0]
    v, p = start, 0
    coins = rng.random(length)
    slots = rng.integers(0, graph.degree_bound, size=length)
    for c, j in zip(coins.tolist(), slots.tolist()):
        if c < 0.5:
            continue
        nb = graph.neighbor(v, j)
        if nb is None:
            continue
        v, lab = nb
        p ^= 1
        vs.append(v)
        ls.append(lab)
        par.append(p)
    return vs, ls, par


def test_bipartite(graph, eps: float, seed, config: TesterConfig = TesterConfig()) -> Verdict:
    """One-sided random-walk bipartiteness tester.

    Each round walks repeatedly from one random start and remembers, for
    every vertex seen, the parity and walk prefix that reached it.  Reaching
    a vertex with the other parity closes an odd walk; its odd cycle is
    returned as evidence.  Without a collision the graph is accepted.
    """
    rng = np.random.default_rng(seed)
    rounds, walks, length = config.schedule(graph.n, eps)
    budget = rounds * walks * length
    steps = 0
    for _ in range(rounds):
        s = int(rng.integers(graph.n))
        seen: dict[int, tuple[int, list, list]] = {s: (0, [s], [])}
        for _ in range(walks):
            vs, ls, par = _walk(graph, s, length, rng)
            steps += length
            for i in range(1, len(vs)):
                v = vs[i]
                prev = seen.get(v)
                if prev is None:
                    seen[v] = (par[i], vs[:i + 1], ls[:i])
                elif prev[0] != par[i]:
                    closed_v = prev[1] + vs[:i][::-1]
                    closed_l = prev[2] + ls[:i][::-1]
                    cyc, labs = odd_cycle_from_closed_walk(closed_v, closed_l)
                    return Verdict(False, steps, budget, cyc, labs)
    return Verdict(True, steps, budget)


# --- k-EQU tester ---------------------------------------------------------------------------


def kequ_eps(eps: float, k: int, d: int) -> float:
    """Distance parameter handed to the graph tester.

    Pairwise expansion turns ``eps`` into ``2 eps / k`` at degree
    ``d(k-1)``; the literal graph divides by four times that degree.
    """
    return (2 * eps / k) / (4 * d * (k - 1))


def witness_constraints(oracle: OracleSession, labels: Sequence) -> list[tuple[tuple[int, ...], int]]:
    """Source constraints behind the constraint edges of an odd cycle, as revealed by the oracle."""
    revealed = {a.edge_id: a for a in oracle.revealed()}
    ids = sorted({lab.source for lab in labels if lab.kind == "constraint"})
    return [(revealed[e].vertices, revealed[e].literal) for e in ids]


def equ_constraints_satisfiable(constraints: Sequence[tuple[Sequence[int], int]]) -> bool:
    """Exact satisfiability of k-EQU constraints given as ``(vertices, literal)``.

    Each constraint forces ``x_{v_0} + x_{v_i} = b_0 + b_i``; the system is
    solved with a parity union-find.
    """
    uf = ParityUnionFind()
    for verts, b in constraints:
        for i in range(1, len(verts)):
            if not uf.union(int(verts[0]), int(verts[i]), ((b >> 0) & 1) ^ ((b >> i) & 1)):
                return False
    return True


def test_kequ(inst: Instance, eps: float, seed, config: TesterConfig = TesterConfig(),
              shuffle_seed: int | None = None) -> Verdict:
    """Test a k-EQU instance through its lazily materialised literal graph.

    The CSP query count never exceeds the walk budget (one query per walk
    step at most).  On rejection the witness lists the source constraints
    whose conjunction is unsatisfiable.
    """
    _require_equ(inst)
    oracle = OracleSession(inst, shuffle_seed)
    graph = LazyKequGraph(oracle)
    v = test_bipartite(graph, kequ_eps(eps, inst.k, inst.declared_d), seed, config)
    v.queries = oracle.query_count
    if v.queries > v.budget:
        raise BudgetExceeded(f"{v.queries} CSP queries exceed the budget {v.budget}")
    if not v.accept:
        v.witness = witness_constraints(oracle, v.cycle_labels)
        if equ_constraints_satisfiable(v.witness):
            raise AssertionError("reject witness is satisfiable")
    return v


# keep pytest from collecting the tester entry points when they are imported into test modules
TesterConfig.__test__ = False
test_bipartite.__test__ = False
test_kequ.__test__ = False
