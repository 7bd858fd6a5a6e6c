"""k-uniform multi-hypergraphs, the configuration-model sampler and
structural measures (components, cyclomatic number, girth, expansion)."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import gf2
from .errors import BudgetExceeded, IndivisibleStubs

INF = float("inf")


@dataclass(frozen=True, eq=False)
class Hypergraph:
    """Vertices ``0..n-1``; ``edges[e]`` is the ordered k-tuple of edge ``e``.

    ``ports[e, j]`` (optional) is the stub slot at vertex ``edges[e, j]``
    used by this incidence; when present it fixes the oracle order of the
    vertex's incidence list.
    """

    n: int
    k: int
    edges: np.ndarray
    ports: np.ndarray | None = None

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, self.k)
        e.flags.writeable = False
        object.__setattr__(self, "edges", e)
        if e.size and (e.min() < 0 or e.max() >= self.n):
            raise ValueError("vertex id out of range")
        if self.ports is not None:
            p = np.asarray(self.ports, dtype=np.int64).reshape(e.shape)
            p.flags.writeable = False
            object.__setattr__(self, "ports", p)

    @property
    def m(self) -> int:
        return int(self.edges.shape[0])

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n)

    def max_degree(self) -> int:
        return int(self.degrees().max()) if self.n else 0

    def incidence_csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Incidences grouped by vertex in canonical oracle order.

        Returns ``(flat, start)``: the incidences of ``v`` are
        ``flat[start[v]:start[v+1]]``, each encoded as ``edge * k + position``.
        Order is by port slot when ports exist, else by (edge, position).
        """
        flat_v = self.edges.ravel()
        key = self.ports.ravel() if self.ports is not None else np.arange(flat_v.size)
        order = np.lexsort((key, flat_v))
        start = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(flat_v, minlength=self.n), out=start[1:])
        return order, start

    def incidences(self) -> list[list[tuple[int, int]]]:
        """Per-vertex ``(edge, position)`` lists in canonical oracle order."""
        flat, start = self.incidence_csr()
        return [[divmod(int(f), self.k) for f in flat[start[v]:start[v + 1]]] for v in range(self.n)]

    def degenerate_edges(self) -> np.ndarray:
        """Indices of edges that repeat a vertex."""
        s = np.sort(self.edges, axis=1)
        return np.flatnonzero((s[:, 1:] == s[:, :-1]).any(axis=1))

    def is_simple(self) -> bool:
        if len(self.degenerate_edges()):
            return False
        keys = {tuple(sorted(r)) for r in self.edges.tolist()}
        return len(keys) == self.m

    def subhypergraph(self, edge_ids: Iterable[int]) -> "Hypergraph":
        ids = np.asarray(list(edge_ids), dtype=np.int64)
        ports = None if self.ports is None else self.ports[ids]
        return Hypergraph(self.n, self.k, self.edges[ids], ports)

    def structure(self) -> "StructureReport":
        return structure(self)

    def to_json(self) -> dict:
        return {"n": self.n, "k": self.k, "edges": self.edges.tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "Hypergraph":
        return cls(d["n"], d["k"], np.asarray(d["edges"], dtype=np.int64).reshape(-1, d["k"]))


def disjoint_union(a: Hypergraph, b: Hypergraph) -> Hypergraph:
    if a.k != b.k:
        raise ValueError("arity mismatch")
    return Hypergraph(a.n + b.n, a.k, np.vstack([a.edges, b.edges + a.n]))


def sample_config_model(n: int, d: int, k: int, seed, simple: bool = False, max_tries: int = 10_000) -> Hypergraph:
    """Random ``d``-regular k-uniform multi-hypergraph from the stub-pairing model.

    ``d*n`` labeled stubs (stub ``v*d + j`` is slot ``j`` of vertex ``v``) are
    shuffled and cut into consecutive k-sets.  With ``simple=True`` the draw is
    repeated until no edge repeats a vertex and no two edges coincide.
    """
    if min(n, d, k) < 1:
        raise ValueError("n, d, k must be positive")
    if (d * n) % k:
        raise IndivisibleStubs(f"d*n = {d * n} is not divisible by k = {k}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    for _ in range(max_tries):
        perm = rng.permutation(n * d).reshape(-1, k)
        H = Hypergraph(n, k, perm // d, perm % d)
        if not simple or H.is_simple():
            return H
    raise RuntimeError(f"no simple hypergraph after {max_tries} draws")


# --- structure ---------------------------------------------------------------


@dataclass(frozen=True)
class StructureReport:
    n: int
    m: int
    components: int
    cyclomatic: int
    girth: float
    degenerate_edges: int

    @property
    def is_hyperforest(self) -> bool:
        return self.cyclomatic == 0

    def to_json(self) -> dict:
        g = None if self.girth == INF else int(self.girth)
        return {"n": self.n, "m": self.m, "components": self.components,
                "cyclomatic": self.cyclomatic, "girth": g, "degenerate_edges": self.degenerate_edges}


def _incidence_adjacency(n: int, edges: np.ndarray) -> list[list[tuple[int, int]]]:
    """Bipartite incidence multigraph; node ``n + e`` is edge ``e``.

    Each adjacency entry is ``(neighbor, link_id)`` so parallel links stay
    distinguishable.
    """
    m, k = edges.shape
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n + m)]
    link = 0
    for e in range(m):
        for v in edges[e].tolist():
            adj[v].append((n + e, link))
            adj[n + e].append((v, link))
            link += 1
    return adj


def _two_core(adj: list[list[tuple[int, int]]]) -> list[bool]:
    deg = [len(a) for a in adj]
    alive = [True] * len(adj)
    q = deque(i for i, dg in enumerate(deg) if dg <= 1)
    while q:
        u = q.popleft()
        if not alive[u]:
            continue
        alive[u] = False
        for w, _ in adj[u]:
            if alive[w]:
                deg[w] -= 1
                if deg[w] <= 1:
                    q.append(w)
    return alive


def incidence_girth(n: int, edges: np.ndarray) -> float:
    """Length of the shortest hypercycle (half the shortest incidence cycle)."""
    edges = np.asarray(edges, dtype=np.int64)
    if edges.size == 0:
        return INF
    adj = _incidence_adjacency(n, edges)
    alive = _two_core(adj)
    best = INF
    for root in range(len(adj)):
        if not alive[root]:
            continue
        dist = {root: 0}
        via = {root: -1}
        q = deque([root])
        while q:
            u = q.popleft()
            if 2 * dist[u] + 1 >= best:
                break
            for w, lk in adj[u]:
                if not alive[w] or lk == via[u]:
                    continue
                if w in dist:
                    best = min(best, dist[u] + dist[w] + 1)
                else:
                    dist[w] = dist[u] + 1
                    via[w] = lk
                    q.append(w)
    return INF if best == INF else best / 2


def count_components(n: int, edges: np.ndarray) -> int:
    edges = np.asarray(edges, dtype=np.int64)
    if edges.size == 0:
        return n
    m, k = edges.shape
    rows = edges[:, 0].repeat(k)
    cols = edges.ravel()
    g = coo_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
    return int(connected_components(g, directed=False)[0])


def structure(H: Hypergraph) -> StructureReport:
    c = count_components(H.n, H.edges)
    cy = (H.k - 1) * H.m - H.n + c
    return StructureReport(H.n, H.m, c, cy, incidence_girth(H.n, H.edges), len(H.degenerate_edges()))


def structure_of_edges(edges: np.ndarray, k: int) -> StructureReport:
    """Report for the hypergraph spanned by ``edges`` (only touched vertices count)."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, k)
    verts, relabeled = np.unique(edges, return_inverse=True)
    return structure(Hypergraph(len(verts), k, relabeled.reshape(-1, k)))


# --- expansion ---------------------------------------------------------------


@dataclass(frozen=True)
class ExpanderAudit:
    ok: bool
    witness: tuple[int, ...] | None
    witness_vertices: int | None
    max_size: int
    mode: str
    checked: int


def _edge_masks(H: Hypergraph) -> list[int]:
    return [sum(1 << v for v in set(r)) for r in H.edges.tolist()]


def audit_expander(H: Hypergraph, gamma: float, eta: float, mode: str = "exhaustive",
                   trials: int = 10_000, budget: int = 10_000_000, max_size: int | None = None,
                   seed=0) -> ExpanderAudit:
    """Check that every ``s <= gamma*n`` edges touch at least ``(k-1-eta)*s`` vertices.

    Exhaustive mode walks all edge subsets by increasing index and prunes a
    branch once its vertex count already clears the threshold of the
    largest audited size.  ``budget`` caps the number of visited subsets.
    Sampled mode draws ``trials`` uniform subsets of uniform size.
    """
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    if not 0 <= eta < H.k - 1:
        raise ValueError("eta must lie in [0, k-1)")
    s_max = int(np.floor(gamma * H.n + 1e-9)) if max_size is None else int(max_size)
    s_max = min(s_max, H.m)
    slope = H.k - 1 - eta
    masks = _edge_masks(H)
    if mode == "sampled":
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        for t in range(trials):
            s = int(rng.integers(1, s_max + 1))
            pick = rng.choice(H.m, size=s, replace=False)
            acc = 0
            for e in pick.tolist():
                acc |= masks[e]
            if gf2.popcount(acc) < slope * s - 1e-12:
                return ExpanderAudit(False, tuple(sorted(pick.tolist())), gf2.popcount(acc), s_max, mode, t + 1)
        return ExpanderAudit(True, None, None, s_max, mode, trials)
    if mode != "exhaustive":
        raise ValueError(f"unknown mode {mode!r}")

    cap = slope * s_max
    visited = 0
    stack: list[tuple[int, int, tuple[int, ...]]] = [(0, 0, ())]
    while stack:
        start, acc, chosen = stack.pop()
        for e in range(H.m - 1, start - 1, -1):
            new = acc | masks[e]
            sub = chosen + (e,)
            visited += 1
            if visited > budget:
                raise BudgetExceeded(f"more than {budget} subsets visited")
            touched = gf2.popcount(new)
            if touched < slope * len(sub) - 1e-12:
                return ExpanderAudit(False, sub, touched, s_max, mode, visited)
            if len(sub) < s_max and touched < cap - 1e-12:
                stack.append((e + 1, new, sub))
    return ExpanderAudit(True, None, None, s_max, mode, visited)


def sample_expander(n: int, d: int, k: int, gamma: float, eta: float, seed, simple: bool = True,
                    max_tries: int = 1000, budget: int = 10_000_000) -> tuple[Hypergraph, int]:
    """Resample the configuration model until the exhaustive expansion audit passes.

    Returns the hypergraph and the number of draws it took.
    """
    for t in range(max_tries):
        H = sample_config_model(n, d, k, [seed, t] if isinstance(seed, int) else seed, simple=simple)
        if audit_expander(H, gamma, eta, budget=budget).ok:
            return H, t + 1
    raise BudgetExceeded(f"no expander among {max_tries} draws")


def affine_plane_hypergraph(q: int, classes: int, seed) -> Hypergraph:
    """Lines of ``classes`` random parallel classes of the affine plane over ``Z_q`` (``q`` prime).

    The result is ``classes``-regular and ``q``-uniform on ``q*q`` vertices,
    and any two edges share at most one vertex.  Points are relabelled and
    the order inside each edge is shuffled at random.
    """
    if q < 2 or any(q % p == 0 for p in range(2, int(q ** 0.5) + 1)):
        raise ValueError("q must be prime")
    if not 1 <= classes <= q + 1:
        raise ValueError("classes must lie in [1, q+1]")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    label = rng.permutation(q * q)
    xs = np.arange(q)
    rows = []
    for c in rng.choice(q + 1, size=classes, replace=False).tolist():
        for off in range(q):
            pts = xs * q + off if c == q else xs + q * ((c * xs + off) % q)
            rows.append(rng.permutation(label[pts]))
    return Hypergraph(q * q, q, np.array(rows, dtype=np.int64))


def hypercycle(length: int, k: int) -> Hypergraph:
    """Cyclic chain of ``length`` edges, consecutive edges sharing one vertex."""
    if length < 2 or k < 2:
        raise ValueError("need length >= 2 and k >= 2")
    n = length * (k - 1)
    edges = []
    for i in range(length):
        base = i * (k - 1)
        edges.append([base + j for j in range(k - 1)] + [(base + k - 1) % n])
    return Hypergraph(n, k, np.array(edges))


def random_hypertree(m: int, k: int, rng: np.random.Generator) -> Hypergraph:
    """Uniform attachment hypertree: each new edge shares one old vertex."""
    edges = [list(range(k))]
    n = k
    for _ in range(m - 1):
        anchor = int(rng.integers(n))
        pos = int(rng.integers(k))
        e = list(range(n, n + k - 1))
        e.insert(pos, anchor)
        edges.append(e)
        n += k - 1
    return Hypergraph(n, k, np.array(edges))


def hypertree_shapes(m: int, k: int) -> list[Hypergraph]:
    """Every hypertree with ``m`` edges built by attaching edges one at a time.

    Shapes are generated by choosing, for each new edge, the earlier vertex
    it hangs from (its position in the new edge is the last slot), and are
    deduplicated by a canonical form.  Distinct labelings of isomorphic
    trees are collapsed.
    """
    out: dict[tuple, Hypergraph] = {}

    def grow(edges: list[list[int]], n: int):
        if len(edges) == m:
            H = Hypergraph(n, k, np.array(edges))
            out.setdefault(_tree_canon(H), H)
            return
        for anchor in range(n):
            grow(edges + [list(range(n, n + k - 1)) + [anchor]], n + k - 1)

    grow([list(range(k))], k)
    return list(out.values())


def _tree_canon(H: Hypergraph) -> tuple:
    inc = [[] for _ in range(H.n)]
    for e, row in enumerate(H.edges.tolist()):
        for v in row:
            inc[v].append(e)

    def canon_vertex(v: int, parent_edge: int) -> tuple:
        return tuple(sorted(canon_edge(e, v) for e in inc[v] if e != parent_edge))

    def canon_edge(e: int, parent_v: int) -> tuple:
        return tuple(sorted(canon_vertex(w, e) for w in H.edges[e].tolist() if w != parent_v))

    return min(canon_vertex(v, -1) for v in range(H.n))
