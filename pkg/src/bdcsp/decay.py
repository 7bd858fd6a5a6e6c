"""Exact probability engine for planted instances on small hypergraphs.

Distances follow the L1 convention: ``tv(p, q) = sum |p - q|``, so two
Boolean point masses on opposite values are at distance 2.  The distance
of a Boolean law to uniform is ``|p0 - p1| = 2 |bias|``.

Under the planted law the probability of the literal vectors given the
assignment factorises over constraints, so conditional laws of planted bits
given literals are Gibbs measures with one weight table per constraint:
``w_e(y) = P(y + b_e) / |acc|`` (or the noisy variant).  Marginals are
computed by exhaustive enumeration (any hypergraph) or by leaf-to-root
message passing (hypertrees), in floats or exact fractions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import SupportMismatch, TooLarge, ZeroNormalizer
from .hypergraph import Hypergraph, INF, incidence_girth, random_hypertree, structure
from .instances import edge_patterns
from .predicates import Predicate, rho as grid_rho

EQ_TOL = 1e-12
INEQ_TOL = 1e-9
ENUM_MAX_VARS = 24
EXACT_MAX_VARS = 16


# --- distances and small distributions ------------------------------------------


def tv(d1, d2=None) -> float:
    """L1 distance between two laws on the same finite universe.

    Accepts arrays (same shape) or mappings (same keys).  With ``d2``
    omitted the distance to the uniform law is returned.
    """
    if isinstance(d1, Mapping):
        if d2 is None:
            u = 1 / len(d1)
            return float(sum(abs(p - u) for p in d1.values()))
        if set(d1) != set(d2):
            raise SupportMismatch("the two laws live on different universes")
        return float(sum(abs(d1[x] - d2[x]) for x in d1))
    a = np.asarray(d1, dtype=float)
    if d2 is None:
        return float(np.abs(a - 1.0 / a.size).sum())
    b = np.asarray(d2, dtype=float)
    if a.shape != b.shape:
        raise SupportMismatch(f"shapes {a.shape} and {b.shape} differ")
    return float(np.abs(a - b).sum())


@dataclass(frozen=True)
class Dist01:
    """Law of a Boolean variable; ``p0`` may be a float or a Fraction."""

    p0: float | Fraction

    def __post_init__(self):
        if not -1e-12 <= self.p0 <= 1 + 1e-12:
            raise ValueError(f"p0 = {self.p0} is not a probability")

    @property
    def p1(self):
        return 1 - self.p0

    @property
    def bias(self):
        return self.p0 - Fraction(1, 2) if isinstance(self.p0, Fraction) else self.p0 - 0.5

    @property
    def tv(self):
        """Distance to uniform (``2 |bias|``)."""
        return abs(self.p0 - self.p1)

    @classmethod
    def from_bias(cls, delta) -> "Dist01":
        half = Fraction(1, 2) if isinstance(delta, Fraction) else 0.5
        return cls(half + delta)

    @classmethod
    def from_weights(cls, w0, w1) -> "Dist01":
        z = w0 + w1
        if z == 0:
            raise ZeroNormalizer("both outcomes have zero weight")
        return cls(w0 / z)


def posterior_product(factors: Sequence[Sequence[float]]) -> np.ndarray:
    """Normalised pointwise product of per-factor posteriors on a common support.

    With a uniform prior on the support and factors that are conditionally
    independent given the variable, this is the posterior given all factors.
    """
    arr = np.asarray(factors, dtype=float)
    prod = np.prod(arr, axis=0)
    z = prod.sum()
    if z <= 0:
        raise ZeroNormalizer("the factors have disjoint supports")
    return prod / z


def posterior_product_exact(factors: Sequence[Sequence[Fraction]]) -> list[Fraction]:
    prod = [Fraction(1)] * len(factors[0])
    for f in factors:
        prod = [a * Fraction(b) for a, b in zip(prod, f)]
    z = sum(prod)
    if z == 0:
        raise ZeroNormalizer("the factors have disjoint supports")
    return [p / z for p in prod]


def combine_biases(d1, d2):
    """Bias of the normalised product of two Boolean laws with biases ``d1``, ``d2``."""
    den = 1 + 4 * d1 * d2
    if den == 0:
        raise ZeroNormalizer("opposite point masses")
    return (d1 + d2) / den


def product_tv_is_tight(tvs: Sequence[float], tol: float = EQ_TOL) -> bool:
    """Whether the product-of-laws bound is attained: all but one input at zero."""
    return sum(1 for t in tvs if t > tol) <= 1


# --- factor models ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FactorModel:
    """Gibbs measure on ``{0,1}^n`` with weight tables per k-ary factor.

    ``tables[e, y]`` is the weight of the encoded tuple ``y`` on factor
    ``e``.  Object-dtype tables hold Fractions for exact arithmetic.
    """

    n: int
    edges: np.ndarray
    tables: np.ndarray

    @property
    def k(self) -> int:
        return int(self.edges.shape[1])

    @property
    def m(self) -> int:
        return int(self.edges.shape[0])

    def without(self, e: int) -> "FactorModel":
        keep = [f for f in range(self.m) if f != e]
        return FactorModel(self.n, self.edges[keep], self.tables[keep])


def literal_weights(P: Predicate, literals: Sequence[int], epsilon: float | None = None,
                    exact: bool = False) -> np.ndarray:
    """Tables ``Pr[b_e | x_e = y]`` for the planted (or noisy) law."""
    na, nr = P.n_accepting, P.size - P.n_accepting
    rows = []
    for b in literals:
        acc = [P.accepts(y ^ int(b)) for y in range(P.size)]
        if epsilon is None:
            row = [Fraction(int(a), na) for a in acc] if exact else [a / na for a in acc]
        else:
            eps = Fraction(epsilon) if exact else float(epsilon)
            row = [(1 - eps) / na if a else eps / nr for a in acc]
        rows.append(row)
    dtype = object if exact else float
    return np.array(rows, dtype=dtype).reshape(len(literals), P.size)


def planted_model(H: Hypergraph, P: Predicate, literals: Sequence[int], epsilon: float | None = None,
                  exact: bool = False) -> FactorModel:
    return FactorModel(H.n, H.edges, literal_weights(P, literals, epsilon, exact))


def _all_assignments(n: int) -> np.ndarray:
    xs = np.arange(1 << n, dtype=np.int64)
    return (xs[:, None] >> np.arange(n)) & 1


def joint_weights(model: FactorModel, fixed: Mapping[int, int] | None = None) -> np.ndarray:
    """Unnormalised weight of every assignment (zero where ``fixed`` is violated)."""
    if model.n > ENUM_MAX_VARS:
        raise TooLarge(f"{model.n} variables exceed {ENUM_MAX_VARS}")
    X = _all_assignments(model.n)
    exact = model.tables.dtype == object
    w = np.ones(len(X), dtype=object if exact else float)
    if exact:
        w[:] = Fraction(1)
    if model.m:
        pats = edge_patterns(model.edges, X)
        for e in range(model.m):
            w = w * model.tables[e][pats[:, e]]
    for v, val in (fixed or {}).items():
        w = np.where(X[:, v] == val, w, 0)
    return w


def enumerate_marginal(model: FactorModel, v: int, fixed: Mapping[int, int] | None = None) -> Dist01:
    """Law of ``x_v`` under the model conditioned on ``fixed``, by enumeration."""
    if model.tables.dtype == object and model.n > EXACT_MAX_VARS:
        raise TooLarge(f"exact enumeration limited to {EXACT_MAX_VARS} variables")
    w = joint_weights(model, fixed)
    X = _all_assignments(model.n)
    return Dist01.from_weights(w[X[:, v] == 0].sum(), w[X[:, v] == 1].sum())


def _rooted_order(edges: np.ndarray, root: int):
    """BFS over a hypertree: list of ``(edge, parent_vertex)`` from the root outwards."""
    inc: dict[int, list[int]] = {}
    for e, row in enumerate(edges.tolist()):
        for u in row:
            inc.setdefault(u, []).append(e)
    order, seen_e, seen_v = [], set(), {root}
    frontier = [root]
    while frontier:
        nxt = []
        for u in frontier:
            for e in inc.get(u, []):
                if e in seen_e:
                    continue
                seen_e.add(e)
                order.append((e, u))
                for w in edges[e].tolist():
                    if w != u:
                        if w in seen_v:
                            raise ValueError("not a hypertree")
                        seen_v.add(w)
                        nxt.append(w)
        frontier = nxt
    if len(seen_e) != len(edges):
        raise ValueError("hypertree is not connected")
    return order


def tree_root_weights(edges: np.ndarray, root: int, tables: np.ndarray,
                      fixed: Mapping[int, int] | None = None) -> np.ndarray:
    """Unnormalised root weights ``[w(x_root=0), w(x_root=1)]`` on a hypertree.

    ``tables`` may carry a leading batch axis, ``(B, m, 2**k)``, in which
    case the result has shape ``(B, 2)``.  Integer, float and object
    (Fraction) tables are all supported.
    """
    edges = np.asarray(edges, dtype=np.int64)
    batched = tables.ndim == 3
    T = tables if batched else tables[None]
    B, m, size = T.shape
    k = edges.shape[1]
    fixed = dict(fixed or {})

    def evidence(u):
        ev = np.ones((B, 2), dtype=T.dtype)
        if u in fixed:
            ev[:, 1 - fixed[u]] = 0
        return ev

    order = _rooted_order(edges, root)
    belief: dict[int, np.ndarray] = {}
    for e, parent in reversed(order):
        row = edges[e].tolist()
        msg = np.zeros((B, 2), dtype=T.dtype)
        ppos = row.index(parent)
        for y in range(size):
            term = T[:, e, y].copy()
            for j, w in enumerate(row):
                if j == ppos:
                    continue
                bw = belief.get(w)
                term = term * (bw if bw is not None else evidence(w))[:, (y >> j) & 1]
            msg[:, (y >> ppos) & 1] += term
        if parent not in belief:
            belief[parent] = evidence(parent)
        belief[parent] = belief[parent] * msg
    out = belief.get(root, evidence(root))
    return out if batched else out[0]


def tree_marginal(model: FactorModel, root: int, fixed: Mapping[int, int] | None = None) -> Dist01:
    w = tree_root_weights(model.edges, root, model.tables, fixed)
    return Dist01.from_weights(w[0], w[1])


# --- scaffolds ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TreeScaffold:
    """A hypertree with a root, conditioned leaves and literal vectors."""

    tree: Hypergraph
    root: int
    leaves: dict
    literals: tuple[int, ...]

    def __post_init__(self):
        rep = structure(self.tree)
        touched = np.unique(self.tree.edges)
        if rep.cyclomatic != 0 or rep.degenerate_edges:
            raise ValueError("scaffold is not a hypertree")
        if self.tree.m and len(touched) != self.tree.n:
            raise ValueError("scaffold has isolated vertices")
        if rep.components != 1:
            raise ValueError("scaffold is not connected")

    def model(self, P: Predicate, epsilon: float | None = None, exact: bool = False) -> FactorModel:
        return planted_model(self.tree, P, self.literals, epsilon, exact)

    def with_leaves(self, leaves: Mapping[int, int], root: int | None = None) -> "TreeScaffold":
        return TreeScaffold(self.tree, self.root if root is None else root, dict(leaves), self.literals)


def exact_conditional(scaffold: TreeScaffold, P: Predicate, method: str = "both",
                      epsilon: float | None = None, tol: float = EQ_TOL) -> Dist01:
    """Law of the root's planted bit given the leaves and all literal vectors.

    ``method`` is ``"enumerate"``, ``"tree"``, ``"exact"`` (fractions, by
    enumeration and by message passing) or ``"both"`` (floats, both
    backends, cross-checked to ``tol``).
    """
    if method == "tree":
        return tree_marginal(scaffold.model(P, epsilon), scaffold.root, scaffold.leaves)
    if method == "enumerate":
        return enumerate_marginal(scaffold.model(P, epsilon), scaffold.root, scaffold.leaves)
    if method == "exact":
        mdl = scaffold.model(P, epsilon, exact=True)
        a = tree_marginal(mdl, scaffold.root, scaffold.leaves)
        if scaffold.tree.n <= EXACT_MAX_VARS:
            b = enumerate_marginal(mdl, scaffold.root, scaffold.leaves)
            if a != b:
                raise AssertionError(f"exact backends disagree: {a} vs {b}")
        return a
    if method == "both":
        mdl = scaffold.model(P, epsilon)
        a = tree_marginal(mdl, scaffold.root, scaffold.leaves)
        if scaffold.tree.n <= ENUM_MAX_VARS:
            b = enumerate_marginal(mdl, scaffold.root, scaffold.leaves)
            if abs(a.p0 - b.p0) > tol:
                raise AssertionError(f"backends disagree: {a.p0} vs {b.p0}")
        return a
    raise ValueError(f"unknown method {method!r}")


def sample_planted_literals(H: Hypergraph, P: Predicate, rng: np.random.Generator,
                            epsilon: float | None = None) -> tuple[np.ndarray, tuple[int, ...]]:
    """Draw ``(x, b)`` from the planted (or noisy) law on ``H``."""
    x = rng.integers(0, 2, size=H.n)
    pats = edge_patterns(H.edges, x)
    acc, rej = P.accepting, P.rejecting
    lits = []
    for p in pats.tolist():
        pool = rej if (epsilon is not None and rng.random() < epsilon) else acc
        lits.append(p ^ pool[int(rng.integers(len(pool)))])
    return x, tuple(lits)


def tree_leaves(tree: Hypergraph) -> list[int]:
    deg = tree.degrees()
    return [int(v) for v in np.flatnonzero(deg == 1)]


def random_scaffold(P: Predicate, m: int, rng: np.random.Generator, leaf_fraction: float = 0.6) -> tuple[TreeScaffold, np.ndarray]:
    """Random hypertree, planted draw, and a random nonempty set of fixed leaves."""
    tree = random_hypertree(m, P.k, rng)
    x, lits = sample_planted_literals(tree, P, rng)
    leaves = tree_leaves(tree)
    root = int(rng.integers(tree.n))
    cand = [u for u in leaves if u != root]
    pick = [u for u in cand if rng.random() < leaf_fraction] or cand[:1]
    return TreeScaffold(tree, root, {u: int(x[u]) for u in pick}, lits), x


def _branches_at(tree: Hypergraph, v: int) -> list[set[int]]:
    """Vertex sets of the subtrees obtained by splitting ``v``."""
    edges = tree.edges.tolist()
    inc: dict[int, list[int]] = {}
    for e, row in enumerate(edges):
        for u in row:
            inc.setdefault(u, []).append(e)
    out = []
    for e0 in inc.get(v, []):
        seen_v, seen_e, stack = set(), {e0}, [w for w in edges[e0] if w != v]
        seen_v.update(stack)
        while stack:
            u = stack.pop()
            for e in inc[u]:
                if e in seen_e:
                    continue
                seen_e.add(e)
                for w in edges[e]:
                    if w != v and w not in seen_v:
                        seen_v.add(w)
                        stack.append(w)
        out.append(seen_v)
    return out


# --- certificates -------------------------------------------------------------------


@dataclass(frozen=True)
class BoundCheck:
    actual: float
    bound: float
    bound_rho1: float | None = None
    detail: dict = field(default_factory=dict, compare=False)

    @property
    def margin(self) -> float:
        return self.bound - self.actual

    @property
    def ok(self) -> bool:
        return self.margin >= -INEQ_TOL

    def to_json(self) -> dict:
        return {"actual": self.actual, "bound": self.bound, "bound_rho1": self.bound_rho1,
                "margin": self.margin, "ok": self.ok, **self.detail}


def certify_merge_vertex(scaffold: TreeScaffold, P: Predicate) -> BoundCheck:
    """Distance at the root given all leaves vs the sum over root branches."""
    v = scaffold.root
    whole = exact_conditional(scaffold, P).tv
    parts = []
    for branch in _branches_at(scaffold.tree, v):
        sub = {u: b for u, b in scaffold.leaves.items() if u in branch}
        parts.append(exact_conditional(scaffold.with_leaves(sub), P).tv if sub else 0.0)
    own = scaffold.leaves.get(v)
    if own is not None:
        return BoundCheck(whole, 1.0, detail={"branches": len(parts), "root_fixed": True})
    return BoundCheck(float(whole), float(sum(parts)), detail={"branches": len(parts), "parts": [float(p) for p in parts]})


def merge_edge_case(P: Predicate, rng: np.random.Generator, side_edges: int = 2,
                    leaf_fraction: float = 0.7) -> tuple[TreeScaffold, int, list[set[int]]]:
    """Edge ``e`` joining ``k-1`` random subtrees; the last vertex is the output.

    Returns the scaffold rooted at the output vertex, the index of the join
    edge, and the vertex sets of the incoming subtrees.
    """
    k = P.k
    edges: list[list[int]] = [list(range(k))]
    n = k
    sides = []
    for i in range(k - 1):
        members = {i}
        for _ in range(int(rng.integers(0, side_edges + 1))):
            anchor = int(rng.choice(sorted(members)))
            new = list(range(n, n + k - 1))
            pos = int(rng.integers(k))
            edges.append(new[:pos] + [anchor] + new[pos:])
            members.update(new)
            n += k - 1
        sides.append(members)
    tree = Hypergraph(n, k, np.array(edges))
    x, lits = sample_planted_literals(tree, P, rng)
    deg = tree.degrees()
    fixed = {}
    for s in sides:
        cand = [u for u in s if deg[u] == 1]
        pick = [u for u in cand if rng.random() < leaf_fraction]
        if not pick and len(s) == 1:
            pick = list(s)
        fixed.update({u: int(x[u]) for u in pick})
    return TreeScaffold(tree, k - 1, fixed, lits), 0, sides


def certify_merge_edge(scaffold: TreeScaffold, sides: Sequence[set[int]], join_edge: int, P: Predicate,
                       rho_value: float | None = None) -> BoundCheck:
    """Outgoing distance vs ``rho`` times the sum of incoming distances."""
    rho_value = grid_rho(P) if rho_value is None else rho_value
    row = scaffold.tree.edges[join_edge].tolist()
    out = exact_conditional(scaffold, P).tv
    incoming = []
    for s in sides:
        vi = next(u for u in row if u in s)
        sub = {u: b for u, b in scaffold.leaves.items() if u in s}
        incoming.append(float(exact_conditional(scaffold.with_leaves(sub, root=vi), P).tv) if sub else 0.0)
    total = sum(incoming)
    return BoundCheck(float(out), rho_value * total, total, {"rho": rho_value, "incoming": incoming})


def chain(length: int, k: int) -> Hypergraph:
    """Path of ``length`` edges; consecutive edges share a single vertex.

    Vertex 0 is the start, the last vertex of the last edge the end.
    """
    edges = []
    for i in range(length):
        a = i * (k - 1)
        edges.append([a] + list(range(a + 1, a + k)))
    return Hypergraph(length * (k - 1) + 1, k, np.array(edges))


def chain_profile(P: Predicate, literals: Sequence[int], start_value: int = 0,
                  epsilon: float | None = None, exact: bool = False) -> list:
    """Distance at each junction of a chain when only the start vertex is fixed.

    Entry ``i`` is the distance to uniform of the bit shared by edges
    ``i`` and ``i+1`` (the last entry is the chain's end).
    """
    H = chain(len(literals), P.k)
    mdl = planted_model(H, P, literals, epsilon, exact)
    out = []
    for i in range(1, len(literals) + 1):
        sub = FactorModel(i * (P.k - 1) + 1, mdl.edges[:i], mdl.tables[:i])
        out.append(tree_marginal(sub, i * (P.k - 1), {0: start_value}).tv)
    return out


def certify_noisy_decay(literals: Sequence[int], epsilon: float, start_value: int = 0) -> dict:
    """Per-edge contraction factors of the noisy 2-XOR law along a chain."""
    from .predicates import xor

    P = xor(2)
    prof = [1.0] + [float(t) for t in chain_profile(P, literals, start_value, epsilon)]
    factors = [prof[i + 1] / prof[i] for i in range(len(literals)) if prof[i] > 0]
    target = 1 - 2 * epsilon
    return {"epsilon": epsilon, "profile": prof, "factors": factors, "target": target,
            "max_error": max((abs(f - target) for f in factors), default=0.0),
            "total": prof[-1], "total_target": target ** len(literals)}


# --- bounds on graphs with cycles ------------------------------------------------------


def _literal_configs(H: Hypergraph, P: Predicate, free_edges: Sequence[int], rng: np.random.Generator,
                     exhaustive_max: int, samples: int) -> tuple[np.ndarray, str]:
    count = (1 << P.k) ** len(free_edges)
    if count <= exhaustive_max:
        grid = np.array(list(itertools.product(range(1 << P.k), repeat=len(free_edges))), dtype=np.int64)
        return grid.reshape(count, len(free_edges)), "exhaustive"
    rows = []
    for _ in range(samples):
        _, lits = sample_planted_literals(H, P, rng)
        rows.append([lits[e] for e in free_edges])
    return np.array(rows, dtype=np.int64), "sampled"


def _config_weights(H: Hypergraph, P: Predicate, free_edges: Sequence[int], configs: np.ndarray) -> np.ndarray:
    """``(C, 2**n)`` weights of every assignment under every literal configuration."""
    X = _all_assignments(H.n)
    pats = edge_patterns(H.edges[list(free_edges)], X)  # (2**n, m')
    table = P.table.astype(float) / P.n_accepting
    W = np.ones((configs.shape[0], len(X)))
    for j in range(len(free_edges)):
        W *= table[pats[None, :, j] ^ configs[:, j][:, None]]
    return W


def certify_path_bounds(H: Hypergraph, marked: int, P: Predicate, rng: np.random.Generator | None = None,
                        rho_value: float | None = None, exhaustive_max: int = 1 << 15,
                        samples: int = 256) -> dict:
    """Check both cycle bounds around the marked constraint ``e``.

    * for every ``v`` in ``e`` and ``S`` within ``e - v``: the distance of
      ``x_v`` given ``x_S`` and the other literals is at most
      ``rho**g * (2 cy(G - e) + k)``;
    * the distance of ``b_e`` given the other literals is at most
      ``k rho**g (4 cy(G - e) + 2k)``.

    ``g`` is the girth of ``G``.  Literal configurations of the other
    constraints are enumerated when there are at most ``exhaustive_max``,
    else drawn from the planted law.
    """
    if H.n > 16:
        raise TooLarge("path bounds are enumerated on at most 16 vertices")
    rng = rng or np.random.default_rng(0)
    rho_value = grid_rho(P) if rho_value is None else rho_value
    k = P.k
    g = incidence_girth(H.n, H.edges)
    rest = [f for f in range(H.m) if f != marked]
    cy_rest = structure(H.subhypergraph(rest)).cyclomatic
    configs, how = _literal_configs(H, P, rest, rng, exhaustive_max, samples)
    X = _all_assignments(H.n)
    row = H.edges[marked].tolist()
    selectors = []
    for vi, v in enumerate(row):
        others = sorted({u for j, u in enumerate(row) if j != vi and u != v})
        for r in range(len(others) + 1):
            for S in itertools.combinations(others, r):
                for vals in itertools.product((0, 1), repeat=len(S)):
                    mask = np.ones(len(X), dtype=bool)
                    for u, a in zip(S, vals):
                        mask &= X[:, u] == a
                    selectors.append((mask & (X[:, v] == 0), mask & (X[:, v] == 1)))
    pat_e = edge_patterns(H.edges[[marked]], X)[:, 0]
    table = P.table.astype(float) / P.n_accepting
    lit_tables = np.stack([table[pat_e ^ b] for b in range(1 << k)], axis=1)  # (2**n, 2**k)
    worst_v = worst_b = 0.0
    chunk = max(1, (1 << 22) // len(X))
    for lo in range(0, len(configs), chunk):
        W = _config_weights(H, P, rest, configs[lo:lo + chunk])
        z = W.sum(axis=1)
        ok = z > 0
        for m0, m1 in selectors:
            w0, w1 = W[:, m0].sum(axis=1), W[:, m1].sum(axis=1)
            zz = w0 + w1
            good = zz > 0
            if good.any():
                worst_v = max(worst_v, float(np.max(np.abs(w0[good] - w1[good]) / zz[good])))
        if ok.any():
            dist = (W[ok] @ lit_tables) / z[ok, None]
            worst_b = max(worst_b, float(np.max(np.abs(dist - 1.0 / (1 << k)).sum(axis=1))))
    gpow = 0.0 if g == INF else rho_value ** g
    bound_v = gpow * (2 * cy_rest + k) if g != INF else 0.0
    bound_b = k * gpow * (4 * cy_rest + 2 * k) if g != INF else 0.0
    return {
        "girth": None if g == INF else g, "cy_rest": cy_rest, "rho": rho_value, "configs": how,
        "n_configs": int(len(configs)),
        "vertex": BoundCheck(worst_v, bound_v, (2 * cy_rest + k) if g != INF else 0.0),
        "literal": BoundCheck(worst_b, bound_b, k * (4 * cy_rest + 2 * k) if g != INF else 0.0),
    }


def random_cyclic_graph(P: Predicate, rng: np.random.Generator, tree_edges: int = 3, extra: int = 2) -> tuple[Hypergraph, int]:
    """Random hypertree plus ``extra`` edges that each close one cycle.

    Every added edge reuses two existing vertices and brings ``k-2`` new
    ones, raising the cyclomatic number by one.  The last added edge is
    returned as the marked constraint; it lies on a hypercycle.
    """
    k = P.k
    base = random_hypertree(tree_edges, k, rng)
    edges = base.edges.tolist()
    n = base.n
    for _ in range(extra):
        a, b = rng.choice(n, size=2, replace=False).tolist()
        new = [a, b] + list(range(n, n + k - 2))
        n += k - 2
        edges.append([new[j] for j in rng.permutation(k)])
    return Hypergraph(n, k, np.array(edges)), len(edges) - 1


# --- independence and information ------------------------------------------------------


def conditional_mutual_information(joint: np.ndarray) -> float:
    """``I(A; C | B)`` in nats for a joint array indexed ``[a, b, c]``."""
    p = np.asarray(joint, dtype=float)
    p = p / p.sum()
    pb = p.sum(axis=(0, 2), keepdims=True)
    pab = p.sum(axis=2, keepdims=True)
    pbc = p.sum(axis=0, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = p * pb / (pab * pbc)
        terms = np.where(p > 0, p * np.log(np.where(p > 0, r, 1.0)), 0.0)
    return float(terms.sum())


def separation_cmi(model: FactorModel, A: Sequence[int], B: Sequence[int], C: Sequence[int]) -> float:
    """CMI of ``x_A`` and ``x_C`` given ``x_B`` under the model's Gibbs measure."""
    w = joint_weights(model).astype(float)
    X = _all_assignments(model.n)

    def code(vs):
        return (X[:, list(vs)] << np.arange(len(vs))).sum(axis=1) if vs else np.zeros(len(X), dtype=np.int64)

    ia, ib, ic = code(A), code(B), code(C)
    joint = np.zeros((1 << len(A), 1 << len(B), 1 << len(C)))
    np.add.at(joint, (ia, ib, ic), w)
    return conditional_mutual_information(joint)


def all_literal_configs(k: int, m: int) -> np.ndarray:
    """Every literal configuration of ``m`` constraints, shape ``((2**k)**m, m)``."""
    codes = np.arange((1 << k) ** m, dtype=np.int64)
    return (codes[:, None] >> (k * np.arange(m))) & ((1 << k) - 1)


def tree_vertex_weights(edges: np.ndarray, tables: np.ndarray) -> np.ndarray:
    """Unnormalised marginal weights of every vertex of a hypertree, in one up/down sweep.

    ``tables`` has shape ``(B, m, 2**k)``; the result has shape ``(B, n, 2)``
    where ``n`` is one more than the largest vertex label.
    """
    edges = np.asarray(edges, dtype=np.int64)
    B, m, size = tables.shape
    n = int(edges.max()) + 1
    root = int(edges[0, 0])
    order = _rooted_order(edges, root)
    parent_of = {e: p for e, p in order}
    children: dict[int, list[int]] = {}
    for e, p in order:
        children.setdefault(p, []).append(e)
    one = np.ones((B, 2), dtype=tables.dtype)
    up: dict[int, np.ndarray] = {}
    below: dict[int, np.ndarray] = {}

    def below_of(u):
        return below.get(u, one)

    for e, p in reversed(order):
        row = edges[e].tolist()
        pp = row.index(p)
        msg = np.zeros((B, 2), dtype=tables.dtype)
        for y in range(size):
            term = tables[:, e, y]
            for j, w in enumerate(row):
                if j != pp:
                    term = term * below_of(w)[:, (y >> j) & 1]
            msg[:, (y >> pp) & 1] += term
        up[e] = msg
        below[p] = below_of(p) * msg
    down: dict[int, np.ndarray] = {root: one}
    for e, p in order:
        row = edges[e].tolist()
        pp = row.index(p)
        above = down[p]
        for f in children.get(p, []):
            if f != e:
                above = above * up[f]
        for j, w in enumerate(row):
            if j == pp:
                continue
            msg = np.zeros((B, 2), dtype=tables.dtype)
            for y in range(size):
                term = tables[:, e, y] * above[:, (y >> pp) & 1]
                for j2, w2 in enumerate(row):
                    if j2 != pp and j2 != j:
                        term = term * below_of(w2)[:, (y >> j2) & 1]
                msg[:, (y >> j) & 1] += term
            down[w] = msg
    out = np.zeros((B, n, 2), dtype=tables.dtype)
    for u in down:
        out[:, u] = down[u] * below_of(u)
    return out


def tree_independence_counts(tree: Hypergraph, P: Predicate, configs: np.ndarray | None = None,
                             chunk: int = 1 << 14) -> np.ndarray:
    """Integer counts of planted assignments with ``x_v = 0, 1`` for every vertex and literal configuration.

    A planted assignment is counted once per literal configuration it can
    produce.  The planted bit of ``v`` is independent of all literals iff
    the two counts coincide for every configuration; the counts themselves
    must not depend on the configuration for the literals to be jointly
    uniform.  Shape ``(C, n, 2)``.
    """
    if configs is None:
        configs = all_literal_configs(P.k, tree.m)
    acc = P.table.astype(np.int32)
    idx = np.arange(P.size)
    parts = []
    for lo in range(0, len(configs), chunk):
        T = acc[idx[None, None, :] ^ configs[lo:lo + chunk, :, None]]
        parts.append(tree_vertex_weights(tree.edges, T))
    return np.concatenate(parts)


def literal_joint_law(tree: Hypergraph, P: Predicate) -> np.ndarray:
    """Exact law of all literal vectors ``b_E`` (as counts over ``x``) on a small hypergraph."""
    X = _all_assignments(tree.n)
    pats = edge_patterns(tree.edges, X)
    m = tree.m
    counts = np.zeros((1 << P.k) ** m, dtype=np.int64)
    for a_idx in itertools.product(range(P.n_accepting), repeat=m):
        b = pats ^ np.array([P.accepting[i] for i in a_idx], dtype=np.int64)
        code = (b << (P.k * np.arange(m))).sum(axis=1)
        np.add.at(counts, code, 1)
    return counts


# --- generic inequalities on joint tables ---------------------------------------------


def addition_check(joint1: np.ndarray, joint2: np.ndarray) -> BoundCheck:
    """Distance of two joints ``[x, y]`` vs marginal distance plus worst conditional distance.

    Values of ``x`` with zero mass under either law are skipped in the
    conditional term (the conditional is then unconstrained and its
    contribution vanishes).
    """
    p, q = np.asarray(joint1, dtype=float), np.asarray(joint2, dtype=float)
    px, qx = p.sum(axis=1), q.sum(axis=1)
    dx = np.abs(px - qx).sum()
    dy = 0.0
    for i in range(p.shape[0]):
        if px[i] > 0 and qx[i] > 0:
            dy = max(dy, float(np.abs(p[i] / px[i] - q[i] / qx[i]).sum()))
    return BoundCheck(float(np.abs(p - q).sum()), float(dx + dy), detail={"delta_x": float(dx), "delta_y": dy})


def markov_triple(pa: np.ndarray, kba: np.ndarray, kcb: np.ndarray) -> np.ndarray:
    """Joint ``[a, b, c]`` of a chain ``A -> B -> C`` from a prior and two row-stochastic kernels."""
    return pa[:, None, None] * kba[:, :, None] * kcb[None, :, :]


def serial_check(joint: np.ndarray) -> list[BoundCheck]:
    """For each value of ``A``: distance of ``C | A=a`` from the law of ``C`` vs the product bound.

    Distances are taken against the unconditioned marginals; the ``B -> C``
    factor is the worst case over values of ``B`` with positive mass.
    """
    p = np.asarray(joint, dtype=float)
    p = p / p.sum()
    pa, pb, pc = p.sum(axis=(1, 2)), p.sum(axis=(0, 2)), p.sum(axis=(0, 1))
    pbc = p.sum(axis=0)
    dcb = max(float(np.abs(pbc[b] / pb[b] - pc).sum()) for b in range(len(pb)) if pb[b] > 0)
    out = []
    for a in range(len(pa)):
        if pa[a] <= 0:
            continue
        cond = p[a] / pa[a]
        dca = float(np.abs(cond.sum(axis=0) - pc).sum())
        dba = float(np.abs(cond.sum(axis=1) - pb).sum())
        out.append(BoundCheck(dca, dba * dcb, detail={"a": a}))
    return out


def product_tv_check(factors: Sequence[Sequence[float]]) -> BoundCheck:
    """Distance to uniform of a normalised product of Boolean laws vs the sum of input distances."""
    post = posterior_product(factors)
    ins = [tv(f) for f in factors]
    return BoundCheck(tv(post), float(sum(ins)), detail={"inputs": ins})


def brute_bayes(prior_support: Sequence[int], likelihoods: Sequence[np.ndarray], observed: Sequence[int]) -> np.ndarray:
    """Posterior of ``x`` given independent observations ``y_i ~ L_i[x, :]``, from the joint table."""
    n = len(likelihoods[0])
    prior = np.zeros(n)
    prior[list(prior_support)] = 1.0 / len(prior_support)
    joint = prior.copy()
    for L, y in zip(likelihoods, observed):
        joint = joint * np.asarray(L)[:, y]
    z = joint.sum()
    if z <= 0:
        raise ZeroNormalizer("observations have zero probability")
    return joint / z


def per_factor_posteriors(prior_support: Sequence[int], likelihoods: Sequence[np.ndarray],
                          observed: Sequence[int]) -> list[np.ndarray]:
    return [brute_bayes(prior_support, [L], [y]) for L, y in zip(likelihoods, observed)]


# --- batch certification -----------------------------------------------------------------


@dataclass
class CheckSummary:
    """Outcome of a batch of certified inequalities or identities.

    ``margins`` holds ``bound - actual`` for inequalities and ``-error``
    for identities; a case passes when its margin is at least ``-tolerance``.
    """

    name: str
    tolerance: float
    margins: list = field(default_factory=list, repr=False)
    notes: dict = field(default_factory=dict)

    @property
    def cases(self) -> int:
        return len(self.margins)

    @property
    def violations(self) -> int:
        return sum(1 for m in self.margins if m < -self.tolerance)

    @property
    def min_margin(self) -> float:
        return float(min(self.margins)) if self.margins else float("inf")

    @property
    def ok(self) -> bool:
        return self.cases > 0 and self.violations == 0

    def to_json(self) -> dict:
        return {"name": self.name, "cases": self.cases, "violations": self.violations,
                "min_margin": self.min_margin, "tolerance": self.tolerance, "ok": self.ok, **self.notes}


def _rng_of(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def check_addition(trials: int = 10_000, seed=0) -> CheckSummary:
    rng = _rng_of(seed)
    out = CheckSummary("addition", EQ_TOL)
    for _ in range(trials):
        a, b = int(rng.integers(1, 5)), int(rng.integers(2, 5))
        p = rng.dirichlet(np.full(a * b, 0.5)).reshape(a, b)
        q = rng.dirichlet(np.full(a * b, 0.5)).reshape(a, b)
        out.margins.append(addition_check(p, q).margin)
    return out


def check_serial(trials: int = 10_000, seed=0) -> CheckSummary:
    rng = _rng_of(seed)
    out = CheckSummary("serial", EQ_TOL)
    for _ in range(trials):
        na, nb, nc = (int(v) for v in rng.integers(2, 5, size=3))
        J = markov_triple(rng.dirichlet(np.ones(na)), rng.dirichlet(np.full(nb, 0.5), na),
                          rng.dirichlet(np.full(nc, 0.5), nb))
        out.margins.extend(c.margin for c in serial_check(J))
    return out


def check_product_rule(trials: int = 10_000, seed=0) -> CheckSummary:
    """Normalised product of single-observation posteriors vs joint-table Bayes, plus the bias formula."""
    rng = _rng_of(seed)
    out = CheckSummary("product-rule", EQ_TOL)
    for _ in range(trials):
        size = int(rng.integers(2, 5))
        support = sorted(rng.choice(size, size=int(rng.integers(1, size + 1)), replace=False).tolist())
        t = int(rng.integers(1, 4))
        L = [rng.dirichlet(np.ones(3), size) for _ in range(t)]
        obs = rng.integers(0, 3, size=t).tolist()
        direct = brute_bayes(support, L, obs)
        prod = posterior_product(per_factor_posteriors(support, L, obs))
        out.margins.append(-float(np.abs(direct - prod).max()))
    exact_ok = 0
    for _ in range(min(trials, 1000)):
        d1 = Fraction(int(rng.integers(-49, 50)), 100)
        d2 = Fraction(int(rng.integers(-49, 50)), 100)
        post = posterior_product_exact([[Fraction(1, 2) + d1, Fraction(1, 2) - d1],
                                        [Fraction(1, 2) + d2, Fraction(1, 2) - d2]])
        exact_ok += post[0] - Fraction(1, 2) == combine_biases(d1, d2)
        out.margins.append(0.0 if post[0] - Fraction(1, 2) == combine_biases(d1, d2) else -1.0)
    out.notes["bias_formula_exact"] = exact_ok
    out.notes["quarter_quarter_p0"] = str(Fraction(1, 2) + combine_biases(Fraction(1, 4), Fraction(1, 4)))
    return out


def check_product_tv(trials: int = 10_000, seed=0) -> CheckSummary:
    """Product of Boolean laws: distance bound, and tightness exactly when at most one input is non-uniform."""
    rng = _rng_of(seed)
    out = CheckSummary("product-tv", EQ_TOL)
    tight_mismatch = 0
    for _ in range(trials):
        t = int(rng.integers(2, 5))
        p = rng.random(t)
        zero = rng.random(t) < 0.4
        p[zero] = 0.5
        factors = [[a, 1 - a] for a in p]
        c = product_tv_check(factors)
        out.margins.append(c.margin)
        tight = abs(c.margin) <= EQ_TOL
        tight_mismatch += tight != product_tv_is_tight(c.detail["inputs"])
    out.notes["tightness_mismatches"] = tight_mismatch
    if tight_mismatch:
        out.margins.append(-1.0)
    return out


def check_tree_independence(max_edges: int = 5, arities: Sequence[int] = (3, 4), seed=0) -> CheckSummary:
    """On every hypertree shape: planted bits independent of all literals, literals jointly uniform."""
    from .hypergraph import hypertree_shapes
    from .predicates import equ, nae

    out = CheckSummary("tree-independence", EQ_TOL)
    shapes = 0
    for k in arities:
        for P in (equ(k), nae(k)):
            for m in range(1, max_edges + 1):
                for T in hypertree_shapes(m, k):
                    shapes += 1
                    c = tree_independence_counts(T, P)
                    totals = c[:, 0].sum(axis=1)
                    tv_max = float(np.max(np.abs(c[:, :, 0] - c[:, :, 1]) / totals[:, None]))
                    spread = float((totals.max() - totals.min()) / totals.max())
                    out.margins.append(-max(tv_max, spread))
    out.notes["shapes"] = shapes
    return out


def check_merge_vertex(trials: int = 100, seed=0, P: Predicate | None = None) -> CheckSummary:
    from .predicates import nae

    P = P or nae(3)
    rng = _rng_of(seed)
    out = CheckSummary("merge-vertex", INEQ_TOL)
    for _ in range(trials):
        s, _ = random_scaffold(P, int(rng.integers(2, 6)), rng)
        out.margins.append(certify_merge_vertex(s, P).margin)
    return out


def check_merge_edge(trials: int = 1000, seed=0, P: Predicate | None = None) -> CheckSummary:
    """Edge contraction on random join scaffolds, and lossless propagation through EQU chains."""
    from .predicates import equ, nae

    P = P or nae(3)
    rng = _rng_of(seed)
    r = grid_rho(P)
    out = CheckSummary("merge-edge", INEQ_TOL, notes={"rho": r, "predicate": P.name})
    for _ in range(trials):
        s, e, sides = merge_edge_case(P, rng)
        out.margins.append(certify_merge_edge(s, sides, e, P, r).margin)
    E = equ(P.k)
    for length in range(1, 9):
        lits = rng.integers(0, 1 << P.k, size=length).tolist()
        prof = chain_profile(E, lits)
        out.margins.append(-max(abs(float(t) - 1.0) for t in prof))
        prof = chain_profile(P, lits)
        out.margins.extend(r ** (i + 1) - float(t) for i, t in enumerate(prof))
    return out


def check_cycle_bounds(max_girth: int = 6, random_graphs: int = 100, seed=0, P: Predicate | None = None) -> CheckSummary:
    """Both cycle bounds on single hypercycles and on random graphs with at most two independent cycles."""
    from .hypergraph import hypercycle
    from .predicates import nae

    P = P or nae(3)
    rng = _rng_of(seed)
    out = CheckSummary("cycle-bounds", INEQ_TOL)
    for g in range(2, max_girth + 1):
        r = certify_path_bounds(hypercycle(g, P.k), 0, P, rng)
        out.margins.extend([r["vertex"].margin, r["literal"].margin])
    for _ in range(random_graphs):
        H, e = random_cyclic_graph(P, rng, tree_edges=int(rng.integers(1, 4)), extra=int(rng.integers(1, 3)))
        r = certify_path_bounds(H, e, P, rng)
        out.margins.extend([r["vertex"].margin, r["literal"].margin])
    return out


def check_noisy_chain(epsilons: Sequence[float] = (0.0, 0.05, 0.1, 0.25), trials: int = 20, seed=0) -> CheckSummary:
    rng = _rng_of(seed)
    out = CheckSummary("noisy-chain", EQ_TOL)
    for eps in epsilons:
        for _ in range(trials):
            lits = rng.integers(0, 4, size=int(rng.integers(1, 9))).tolist()
            r = certify_noisy_decay(lits, eps, int(rng.integers(2)))
            out.margins.append(-r["max_error"])
            out.margins.append(-abs(r["total"] - r["total_target"]))
    return out


def check_separation(trials: int = 50, seed=0, P: Predicate | None = None) -> CheckSummary:
    """Conditional mutual information across a cut vertex of a hypertree is zero given the literals."""
    from .predicates import nae

    P = P or nae(3)
    rng = _rng_of(seed)
    out = CheckSummary("separation", EQ_TOL)
    done = 0
    while done < trials:
        tree = random_hypertree(int(rng.integers(2, 5)), P.k, rng)
        deg = tree.degrees()
        cuts = np.flatnonzero(deg >= 2)
        if not len(cuts):
            continue
        v = int(rng.choice(cuts))
        branches = _branches_at(tree, v)
        i, j = rng.choice(len(branches), size=2, replace=False).tolist()
        A = [int(rng.choice(sorted(branches[i])))]
        C = [int(rng.choice(sorted(branches[j])))]
        _, lits = sample_planted_literals(tree, P, rng)
        out.margins.append(-abs(separation_cmi(planted_model(tree, P, lits), A, [v], C)))
        done += 1
    return out


CHECKS = {
    "addition": check_addition,
    "serial": check_serial,
    "product-rule": check_product_rule,
    "product-tv": check_product_tv,
    "tree-independence": check_tree_independence,
    "merge-vertex": check_merge_vertex,
    "merge-edge": check_merge_edge,
    "cycle-bounds": check_cycle_bounds,
    "noisy-chain": check_noisy_chain,
    "separation": check_separation,
}
