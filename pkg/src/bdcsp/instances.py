"""CSP instances over hypergraphs: samplers for the planted, uniform-literal,
noisy 2-XOR and Hamming-code distributions, and exhaustive oracles for
satisfiability, farness and chunk rank."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import gf2
from .errors import ArityMismatch, ArityNot2, NotSuperset, TooLarge
from .hypergraph import Hypergraph
from .predicates import GeneratorMatrix, Predicate, is_superset_of, xor
from . import predicates as _pred

BRUTE_MAX_VARS = 26


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


@dataclass(frozen=True, eq=False)
class Instance:
    """Constraints ``P(x_e + b_e) = 1`` over the edges of ``hypergraph``.

    ``literals[e]`` encodes ``b_e`` (bit ``i`` = position ``i``).  For
    Hamming instances ``generator`` is set and ``literals[e]`` is the
    required syndrome ``A x_e`` instead.
    """

    predicate: Predicate
    hypergraph: Hypergraph
    literals: np.ndarray
    declared_d: int
    planted: np.ndarray | None = None
    noise: np.ndarray | None = field(default=None, repr=False)
    generator: GeneratorMatrix | None = None

    def __post_init__(self):
        lit = np.asarray(self.literals, dtype=np.int64).reshape(-1)
        if lit.shape[0] != self.hypergraph.m:
            raise ValueError("one literal vector per edge required")
        if self.predicate.k != self.hypergraph.k:
            raise ArityMismatch("predicate and hypergraph arities differ")
        lit.flags.writeable = False
        object.__setattr__(self, "literals", lit)
        if self.planted is not None:
            x = np.asarray(self.planted, dtype=np.int8)
            x.flags.writeable = False
            object.__setattr__(self, "planted", x)

    @property
    def n(self) -> int:
        return self.hypergraph.n

    @property
    def m(self) -> int:
        return self.hypergraph.m

    @property
    def k(self) -> int:
        return self.hypergraph.k

    def constraint(self, e: int) -> tuple[tuple[int, ...], int]:
        return tuple(self.hypergraph.edges[e].tolist()), int(self.literals[e])

    def patterns(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.int64)
        return edge_patterns(self.hypergraph.edges, x)

    def satisfied(self, x: np.ndarray) -> np.ndarray:
        return _sat_mask(self, self.patterns(x))

    def num_satisfied(self, x: np.ndarray) -> int:
        return int(self.satisfied(x).sum())

    def is_satisfied_by(self, x: np.ndarray) -> bool:
        return bool(self.satisfied(x).all())

    def restrict(self, edge_ids: Sequence[int]) -> "Instance":
        ids = np.asarray(list(edge_ids), dtype=np.int64)
        return Instance(self.predicate, self.hypergraph.subhypergraph(ids), self.literals[ids],
                        self.declared_d, self.planted, None if self.noise is None else self.noise[ids],
                        self.generator)

    def to_json(self) -> dict:
        d = {
            "predicate": self.predicate.to_json(),
            "hypergraph": self.hypergraph.to_json(),
            "literals": [format(int(b), "x") for b in self.literals],
            "declared_d": self.declared_d,
        }
        if self.planted is not None:
            d["planted"] = self.planted.tolist()
        if self.generator is not None:
            d["generator"] = self.generator.to_json()
        return d

    @classmethod
    def from_json(cls, d: dict) -> "Instance":
        gen = GeneratorMatrix.from_json(d["generator"]) if "generator" in d else None
        return cls(
            predicate=_pred.from_json(d["predicate"]),
            hypergraph=Hypergraph.from_json(d["hypergraph"]),
            literals=np.array([int(b, 16) for b in d["literals"]], dtype=np.int64),
            declared_d=d["declared_d"],
            planted=None if d.get("planted") is None else np.array(d["planted"], dtype=np.int8),
            generator=gen,
        )


def edge_patterns(edges: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Encoded ``x_e`` for every edge (works for batched ``x`` on axis 0)."""
    vals = x[..., edges]
    shifts = np.arange(edges.shape[1], dtype=np.int64)
    return (vals.astype(np.int64) << shifts).sum(axis=-1)


def _sat_mask(inst: Instance, pat: np.ndarray) -> np.ndarray:
    if inst.generator is not None:
        return inst.generator.syndrome_table[pat] == inst.literals
    return inst.predicate.table[pat ^ inst.literals].astype(bool)


# --- samplers ----------------------------------------------------------------


def sample_planted(H: Hypergraph, P: Predicate, seed, declared_d: int | None = None) -> Instance:
    """Planted ``x`` uniform; each ``b_e`` uniform over ``{b : P(x_e + b) = 1}``."""
    return sample_planted_superset(H, P, P, seed, declared_d)


def sample_planted_superset(H: Hypergraph, P: Predicate, Q: Predicate, seed,
                            declared_d: int | None = None) -> Instance:
    """Literals drawn as for ``P``, instance read under ``Q``."""
    if P.k != H.k:
        raise ArityMismatch("predicate and hypergraph arities differ")
    if not is_superset_of(Q, P):
        raise NotSuperset(f"{Q.name} does not contain the acceptances of {P.name}")
    rng = _rng(seed)
    x = rng.integers(0, 2, size=H.n, dtype=np.int64)
    acc = np.array(P.accepting, dtype=np.int64)
    b = edge_patterns(H.edges, x) ^ acc[rng.integers(0, len(acc), size=H.m)]
    return Instance(Q, H, b, declared_d or H.max_degree(), planted=x)


def sample_uniform(H: Hypergraph, P: Predicate, seed, declared_d: int | None = None) -> Instance:
    rng = _rng(seed)
    b = rng.integers(0, 1 << H.k, size=H.m, dtype=np.int64)
    return Instance(P, H, b, declared_d or H.max_degree())


def sample_noisy_2xor(H: Hypergraph, epsilon: float, seed, declared_d: int | None = None) -> Instance:
    """2-XOR with each constraint independently made violated with prob. ``epsilon``."""
    if H.k != 2:
        raise ArityNot2(f"noisy XOR needs k = 2, got {H.k}")
    if not 0 <= epsilon < 0.5:
        raise ValueError("epsilon must lie in [0, 1/2)")
    P = xor(2)
    rng = _rng(seed)
    x = rng.integers(0, 2, size=H.n, dtype=np.int64)
    acc = np.array(P.accepting, dtype=np.int64)
    rej = np.array(P.rejecting, dtype=np.int64)
    noise = rng.random(H.m) < epsilon
    pick = rng.integers(0, 2, size=H.m)
    target = np.where(noise, rej[pick], acc[pick])
    b = edge_patterns(H.edges, x) ^ target
    return Instance(P, H, b, declared_d or H.max_degree(), planted=x, noise=noise)


def sample_hamming(H: Hypergraph, A: GeneratorMatrix, mode: str, seed,
                   declared_d: int | None = None) -> Instance:
    """Constraints ``A x_e = b_e``; planted mode uses ``b_e = A x_e`` for a random ``x``."""
    if A.k != H.k:
        raise ArityMismatch("generator width differs from edge arity")
    rng = _rng(seed)
    if mode == "planted":
        x = rng.integers(0, 2, size=H.n, dtype=np.int64)
        rhs = A.syndrome_table[edge_patterns(H.edges, x)]
    elif mode == "uniform":
        x = None
        rhs = rng.integers(0, 1 << A.h, size=H.m, dtype=np.int64)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return Instance(A.predicate(), H, rhs, declared_d or H.max_degree(), planted=x, generator=A)


def literal_law(P: Predicate) -> list[Fraction]:
    """Exact law of ``b_e`` when ``x_e`` is uniform and ``b_e`` is planted-uniform."""
    law = [Fraction(0)] * P.size
    w = Fraction(1, P.size * P.n_accepting)
    for xe in range(P.size):
        for a in P.accepting:
            law[xe ^ a] += w
    return law


# --- exhaustive oracles ------------------------------------------------------


@dataclass(frozen=True)
class FarnessReport:
    min_removals: int
    farness: float
    maxsat_fraction: float
    best_assignment: tuple[int, ...]

    @property
    def satisfiable(self) -> bool:
        return self.min_removals == 0


def _sweep(inst: Instance, n_vars: int, edges: np.ndarray, literals: np.ndarray, stop_at: int | None = None):
    """Max satisfied count over all ``2**n_vars`` assignments of relabeled vars.

    Variables are split into a low and a high block.  An edge's encoded
    tuple is the OR of the contributions of both blocks, so each high-block
    value costs one table lookup per (low value, edge) pair.
    """
    m, k = edges.shape
    probe = Instance(inst.predicate, Hypergraph(max(n_vars, 1), k, edges), literals,
                     inst.declared_d, generator=inst.generator)
    size = 1 << k
    all_pats = np.broadcast_to(np.arange(size, dtype=np.int64)[:, None], (size, m))
    ok = _sat_mask(probe, all_pats).T.astype(np.uint8).reshape(-1)  # index e * size + pattern
    n_lo = min(n_vars, 12)
    n_hi = n_vars - n_lo
    lo_vals = np.arange(1 << n_lo, dtype=np.int64)
    hi_vals = np.arange(1 << n_hi, dtype=np.int64)
    shifts = np.arange(k, dtype=np.int64)
    in_lo = edges < n_lo
    bits_lo = (lo_vals[:, None, None] >> np.where(in_lo, edges, 0)) & in_lo
    pat_lo = (bits_lo << shifts).sum(axis=-1) + np.arange(m, dtype=np.int64) * size
    bits_hi = (hi_vals[:, None, None] >> np.where(in_lo, 0, edges - n_lo)) & ~in_lo
    pat_hi = (bits_hi << shifts).sum(axis=-1)
    idx_dtype = np.int32 if m * size < 2 ** 31 else np.int64
    pat_lo = pat_lo.astype(idx_dtype)
    pat_hi = pat_hi.astype(idx_dtype)
    chunk = max(1, (1 << 23) // max(1, pat_lo.size))
    best, best_x = -1, 0
    for start in range(0, len(hi_vals), chunk):
        block = pat_hi[start:start + chunk]
        counts = ok[pat_lo[None, :, :] | block[:, None, :]].sum(axis=-1, dtype=np.int64)
        j = int(counts.argmax())
        if counts.flat[j] > best:
            h, l = divmod(j, pat_lo.shape[0])
            best, best_x = int(counts.flat[j]), int(((start + h) << n_lo) | l)
            if stop_at is not None and best >= stop_at:
                break
    return best, best_x


def brute_farness(inst: Instance) -> FarnessReport:
    """Exact minimum number of constraints to delete for satisfiability."""
    if inst.n > BRUTE_MAX_VARS:
        raise TooLarge(f"{inst.n} variables exceed the exhaustive limit {BRUTE_MAX_VARS}")
    best, bx = _sweep(inst, inst.n, inst.hypergraph.edges, inst.literals)
    removals = inst.m - best
    scale = inst.declared_d * inst.n / inst.k
    return FarnessReport(
        removals,
        removals / scale if scale else 0.0,
        best / inst.m if inst.m else 1.0,
        tuple((bx >> i) & 1 for i in range(inst.n)),
    )


def check_subinstance_satisfiable(inst: Instance, subset: Sequence[int]) -> bool:
    ids = np.asarray(list(subset), dtype=np.int64)
    if ids.size == 0:
        return True
    edges = inst.hypergraph.edges[ids]
    verts, relabeled = np.unique(edges, return_inverse=True)
    if len(verts) > BRUTE_MAX_VARS:
        raise TooLarge(f"{len(verts)} touched variables exceed {BRUTE_MAX_VARS}")
    best, _ = _sweep(inst, len(verts), relabeled.reshape(edges.shape), inst.literals[ids], stop_at=len(ids))
    return best == len(ids)


# --- Hamming chunk rank --------------------------------------------------------


def chunk_rows(inst: Instance, e: int) -> list[int]:
    """GF(2) rows of constraint ``e`` as bitmasks over the variables."""
    A = inst.generator
    verts = inst.hypergraph.edges[e].tolist()
    rows = []
    for r in A.rows:
        acc = 0
        for j, v in enumerate(verts):
            if (r >> j) & 1:
                acc ^= 1 << v
        rows.append(acc)
    return rows


def chunk_rank(inst: Instance, subset: Sequence[int]) -> int:
    return gf2.rank(r for e in subset for r in chunk_rows(inst, e))


@dataclass
class RankAudit:
    checked: dict = field(default_factory=dict)
    full_rank: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {"checked": self.checked, "full_rank": self.full_rank,
                "violations": [list(v) for v in self.violations[:10]], "ok": self.ok}


def chunk_rank_audit(inst: Instance, exhaustive_max: int = 2, random_max: int = 5,
                     trials: int = 1000, seed=0) -> RankAudit:
    """Check that every audited constraint subset has full chunk rank ``s*h``.

    All subsets of size ``<= exhaustive_max`` are checked, then ``trials``
    random subsets with size uniform in ``[1, random_max]``.
    """
    if inst.generator is None:
        raise ValueError("not a Hamming instance")
    h = inst.generator.h
    rows = [chunk_rows(inst, e) for e in range(inst.m)]
    out = RankAudit()

    def check(sub):
        s = len(sub)
        out.checked[s] = out.checked.get(s, 0) + 1
        if gf2.rank(r for e in sub for r in rows[e]) == s * h:
            out.full_rank[s] = out.full_rank.get(s, 0) + 1
        else:
            out.violations.append(tuple(sub))

    for s in range(1, exhaustive_max + 1):
        for sub in itertools.combinations(range(inst.m), s):
            check(sub)
    rng = _rng(seed)
    for _ in range(trials):
        s = int(rng.integers(1, random_max + 1))
        check(tuple(sorted(rng.choice(inst.m, size=s, replace=False).tolist())))
    return out


def planted_rhs_law(inst: Instance, subset: Sequence[int], enumerate_max: int = 20) -> dict:
    """Exact law of the stacked right-hand sides of ``subset`` under a uniform ``x``.

    Enumerates every assignment of the touched variables; returns
    ``{rhs_tuple: Fraction}``.
    """
    A = inst.generator
    ids = list(subset)
    edges = inst.hypergraph.edges[ids]
    verts, rel = np.unique(edges, return_inverse=True)
    rel = rel.reshape(edges.shape)
    nv = len(verts)
    if nv > enumerate_max:
        raise TooLarge(f"{nv} touched variables exceed {enumerate_max}")
    xs = np.arange(1 << nv, dtype=np.int64)
    X = (xs[:, None] >> np.arange(nv)) & 1
    syn = A.syndrome_table[edge_patterns(rel, X)]
    key = np.zeros(len(xs), dtype=np.int64)
    for j in range(len(ids)):
        key |= syn[:, j] << (A.h * j)
    vals, counts = np.unique(key, return_counts=True)
    mask = (1 << A.h) - 1
    return {tuple((int(v) >> (A.h * j)) & mask for j in range(len(ids))): Fraction(int(c), 1 << nv)
            for v, c in zip(vals, counts)}


def rhs_law_is_uniform(law: dict, s: int, h: int) -> bool:
    target = Fraction(1, 1 << (s * h))
    return len(law) == 1 << (s * h) and all(p == target for p in law.values())


def planted_rhs_uniform(inst: Instance, subset: Sequence[int], enumerate_max: int = 20) -> tuple[bool, str]:
    """Whether the planted right-hand sides of ``subset`` are exactly uniform.

    Small supports are settled by enumeration.  Otherwise rank-nullity
    decides: the map ``x -> (A x_e)_e`` hits each of its ``2**rank`` image
    points equally often, so the law is uniform iff the rank is ``s*h``.
    """
    s, h = len(subset), inst.generator.h
    touched = len(np.unique(inst.hypergraph.edges[list(subset)]))
    if touched <= enumerate_max:
        return rhs_law_is_uniform(planted_rhs_law(inst, subset, enumerate_max), s, h), "enumerate"
    return chunk_rank(inst, subset) == s * h, "rank"
