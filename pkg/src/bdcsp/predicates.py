"""Boolean predicates of small arity.

Input vectors are encoded as ints: bit ``i`` holds the value at position
``i`` of the constraint tuple.  A predicate is its acceptance bitmask over
the ``2**k`` encoded inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import gf2
from .errors import ArityMismatch, AsymmetricWeights, EmptyAcceptance

MAX_ARITY = 16


def weight(x: int) -> int:
    return gf2.popcount(x)


def encode(bits: Sequence[int]) -> int:
    return sum((int(b) & 1) << i for i, b in enumerate(bits))


def decode(x: int, k: int) -> tuple[int, ...]:
    return tuple((x >> i) & 1 for i in range(k))


@dataclass(frozen=True)
class Predicate:
    k: int
    bits: int
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if not 1 <= self.k <= MAX_ARITY:
            raise ValueError(f"arity {self.k} outside [1, {MAX_ARITY}]")
        if self.bits >> (1 << self.k):
            raise ValueError("table has more than 2**k entries")
        if self.bits == 0:
            raise EmptyAcceptance("predicate accepts nothing")

    @property
    def size(self) -> int:
        return 1 << self.k

    def accepts(self, x: int | Sequence[int]) -> bool:
        if not isinstance(x, (int, np.integer)):
            x = encode(x)
        return bool((self.bits >> int(x)) & 1)

    @cached_property
    def table(self) -> np.ndarray:
        t = np.array([(self.bits >> x) & 1 for x in range(self.size)], dtype=np.int8)
        t.flags.writeable = False
        return t

    @cached_property
    def accepting(self) -> tuple[int, ...]:
        return tuple(x for x in range(self.size) if (self.bits >> x) & 1)

    @cached_property
    def rejecting(self) -> tuple[int, ...]:
        return tuple(x for x in range(self.size) if not (self.bits >> x) & 1)

    @property
    def n_accepting(self) -> int:
        return len(self.accepting)

    def is_symmetric(self) -> bool:
        full = self.size - 1
        for x in range(self.size):
            if self.accepts(x) != self.accepts(x ^ full):
                return False
        by_weight: dict[int, bool] = {}
        for x in range(self.size):
            if by_weight.setdefault(weight(x), self.accepts(x)) != self.accepts(x):
                return False
        return True

    def is_equ(self) -> bool:
        return self.accepting == (0, self.size - 1)

    def forced_parities(self) -> dict[tuple[int, int], int]:
        """Pairs ``(i, j)`` whose XOR is the same on every accepted input."""
        out = {}
        for i in range(self.k):
            for j in range(i + 1, self.k):
                vals = {((x >> i) ^ (x >> j)) & 1 for x in self.accepting}
                if len(vals) == 1:
                    out[(i, j)] = vals.pop()
        return out

    def to_json(self) -> dict:
        return {"k": self.k, "table_hex": format(self.bits, "x"), "name": self.name}


@dataclass(frozen=True)
class SymmetricPredicate(Predicate):
    weights: frozenset = frozenset()

    def is_equ(self) -> bool:
        return self.weights == frozenset({0, self.k})

    def to_json(self) -> dict:
        return {"k": self.k, "accepted_weights": sorted(self.weights), "name": self.name}


def make_symmetric(k: int, weights: Iterable[int], name: str = "") -> SymmetricPredicate:
    if k < 2:
        raise ValueError("arity must be at least 2")
    ws = frozenset(int(w) for w in weights)
    if not ws:
        raise EmptyAcceptance("empty weight set")
    if any(not 0 <= w <= k for w in ws):
        raise ValueError(f"weights must lie in [0, {k}]")
    bad = sorted(w for w in ws if k - w not in ws)
    if bad:
        raise AsymmetricWeights(f"weights {bad} present without their complements")
    bits = 0
    for x in range(1 << k):
        if weight(x) in ws:
            bits |= 1 << x
    return SymmetricPredicate(k=k, bits=bits, name=name or f"W{sorted(ws)}", weights=ws)


def from_table(k: int, table: Sequence[int], name: str = "") -> Predicate:
    if len(table) != 1 << k:
        raise ValueError(f"table length {len(table)} != 2**{k}")
    bits = sum(1 << x for x, t in enumerate(table) if t)
    return Predicate(k=k, bits=bits, name=name)


def from_json(d: dict) -> Predicate:
    if "accepted_weights" in d:
        return make_symmetric(d["k"], d["accepted_weights"], d.get("name", ""))
    return Predicate(k=d["k"], bits=int(d["table_hex"], 16), name=d.get("name", ""))


def equ(k: int) -> SymmetricPredicate:
    return make_symmetric(k, {0, k}, name=f"{k}-EQU")


def nae(k: int) -> SymmetricPredicate:
    return make_symmetric(k, set(range(1, k)), name=f"{k}-NAE")


def xor(k: int) -> Predicate:
    """k-XOR: accept iff the parity of the inputs is 1."""
    odd = {w for w in range(k + 1) if w % 2 == 1}
    if k % 2 == 0:
        return make_symmetric(k, odd, name=f"{k}-XOR")
    bits = sum(1 << x for x in range(1 << k) if weight(x) % 2 == 1)
    return Predicate(k=k, bits=bits, name=f"{k}-XOR")


def accept_all(k: int) -> SymmetricPredicate:
    return make_symmetric(k, range(k + 1), name=f"{k}-TRUE")


def by_name(name: str) -> Predicate:
    """Parse names like ``3-NAE``, ``4-EQU``, ``2-XOR`` or ``5-W2,3``."""
    k_str, _, kind = name.partition("-")
    k = int(k_str)
    kind = kind.upper()
    if kind == "EQU":
        return equ(k)
    if kind == "NAE":
        return nae(k)
    if kind == "XOR":
        return xor(k)
    if kind == "TRUE":
        return accept_all(k)
    if kind.startswith("W"):
        return make_symmetric(k, [int(w) for w in kind[1:].split(",")], name=name)
    raise ValueError(f"unknown predicate name {name!r}")


def is_superset_of(Q: Predicate, P: Predicate) -> bool:
    """True iff every input accepted by ``P`` is accepted by ``Q``."""
    if Q.k != P.k:
        raise ArityMismatch(f"arities differ: {Q.k} vs {P.k}")
    return P.bits & ~Q.bits == 0


# --- Hamming-code predicates -------------------------------------------------


@dataclass(frozen=True)
class GeneratorMatrix:
    """``h x k`` matrix over GF(2); row ``t`` is an int with bit ``j`` = entry (t, j)."""

    k: int
    rows: tuple[int, ...]

    @property
    def h(self) -> int:
        return len(self.rows)

    def syndrome(self, x: int) -> int:
        return sum((gf2.popcount(r & x) & 1) << t for t, r in enumerate(self.rows))

    @cached_property
    def syndrome_table(self) -> np.ndarray:
        t = np.array([self.syndrome(x) for x in range(1 << self.k)], dtype=np.int64)
        t.flags.writeable = False
        return t

    def rank(self) -> int:
        return gf2.rank(self.rows)

    def min_distance(self) -> int:
        return gf2.min_weight(list(self.rows))

    def predicate(self) -> Predicate:
        bits = sum(1 << x for x in range(1 << self.k) if self.syndrome(x) == 0)
        return Predicate(k=self.k, bits=bits, name=f"P_A[{self.h}x{self.k}]")

    def to_json(self) -> dict:
        return {"k": self.k, "rows_hex": [format(r, "x") for r in self.rows]}

    @classmethod
    def from_json(cls, d: dict) -> "GeneratorMatrix":
        return cls(k=d["k"], rows=tuple(int(r, 16) for r in d["rows_hex"]))


def hamming_redundancy(k: int) -> int:
    """The ``r`` with ``2**(r-1) - 1 < k <= 2**r - 1``."""
    r = 1
    while (1 << r) - 1 < k:
        r += 1
    return r


def hamming_generator(k: int) -> GeneratorMatrix:
    """Basis of the length-``k`` shortened Hamming code (distance >= 3).

    The code is the kernel of the ``r x k`` parity-check matrix whose
    column ``j`` is the binary expansion of ``j + 1``; keeping only the first
    ``k`` columns of the full ``2**r - 1`` code is exactly shortening.
    """
    if k < 3:
        raise ValueError("need k >= 3")
    r = hamming_redundancy(k)
    checks = [sum((((j + 1) >> t) & 1) << j for j in range(k)) for t in range(r)]
    rows = tuple(gf2.kernel_basis(checks, k))
    assert len(rows) == k - r
    return GeneratorMatrix(k=k, rows=rows)


# --- the edge contraction constant ------------------------------------------


@dataclass(frozen=True)
class RhoResult:
    value: float
    argmax: tuple[float, ...] | None
    origin_limit: float
    grid_step: float
    points: int
    singular_skipped: int
    min_normalizer: float


def _edge_signs(P: Predicate) -> tuple[np.ndarray, np.ndarray]:
    acc = np.array(P.accepting, dtype=np.int64)
    bits = (acc[:, None] >> np.arange(P.k)) & 1
    signs = 1 - 2 * bits
    return signs[:, :-1].astype(float), signs[:, -1].astype(float)


def merge_edge_ratio(P: Predicate, deltas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Outgoing/incoming tv ratio across one constraint, for each bias row.

    ``deltas`` has shape ``(G, k-1)``: row ``g`` gives the biases
    ``Pr[x_i = 0] - 1/2`` arriving at the first ``k-1`` positions.  Returns
    ``(ratio, normalizer)``; ratio is NaN where the normalizer vanishes or
    all biases are zero.
    """
    deltas = np.atleast_2d(np.asarray(deltas, dtype=float))
    sg, last = _edge_signs(P)
    w = np.prod(0.5 + deltas[:, None, :] * sg[None, :, :], axis=2)
    z = w.sum(axis=1)
    num = np.abs(w @ last)
    den = 2.0 * np.abs(deltas).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where((z > 1e-300) & (den > 0), num / np.where(z > 0, z, 1.0) / np.where(den > 0, den, 1.0), np.nan)
    return ratio, z


def origin_limit(P: Predicate) -> float:
    """Supremum over directions of the ratio's limit at zero bias.

    Along direction ``u`` the limit is ``|sum_i c_i u_i| / sum_i |u_i|`` where
    ``c_i`` is the mean of ``(-1)**(x_i + x_k)`` over accepted inputs; its sup
    is ``max_i |c_i|``.  Valid when the acceptance set is complement-closed.
    """
    sg, last = _edge_signs(P)
    c = (sg * last[:, None]).mean(axis=0)
    return float(np.max(np.abs(c))) if c.size else 0.0


def rho_search(P: Predicate, grid_step: float = 0.05, chunk: int = 1 << 15) -> RhoResult:
    if not 0 < grid_step <= 0.1:
        raise ValueError("grid_step must lie in (0, 0.1]")
    lim = origin_limit(P)
    if P.is_equ():
        return RhoResult(1.0, None, lim, grid_step, 0, 0, float("nan"))
    intervals = max(1, round(1.0 / grid_step))
    axis = np.linspace(-0.5, 0.5, intervals + 1)
    dim = P.k - 1
    total = len(axis) ** dim
    best, arg, skipped, zmin = lim, None, 0, np.inf
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk))
        coords = np.empty((idx.size, dim))
        rem = idx.copy()
        for d in range(dim):
            coords[:, d] = axis[rem % len(axis)]
            rem //= len(axis)
        ratio, z = merge_edge_ratio(P, coords)
        nonzero = np.abs(coords).sum(axis=1) > 0
        singular = nonzero & np.isnan(ratio)
        skipped += int(singular.sum())
        ok = ~np.isnan(ratio)
        if ok.any():
            zmin = min(zmin, float(z[ok].min()))
            j = int(np.nanargmax(ratio))
            if ratio[j] > best:
                best, arg = float(ratio[j]), tuple(float(c) for c in coords[j])
    return RhoResult(min(best, 1.0), arg, lim, grid_step, total, skipped, float(zmin))


def rho(P: Predicate, grid_step: float = 0.05) -> float:
    """Grid maximum of the per-edge tv contraction ratio (1.0 for EQU)."""
    return rho_search(P, grid_step).value
