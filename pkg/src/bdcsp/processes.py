"""Lazy processes that build a random instance while answering queries, and
the distinguishing game played against a pair of them."""

from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np
from scipy import stats

from .errors import IndexOutOfRange, StrategyOverBudget
from .hypergraph import Hypergraph
from .instances import Instance
from .oracle import Answer, QueryLog
from .parity import ParityUnionFind
from .predicates import Predicate
from .rng import Source, derive_seed

MODES = ("sat", "far", "noisy")


class _FreeStubs:
    """Set of unused stubs ``0..total-1`` with O(1) uniform draw and removal.

    Stored as a virtual array that starts as the identity; only displaced
    entries are kept in dictionaries, so construction is O(1).
    """

    def __init__(self, total: int):
        self.size = total
        self._at: dict[int, int] = {}
        self._pos: dict[int, int] = {}

    def _get(self, i: int) -> int:
        return self._at.get(i, i)

    def __contains__(self, s: int) -> bool:
        p = self._pos.get(s, s)
        return 0 <= p < self.size and self._get(p) == s

    def remove(self, s: int):
        p = self._pos.get(s, s)
        last = self.size - 1
        moved = self._get(last)
        self._at[p] = moved
        self._pos[moved] = p
        self._pos[s] = -1
        self.size -= 1

    def draw(self, src: Source) -> int:
        s = self._get(src.randbelow(self.size))
        self.remove(s)
        return s

    def items(self) -> list[int]:
        return [self._get(i) for i in range(self.size)]


class LazyProcess(QueryLog):
    """Answers oracle queries while sampling the instance on demand.

    A query on an unused stub of ``v`` opens a new constraint: the other
    ``k-1`` stubs are drawn one by one uniformly from the unused stubs (so a
    vertex is picked with probability proportional to its remaining degree),
    the queried stub takes a uniform position in the tuple, and the literal
    vector is drawn according to ``mode``:

    * ``sat``: planted bits are revealed lazily and ``b_e`` is uniform among
      vectors making the constraint true;
    * ``far``: ``b_e`` is uniform on ``{0,1}^k``;
    * ``noisy``: like ``sat`` but with probability ``epsilon`` ``b_e`` is
      uniform among vectors making the constraint false.
    """

    def __init__(self, n: int, d: int, k: int, P: Predicate, mode: str, source: Source,
                 epsilon: float = 0.0):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if (n * d) % k:
            raise ValueError("d*n must be divisible by k")
        if P.k != k:
            raise ValueError("predicate arity differs from k")
        self.n, self.d, self.k, self.P = n, d, k, P
        self.declared_d = d
        self.mode, self.epsilon = mode, epsilon
        self.src = source
        self._free = _FreeStubs(n * d)
        self._stub_edge: dict[int, tuple[int, int]] = {}
        self._edge_stubs: list[tuple[int, ...]] = []
        self._edge_lits: list[int] = []
        self._noise: list[bool] = []
        self._x: dict[int, int] = {}
        self._used: dict[int, int] = {}
        self._acc = P.accepting
        self._rej = P.rejecting
        self._init_log()

    # -- bookkeeping --

    def remaining_degree(self, u: int) -> int:
        return self.d - self._used.get(u, 0)

    def remaining_total(self) -> int:
        return self._free.size

    @property
    def revealed_edges(self) -> int:
        return len(self._edge_stubs)

    def planted_bit(self, u: int) -> int | None:
        return self._x.get(u)

    def _bit(self, u: int) -> int:
        if u not in self._x:
            self._x[u] = self.src.randbelow(2)
        return self._x[u]

    def _literal(self, verts: Sequence[int]) -> tuple[int, bool]:
        if self.mode == "far":
            return self.src.randbelow(1 << self.k), False
        pattern = sum(self._bit(u) << j for j, u in enumerate(verts))
        noisy = self.mode == "noisy" and self.src.random() < self.epsilon
        pool = self._rej if noisy else self._acc
        return pattern ^ pool[self.src.randbelow(len(pool))], noisy

    def _open_edge(self, stubs: list[int]) -> int:
        e = len(self._edge_stubs)
        for j, s in enumerate(stubs):
            self._stub_edge[s] = (e, j)
            u = s // self.d
            self._used[u] = self._used.get(u, 0) + 1
        verts = [s // self.d for s in stubs]
        lit, noisy = self._literal(verts)
        self._edge_stubs.append(tuple(stubs))
        self._edge_lits.append(lit)
        self._noise.append(noisy)
        return e

    def _answer(self, e: int, pos: int) -> Answer:
        verts = tuple(s // self.d for s in self._edge_stubs[e])
        return Answer(e, verts, self._edge_lits[e], pos)

    # -- queries --

    def query(self, v: int, i: int) -> Answer:
        self._check(v, i)
        s = v * self.d + (i - 1)
        if s in self._stub_edge:
            return self._record(v, i, self._answer(*self._stub_edge[s]))
        self._free.remove(s)
        others = [self._free.draw(self.src) for _ in range(self.k - 1)]
        pos = self.src.randbelow(self.k)
        stubs = others[:pos] + [s] + others[pos:]
        e = self._open_edge(stubs)
        return self._record(v, i, self._answer(e, pos))

    def finalize(self) -> Instance:
        """Complete the pairing uniformly among unused stubs and fill in the rest."""
        rest = self._free.items()
        if len(rest) <= 64:
            for j in range(len(rest) - 1, 0, -1):
                t = self.src.randbelow(j + 1)
                rest[j], rest[t] = rest[t], rest[j]
        else:
            rest = np.random.default_rng(self.src.seed_for_numpy()).permutation(rest).tolist()
        for s in rest:
            self._free.remove(s)
        for a in range(0, len(rest), self.k):
            self._open_edge(rest[a:a + self.k])
        stubs = np.array(self._edge_stubs, dtype=np.int64).reshape(-1, self.k)
        H = Hypergraph(self.n, self.k, stubs // self.d, stubs % self.d)
        planted = None
        if self.mode != "far":
            planted = np.array([self._bit(u) for u in range(self.n)], dtype=np.int8)
        noise = np.array(self._noise, dtype=bool) if self.mode == "noisy" else None
        return Instance(self.P, H, np.array(self._edge_lits, dtype=np.int64), self.d, planted, noise)


def canonical_history(log: QueryLog) -> tuple:
    """History with constraint labels replaced by order of first appearance."""
    relabel: dict[int, int] = {}
    out = []
    for r in log.history:
        a = r.answer
        if a is None:
            out.append((r.v, r.i, None))
            continue
        cid = relabel.setdefault(a.edge_id, len(relabel))
        out.append((r.v, r.i, cid, a.vertices, a.literal, a.position))
    return tuple(out)


# --- strategies -----------------------------------------------------------------


Ask = Callable[[int, int], "Answer | None"]


@dataclass(frozen=True)
class GameParams:
    n: int
    d: int
    k: int
    P: Predicate
    budget: int


class Strategy(Protocol):
    name: str

    def play(self, ask: Ask, params: GameParams, rng: np.random.Generator) -> bool:
        """Issue queries through ``ask``; return True to accept."""


class AlwaysAccept:
    name = "always-accept"

    def play(self, ask, params, rng):
        return True


def bfs_explore(ask: Ask, params: GameParams, rng: np.random.Generator):
    """Yield answers of a breadth-first exploration until the budget is spent.

    Every slot of each reached variable is queried; a fresh uniform start
    is drawn whenever the frontier empties.
    """
    used = 0
    seen: set[int] = set()
    frontier: deque[int] = deque()
    while used < params.budget:
        if not frontier:
            v = int(rng.integers(params.n))
            if v in seen:
                continue
            seen.add(v)
            frontier.append(v)
        v = frontier.popleft()
        for i in range(1, params.d + 1):
            if used >= params.budget:
                return
            ans = ask(v, i)
            used += 1
            if ans is None:
                continue
            yield ans
            for u in ans.vertices:
                if u not in seen:
                    seen.add(u)
                    frontier.append(u)


class ParityPropagation:
    """Reject when the parities forced by revealed constraints contradict.

    Only position pairs whose XOR is fixed across all accepted inputs carry
    information; for predicates without such pairs this never rejects.
    """

    name = "parity-prop"

    def play(self, ask, params, rng):
        forced = params.P.forced_parities()
        if not forced:
            for _ in bfs_explore(ask, params, rng):
                pass
            return True
        uf = ParityUnionFind()
        seen_edges: set[int] = set()
        for ans in bfs_explore(ask, params, rng):
            if ans.edge_id in seen_edges:
                continue
            seen_edges.add(ans.edge_id)
            b = ans.literal
            for (i, j), c in forced.items():
                par = c ^ ((b >> i) & 1) ^ ((b >> j) & 1)
                if not uf.union(ans.vertices[i], ans.vertices[j], par):
                    return False
        return True


class CycleHunt:
    """Explore, then compare the likelihood of the revealed 2-core under both laws.

    Constraints hanging off the 2-core carry no evidence, so only the core
    is scored: with ``N`` satisfying core assignments, the planted/uniform
    likelihood ratio is ``N * (2**k / |acc|)**m_core / 2**n_core``.  Rejects
    when the ratio is below one.  Cores with more than ``max_core`` variables
    are skipped (accept).
    """

    name = "cycle-hunt"

    def __init__(self, max_core: int = 20):
        self.max_core = max_core

    def play(self, ask, params, rng):
        got: dict[int, Answer] = {}
        for ans in bfs_explore(ask, params, rng):
            got.setdefault(ans.edge_id, ans)
        if not got:
            return True
        core = _two_core_edges([a.vertices for a in got.values()])
        if not core:
            return True
        answers = [list(got.values())[e] for e in core]
        edges = np.array([a.vertices for a in answers], dtype=np.int64)
        verts, rel = np.unique(edges, return_inverse=True)
        if len(verts) > self.max_core:
            return True
        rel = rel.reshape(edges.shape)
        lits = np.array([a.literal for a in answers], dtype=np.int64)
        nv = len(verts)
        xs = np.arange(1 << nv, dtype=np.int64)
        X = (xs[:, None] >> np.arange(nv)) & 1
        pat = (X[:, rel] << np.arange(params.k)).sum(axis=-1)
        count = int(params.P.table[pat ^ lits].all(axis=1).sum())
        log_lr = (math.log(count) if count else -math.inf) + len(answers) * (
            params.k * math.log(2) - math.log(params.P.n_accepting)) - nv * math.log(2)
        return log_lr >= 0


def _two_core_edges(edge_list: Sequence[Sequence[int]]) -> list[int]:
    """Edges left after repeatedly peeling leaf edges (at most one shared vertex)."""
    alive = set(range(len(edge_list)))
    changed = True
    while changed:
        changed = False
        deg: dict[int, int] = {}
        for e in alive:
            for u in edge_list[e]:
                deg[u] = deg.get(u, 0) + 1
        for e in list(alive):
            # an edge is peelable when at most one of its incidences is shared
            shared = sum(1 for u in edge_list[e] if deg[u] > 1)
            if shared <= 1 and len(set(edge_list[e])) == len(edge_list[e]):
                alive.discard(e)
                changed = True
    return sorted(alive)


class RandomQuerier:
    """Uniform random ``(v, i)`` queries up to the budget; always accepts."""

    name = "random"

    def play(self, ask, params, rng):
        vs = rng.integers(params.n, size=params.budget)
        ii = rng.integers(1, params.d + 1, size=params.budget)
        for v, i in zip(vs.tolist(), ii.tolist()):
            ask(v, i)
        return True


class CustomReplay:
    """Replays a fixed query list, then applies ``decide`` to the answers."""

    name = "custom-replay"

    def __init__(self, queries: Sequence[tuple[int, int]], decide: Callable[[list], bool] | None = None):
        self.queries = list(queries)
        self.decide = decide

    def play(self, ask, params, rng):
        answers = [ask(v, i) for v, i in self.queries]
        return True if self.decide is None else bool(self.decide(answers))


STRATEGIES = {
    "always-accept": AlwaysAccept,
    "parity-prop": ParityPropagation,
    "cycle-hunt": CycleHunt,
    "random": RandomQuerier,
}


# --- the game ------------------------------------------------------------------------


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    ci = stats.binomtest(successes, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def newcombe_difference(a: int, n_a: int, b: int, n_b: int, confidence: float = 0.95) -> tuple[float, float]:
    """Interval for ``p_a - p_b`` combining two Wilson intervals (Newcombe's hybrid)."""
    pa, pb = a / n_a, b / n_b
    la, ua = wilson_interval(a, n_a, confidence)
    lb, ub = wilson_interval(b, n_b, confidence)
    diff = pa - pb
    lo = diff - math.sqrt((pa - la) ** 2 + (ub - pb) ** 2)
    hi = diff + math.sqrt((ua - pa) ** 2 + (pb - lb) ** 2)
    return lo, hi


@dataclass
class GameResult:
    strategy: str
    modes: tuple[str, str]
    trials: int
    budget: int
    accepts: tuple[int, int]
    queries: tuple[list[int], list[int]] = field(repr=False)
    ci_method: str = "newcombe-wilson-95"

    @property
    def accept_rates(self) -> tuple[float, float]:
        return self.accepts[0] / self.trials, self.accepts[1] / self.trials

    @property
    def advantage(self) -> float:
        a, b = self.accept_rates
        return abs(a - b)

    @property
    def difference_ci(self) -> tuple[float, float]:
        return newcombe_difference(self.accepts[0], self.trials, self.accepts[1], self.trials)

    @property
    def advantage_ci(self) -> tuple[float, float]:
        """Interval for ``|p_a - p_b|`` induced by the difference interval."""
        lo, hi = self.difference_ci
        if lo <= 0 <= hi:
            return 0.0, max(-lo, hi)
        return min(abs(lo), abs(hi)), max(abs(lo), abs(hi))

    def to_json(self) -> dict:
        lo, hi = self.advantage_ci
        return {"strategy": self.strategy, "modes": list(self.modes), "trials": self.trials,
                "budget": self.budget, "accepts": list(self.accepts),
                "accept_rates": list(self.accept_rates), "advantage": self.advantage,
                "advantage_ci": [lo, hi], "ci_method": self.ci_method,
                "mean_queries": [float(np.mean(q)) if q else 0.0 for q in self.queries]}


def play_once(strategy: Strategy, params: GameParams, mode: str, seed: int,
              epsilon: float = 0.0) -> tuple[bool, int]:
    proc = LazyProcess(params.n, params.d, params.k, params.P, mode, Source(seed), epsilon)

    def ask(v: int, i: int):
        if proc.query_count >= params.budget:
            raise StrategyOverBudget(f"{strategy.name} exceeded its budget of {params.budget}")
        return proc.query(v, i)

    rng = np.random.default_rng(derive_seed(seed, 1))
    verdict = strategy.play(ask, params, rng)
    return bool(verdict), proc.query_count


def _trial(args):
    strategy, params, mode, seed, epsilon = args
    return play_once(strategy, params, mode, seed, epsilon)


def run_game(strategy: Strategy, budget: int, n: int, d: int, k: int, P: Predicate,
             mode_pair: tuple[str, str] = ("sat", "far"), trials: int = 100, seed: int = 0,
             epsilon: float = 0.0, workers: int = 1) -> GameResult:
    """Play ``strategy`` against both processes ``trials`` times each.

    Trial ``t`` against mode index ``j`` uses the stream ``(seed, j, t)``, so
    results do not depend on ``workers``.
    """
    if budget < 0:
        raise ValueError("budget must be non-negative")
    params = GameParams(n, d, k, P, int(budget))
    jobs = [(strategy, params, mode, derive_seed(seed, j, t), epsilon)
            for j, mode in enumerate(mode_pair) for t in range(trials)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            out = list(ex.map(_trial, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        out = [_trial(j) for j in jobs]
    acc = (sum(v for v, _ in out[:trials]), sum(v for v, _ in out[trials:]))
    qs = ([q for _, q in out[:trials]], [q for _, q in out[trials:]])
    return GameResult(strategy.name, tuple(mode_pair), trials, int(budget), acc, qs)


def budget_from_expr(expr: str, n: int, c: float = 1.0) -> int:
    """Evaluate a budget expression in ``n`` such as ``3*sqrt(n)*log(n)``."""
    env = {"n": n, "sqrt": math.sqrt, "log": math.log, "log2": math.log2, "c": c}
    return int(math.floor(eval(expr, {"__builtins__": {}}, env)))


# --- exact laws at enumerable sizes ----------------------------------------------


def stub_partitions(total: int, k: int) -> list[tuple[tuple[int, ...], ...]]:
    """All partitions of stubs ``0..total-1`` into unordered k-sets."""
    from itertools import combinations

    out = []

    def rec(rest: tuple[int, ...], acc: list):
        if not rest:
            out.append(tuple(acc))
            return
        head, tail = rest[0], rest[1:]
        for others in combinations(tail, k - 1):
            left = tuple(s for s in tail if s not in others)
            rec(left, acc + [(head, *others)])

    rec(tuple(range(total)), [])
    return out


class _PartitionOracle(QueryLog):
    """Oracle over a fixed stub partition; unobserved randomness drawn on demand.

    Given the partition, a uniformly shuffled-and-chunked stub sequence
    orders each block uniformly and independently, and planted bits and
    literals of unrevealed constraints are never looked at, so drawing them
    at first reveal leaves the law of the history unchanged.
    """

    def __init__(self, n, d, k, P, mode, blocks, src: Source):
        self.n, self.d, self.k, self.P, self.mode = n, d, k, P, mode
        self.declared_d = d
        self.src = src
        self._block_of = {s: b for b, blk in enumerate(blocks) for s in blk}
        self._blocks = blocks
        self._opened: dict[int, tuple[tuple[int, ...], int]] = {}
        self._x: dict[int, int] = {}
        self._init_log()

    def query(self, v: int, i: int) -> Answer:
        from itertools import permutations

        self._check(v, i)
        s = v * self.d + (i - 1)
        b = self._block_of[s]
        if b not in self._opened:
            orders = list(permutations(self._blocks[b]))
            order = orders[self.src.randbelow(len(orders))]
            verts = tuple(t // self.d for t in order)
            if self.mode == "far":
                lit = self.src.randbelow(1 << self.k)
            else:
                for u in verts:
                    if u not in self._x:
                        self._x[u] = self.src.randbelow(2)
                pattern = sum(self._x[u] << j for j, u in enumerate(verts))
                acc = self.P.accepting
                lit = pattern ^ acc[self.src.randbelow(len(acc))]
            self._opened[b] = (order, lit)
        order, lit = self._opened[b]
        ans = Answer(b, tuple(t // self.d for t in order), lit, order.index(s))
        return self._record(v, i, ans)


def exact_history_law(n: int, d: int, k: int, P: Predicate, mode: str,
                      strategy: Callable[[Ask], object], side: str = "process",
                      max_paths: int = 5_000_000) -> dict:
    """Exact distribution of the canonical history of ``strategy``.

    ``side="process"`` runs the lazy process; ``side="sampler"`` draws a
    uniform stub partition and answers from it.  ``strategy`` must be a
    deterministic function of the answers it receives.
    """
    from .rng import enumerate_outcomes

    if mode not in ("sat", "far"):
        raise ValueError("exact laws cover the sat and far modes")
    if side == "process":
        def run(src):
            proc = LazyProcess(n, d, k, P, mode, src)
            strategy(proc.query)
            return canonical_history(proc)
    elif side == "sampler":
        parts = stub_partitions(n * d, k)

        def run(src):
            orc = _PartitionOracle(n, d, k, P, mode, parts[src.randbelow(len(parts))], src)
            strategy(orc.query)
            return canonical_history(orc)
    else:
        raise ValueError(f"unknown side {side!r}")
    return enumerate_outcomes(run, max_paths)


def history_after(strategy: Strategy, n: int, d: int, k: int, P: Predicate, budget: int, seed: int,
                  mode: str = "sat"):
    """Structure of the revealed sub-hypergraph after one play of ``strategy`` against a lazy process."""
    proc = LazyProcess(n, d, k, P, mode, Source(seed))
    params = GameParams(n, d, k, P, int(budget))

    def ask(v: int, i: int):
        if proc.query_count >= params.budget:
            raise StrategyOverBudget(f"{strategy.name} exceeded its budget of {params.budget}")
        return proc.query(v, i)

    strategy.play(ask, params, np.random.default_rng(derive_seed(seed, 1)))
    return proc.history_stats()


def sampled_history_counts(n: int, d: int, k: int, P: Predicate, mode: str,
                           strategy: Callable[[Ask], object], side: str, trials: int, seed: int) -> dict:
    """Empirical counts of canonical histories over ``trials`` independent runs.

    ``side="process"`` plays against the lazy process; ``side="sampler"``
    draws a full instance (configuration model plus literals) and plays
    against an oracle on it.
    """
    from collections import Counter

    from .instances import sample_planted, sample_uniform
    from .hypergraph import sample_config_model
    from .oracle import OracleSession

    counts: Counter = Counter()
    for t in range(trials):
        s = derive_seed(seed, t)
        if side == "process":
            log = LazyProcess(n, d, k, P, mode, Source(s))
        elif side == "sampler":
            H = sample_config_model(n, d, k, s)
            draw = sample_planted if mode == "sat" else sample_uniform
            log = OracleSession(draw(H, P, derive_seed(s, 1), declared_d=d))
        else:
            raise ValueError(f"unknown side {side!r}")
        strategy(log.query)
        counts[canonical_history(log)] += 1
    return dict(counts)


def pooled_chi_square(a: dict, b: dict, min_expected: float = 5.0) -> tuple[float, float, int]:
    """Two-sample chi-square homogeneity test on count dictionaries.

    Cells whose expected count falls below ``min_expected`` on either side
    are merged into one pooled cell.  Returns ``(statistic, p_value, cells)``.
    """
    from scipy.stats import chi2_contingency

    na, nb = sum(a.values()), sum(b.values())
    keys = set(a) | set(b)
    big, pool_a, pool_b = [], 0, 0
    for key in sorted(keys, key=repr):
        ca, cb = a.get(key, 0), b.get(key, 0)
        tot = ca + cb
        if min(tot * na, tot * nb) / (na + nb) < min_expected:
            pool_a += ca
            pool_b += cb
        else:
            big.append((ca, cb))
    if pool_a + pool_b:
        big.append((pool_a, pool_b))
    if len(big) < 2:
        return 0.0, 1.0, len(big)
    stat, p, _, _ = chi2_contingency(np.array(big).T, correction=False)
    return float(stat), float(p), len(big)
