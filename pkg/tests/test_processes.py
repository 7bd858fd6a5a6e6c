from __future__ import annotations

from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from bdcsp.errors import IndexOutOfRange, StrategyOverBudget
from bdcsp.predicates import equ, nae, xor
from bdcsp.processes import (
    AlwaysAccept, CustomReplay, CycleHunt, GameParams, LazyProcess, ParityPropagation, RandomQuerier,
    budget_from_expr, canonical_history, exact_history_law, play_once, pooled_chi_square, run_game,
    stub_partitions, wilson_interval,
)
from bdcsp.rng import Source, enumerate_outcomes


def test_first_query_with_one_edge_is_forced():
    proc = LazyProcess(3, 1, 3, nae(3), "sat", Source(0))
    a = proc.query(1, 1)
    assert sorted(a.vertices) == [0, 1, 2]
    assert a.vertices[a.position] == 1
    with pytest.raises(IndexOutOfRange):
        proc.query(0, 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(["sat", "far", "noisy"]), st.sampled_from([(3, "3-NAE"), (3, "3-EQU"), (2, "2-XOR")]))
def test_process_invariants(seed, mode, kp):
    from bdcsp.predicates import by_name
    k, name = kp
    P = by_name(name)
    n, d = 6 * k, 3
    proc = LazyProcess(n, d, k, P, mode, Source(seed), epsilon=0.2)
    rng = np.random.default_rng(seed)
    answers = {}
    for _ in range(25):
        v, i = int(rng.integers(n)), int(rng.integers(1, d + 1))
        a = proc.query(v, i)
        if (v, i) in answers:
            assert answers[(v, i)] == a
        answers[(v, i)] = a
        assert a.vertices[a.position] == v
        assert proc.remaining_total() == d * n - k * proc.revealed_edges
        assert all(proc.remaining_degree(u) >= 0 for u in range(n))
        if mode == "sat":
            for e in proc.revealed():
                x = sum(proc.planted_bit(u) << j for j, u in enumerate(e.vertices))
                assert P.accepts(x ^ e.literal)
    inst = proc.finalize()
    assert (inst.hypergraph.degrees() == d).all()
    if mode == "sat":
        assert inst.is_satisfied_by(inst.planted)
    for (v, i), a in answers.items():
        row = inst.hypergraph.edges[a.edge_id].tolist()
        assert tuple(row) == a.vertices
        assert int(inst.literals[a.edge_id]) == a.literal
    if mode == "noisy":
        kept = inst.restrict(np.flatnonzero(~inst.noise))
        assert kept.is_satisfied_by(inst.planted)


def _hypergraph_key(inst):
    return tuple(sorted(tuple(sorted(e)) for e in inst.hypergraph.edges.tolist()))


def test_finalize_without_queries_matches_configuration_model():
    n, d, k = 3, 2, 3

    def run(src):
        return _hypergraph_key(LazyProcess(n, d, k, equ(3), "sat", src).finalize())

    law = enumerate_outcomes(run)
    exact = Counter()
    parts = stub_partitions(n * d, k)
    for p in parts:
        exact[tuple(sorted(tuple(sorted(s // d for s in e)) for e in p))] += 1
    assert law == {key: Fraction(c, len(parts)) for key, c in exact.items()}


def test_finalize_after_queries_is_consistent_with_conditioning():
    # conditioned on the first answer, the remaining edge set is a uniform
    # completion: check via exact enumeration on the tiny case n=3, d=2
    def run(src):
        proc = LazyProcess(3, 2, 3, equ(3), "far", src)
        first = proc.query(0, 1)
        return tuple(sorted(first.vertices)), _hypergraph_key(proc.finalize())

    law = enumerate_outcomes(run)
    assert sum(law.values()) == 1
    for (first, key), p in law.items():
        assert first in key


def test_far_literals_are_flat():
    counts = Counter()
    for s in range(400):
        proc = LazyProcess(30, 3, 3, nae(3), "far", Source(s))
        v = 0
        for i in range(1, 4):
            a = proc.query(v, i)
            counts[a.literal] += 1
            v = a.vertices[(a.position + 1) % 3]
    obs = np.array([counts[b] for b in range(8)])
    assert chisquare(obs).pvalue > 1e-3


def test_exact_history_law_small_case():
    def one(ask):
        ask(0, 1)

    a = exact_history_law(3, 1, 3, equ(3), "sat", one, "process")
    b = exact_history_law(3, 1, 3, equ(3), "sat", one, "sampler")
    assert a == b
    assert sum(a.values()) == 1


def test_stub_partitions_count():
    # 9 stubs into 3-sets: 9! / (3!^3 3!) = 280
    assert len(stub_partitions(9, 3)) == 280
    assert len(stub_partitions(6, 2)) == 15


def test_canonical_history_relabels_constraints():
    proc = LazyProcess(6, 2, 3, nae(3), "far", Source(1))
    a = proc.query(0, 1)
    proc.query(a.vertices[(a.position + 1) % 3], 1)
    h = canonical_history(proc)
    assert h[0][2] == 0


def test_always_accept_has_zero_advantage():
    res = run_game(AlwaysAccept(), 10, 60, 3, 3, nae(3), trials=20, seed=0)
    assert res.advantage == 0
    assert res.accepts == (20, 20)


def test_budget_is_enforced():
    greedy = CustomReplay([(0, 1)] * 5)
    params = GameParams(30, 3, 3, nae(3), budget=3)
    with pytest.raises(StrategyOverBudget):
        play_once(greedy, params, "sat", 0)


def test_parity_propagation_never_rejects_satisfiable():
    res = run_game(ParityPropagation(), 200, 300, 3, 3, equ(3), trials=30, seed=1)
    assert res.accepts[0] == 30
    assert all(q <= 200 for q in res.queries[0])


def test_parity_propagation_detects_far_equ():
    res = run_game(ParityPropagation(), 600, 300, 3, 3, equ(3), trials=30, seed=2)
    assert res.accepts[1] < 15


def test_cycle_hunt_is_sound_on_tree_histories():
    res = run_game(CycleHunt(), 30, 3000, 3, 3, nae(3), trials=20, seed=3)
    assert res.accepts[0] == 20


def test_random_querier_spends_exact_budget():
    res = run_game(RandomQuerier(), 17, 300, 3, 3, nae(3), trials=5, seed=4)
    assert res.queries[0] == [17] * 5


def test_wilson_interval_contains_estimate():
    lo, hi = wilson_interval(30, 100)
    assert lo < 0.3 < hi
    assert wilson_interval(0, 50)[0] == 0.0
    assert wilson_interval(50, 50)[1] == pytest.approx(1.0)


def test_budget_expression():
    assert budget_from_expr("3*sqrt(n)", 10_000) == 300
    assert budget_from_expr("n**0.4", 10**6) == 251


def test_pooled_chi_square_flags_different_laws():
    a = {i: 1000 for i in range(5)}
    b = {i: 1000 + (300 if i == 0 else 0) for i in range(5)}
    assert pooled_chi_square(a, a)[1] == pytest.approx(1.0)
    assert pooled_chi_square(a, b)[1] < 1e-3


def test_workers_do_not_change_results():
    r1 = run_game(ParityPropagation(), 100, 300, 3, 3, equ(3), trials=6, seed=9)
    r2 = run_game(ParityPropagation(), 100, 300, 3, 3, equ(3), trials=6, seed=9, workers=2)
    assert r1.accepts == r2.accepts and r1.queries == r2.queries


def test_result_json_fields():
    res = run_game(AlwaysAccept(), 0, 30, 3, 3, xor(3), trials=4, seed=0)
    js = res.to_json()
    assert js["ci_method"].startswith("newcombe")
    assert 0 <= js["advantage_ci"][0] <= js["advantage_ci"][1] <= 1
