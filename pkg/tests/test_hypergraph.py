from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bdcsp.errors import BudgetExceeded, IndivisibleStubs
from bdcsp.hypergraph import (
    Hypergraph, affine_plane_hypergraph, audit_expander, disjoint_union, hypercycle,
    hypertree_shapes, incidence_girth, random_hypertree, sample_config_model, sample_expander,
    structure, structure_of_edges,
)


def test_config_model_small_examples():
    H = sample_config_model(6, 2, 3, seed=1)
    assert H.m == 4
    assert (H.degrees() == 2).all()
    with pytest.raises(IndivisibleStubs):
        sample_config_model(5, 2, 3, seed=0)
    H = sample_config_model(3, 1, 3, seed=7)
    assert H.m == 1
    assert sorted(H.edges[0].tolist()) == [0, 1, 2]


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 40), st.integers(1, 6), st.integers(2, 5), st.integers(0, 2**31))
def test_config_model_is_regular(n, d, k, seed):
    if (n * d) % k:
        with pytest.raises(IndivisibleStubs):
            sample_config_model(n, d, k, seed)
        return
    H = sample_config_model(n, d, k, seed)
    assert H.m == n * d // k
    assert (H.degrees() == d).all()
    assert H.degrees().sum() == k * H.m


def test_config_model_pairing_law_is_uniform():
    # n=4, d=3, k=2: 12 stub labels, 11!! = 10395 perfect matchings of stubs.
    # Contracted multigraph counts are compared against the exact count of
    # matchings mapping to each multigraph.
    from collections import Counter

    def key(H):
        return tuple(sorted(tuple(sorted(e)) for e in H.edges.tolist()))

    exact = Counter()
    stubs = list(range(12))

    def rec(rest, acc):
        if not rest:
            exact[tuple(sorted(tuple(sorted((a // 3, b // 3))) for a, b in acc))] += 1
            return
        a = rest[0]
        for j in range(1, len(rest)):
            rec(rest[1:j] + rest[j + 1:], acc + [(a, rest[j])])

    rec(stubs, [])
    total = sum(exact.values())
    assert total == 10395
    rng = np.random.default_rng(3)
    trials = 40_000
    seen = Counter(key(sample_config_model(4, 3, 2, rng)) for _ in range(trials))
    from scipy.stats import chisquare
    keys = sorted(exact)
    obs = np.array([seen[k] for k in keys], float)
    exp = np.array([exact[k] / total * trials for k in keys])
    assert set(seen) <= set(exact)
    assert chisquare(obs, exp).pvalue > 1e-3


def test_simple_flag_rejects_repeats():
    for s in range(20):
        H = sample_config_model(24, 5, 3, seed=s, simple=True)
        assert H.is_simple()


def test_structure_examples():
    rep = structure(random_hypertree(4, 3, np.random.default_rng(0)))
    assert rep.cyclomatic == 0 and rep.components == 1 and rep.is_hyperforest
    cyc = structure(hypercycle(3, 3))
    assert (cyc.n, cyc.cyclomatic, cyc.girth) == (6, 1, 3)
    two = disjoint_union(random_hypertree(3, 3, np.random.default_rng(1)),
                         random_hypertree(2, 3, np.random.default_rng(2)))
    rep = structure(two)
    assert rep.cyclomatic == 0 and rep.components == 2 and rep.girth == math.inf


@pytest.mark.parametrize("p,k", [(2, 3), (3, 3), (4, 3), (5, 4), (6, 2)])
def test_hypercycle_girth_and_cy(p, k):
    rep = structure(hypercycle(p, k))
    assert rep.girth == p
    assert rep.cyclomatic == 1


def test_parallel_edges_have_girth_two():
    H = Hypergraph(3, 3, np.array([[0, 1, 2], [2, 0, 1]]))
    assert incidence_girth(3, H.edges) == 2
    assert structure(H).cyclomatic == 2


def test_degenerate_edge_is_reported():
    H = Hypergraph(2, 3, np.array([[0, 0, 1]]))
    rep = structure(H)
    assert rep.degenerate_edges == 1
    assert rep.girth == 1


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(2, 4), st.integers(0, 1000))
def test_cy_is_additive_over_disjoint_unions(m1, m2, k, seed):
    rng = np.random.default_rng(seed)
    a = hypercycle(m1 + 1, k)
    b = random_hypertree(m2, k, rng)
    u = disjoint_union(a, b)
    ra, rb, ru = structure(a), structure(b), structure(u)
    assert ru.cyclomatic == ra.cyclomatic + rb.cyclomatic
    assert ru.components == ra.components + rb.components
    assert ru.girth == min(ra.girth, rb.girth)


def _brute_girth(H: Hypergraph) -> float:
    # shortest cyclic edge sequence with distinct edges and distinct linking vertices
    best = math.inf
    sets = [set(e) for e in H.edges.tolist()]
    for p in range(2, H.m + 1):
        for seq in itertools.permutations(range(H.m), p):
            if seq[0] != min(seq):
                continue
            links = [sets[seq[i]] & sets[seq[(i + 1) % p]] for i in range(p)]
            for choice in itertools.product(*links):
                if len(set(choice)) == p:
                    return p
    return best


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_girth_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 9))
    m = int(rng.integers(1, 6))
    edges = np.array([rng.choice(n, size=3, replace=False) for _ in range(m)])
    H = Hypergraph(n, 3, edges)
    assert incidence_girth(n, edges) == _brute_girth(H)


@pytest.mark.parametrize("m,k", [(1, 3), (3, 3), (4, 3), (4, 4)])
def test_hyperforests_pass_audit_at_eta_zero(m, k):
    for T in hypertree_shapes(m, k):
        assert audit_expander(T, 1.0, 0.0).ok


def test_hypertree_shapes_are_trees():
    shapes = hypertree_shapes(4, 3)
    assert len(shapes) == 4
    for T in shapes:
        rep = structure(T)
        assert rep.cyclomatic == 0 and rep.components == 1


def test_parallel_pair_fails_audit_with_witness():
    H = Hypergraph(6, 3, np.array([[0, 1, 2], [0, 1, 2], [3, 4, 5]]))
    res = audit_expander(H, 2 / 6, 0.4)
    assert not res.ok
    assert res.witness == (0, 1)
    assert res.witness_vertices == 3


def test_audit_witness_violates_expansion_and_contains_cycle():
    for s in range(10):
        H = sample_config_model(24, 5, 3, seed=s)
        res = audit_expander(H, 0.25, 0.45)
        if res.ok:
            continue
        rep = structure_of_edges(H.edges[list(res.witness)], 3)
        assert rep.n < (3 - 1 - 0.45) * len(res.witness)
        assert rep.cyclomatic >= 1


def test_sampled_audit_agrees_on_obvious_cases():
    H = Hypergraph(6, 3, np.array([[0, 1, 2], [0, 1, 2], [3, 4, 5]]))
    assert not audit_expander(H, 1.0, 0.4, mode="sampled", trials=500, seed=0).ok
    T = hypertree_shapes(4, 3)[0]
    assert audit_expander(T, 1.0, 0.0, mode="sampled", trials=500).ok


def test_audit_budget_is_enforced():
    H = sample_config_model(60, 3, 3, seed=0, simple=True)
    with pytest.raises(BudgetExceeded):
        audit_expander(H, 1.0, 0.0, budget=100)


def test_simple_config_model_expanders_at_small_gamma():
    passes = sum(audit_expander(sample_config_model(24, 5, 3, s, simple=True), 0.15, 0.45).ok
                 for s in range(50))
    assert passes >= 40


def test_sample_expander_returns_audited_graph():
    H, tries = sample_expander(24, 5, 3, 0.15, 0.45, seed=3)
    assert tries >= 1
    assert audit_expander(H, 0.15, 0.45).ok


def test_affine_plane_hypergraph_is_linear_and_regular():
    H = affine_plane_hypergraph(7, 3, seed=0)
    assert (H.n, H.k, H.m) == (49, 7, 21)
    assert (H.degrees() == 3).all()
    sets = [set(e) for e in H.edges.tolist()]
    assert all(len(a & b) <= 1 for a, b in itertools.combinations(sets, 2))


def test_json_roundtrip():
    H = sample_config_model(9, 2, 3, seed=4)
    G = Hypergraph.from_json(H.to_json())
    assert G.n == H.n and (G.edges == H.edges).all()
