from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bdcsp.errors import WrongPredicate
from bdcsp.hypergraph import Hypergraph, sample_config_model
from bdcsp.instances import Instance, brute_farness, sample_planted, sample_uniform
from bdcsp.oracle import OracleSession
from bdcsp.predicates import equ, nae
from bdcsp.testers import (
    LazyKequGraph, ListGraph, TesterConfig, cycle_graph, disjoint_triangles, equ_constraints_satisfiable,
    find_odd_cycle, is_odd_cycle_in, kequ_eps, literal_vertex, odd_cycle_from_closed_walk, phi, phi_g,
    phi_g_of_kequ, test_bipartite, test_kequ,
)


def _equ2(n, pairs, lits):
    H = Hypergraph(n, 2, np.array(pairs))
    return Instance(equ(2), H, np.array(lits), max(1, H.max_degree()))


def test_phi_expands_into_pairs():
    H = Hypergraph(3, 3, np.array([[0, 1, 2]]))
    inst = Instance(equ(3), H, np.array([0b010]), 1)
    out = phi(inst)
    assert out.m == 3
    assert out.declared_d == 2
    assert out.hypergraph.max_degree() <= out.declared_d
    assert sorted(map(tuple, out.hypergraph.edges.tolist())) == [(0, 1), (0, 2), (1, 2)]
    with pytest.raises(WrongPredicate):
        phi(sample_uniform(H, nae(3), 0))


def test_phi_preserves_satisfiability_and_farness_scaling():
    for s in range(8):
        H = sample_config_model(9, 4, 3, seed=s)
        sat = sample_planted(H, equ(3), s)
        assert phi(sat).is_satisfied_by(sat.planted)
        far = sample_uniform(H, equ(3), s)
        f, f2 = brute_farness(far), brute_farness(phi(far))
        assert f2.farness >= 2 * f.farness / 3 - 1e-12
        assert (f.min_removals == 0) == (f2.min_removals == 0)


def test_phi_g_single_constraint():
    G = phi_g(_equ2(2, [[0, 1]], [0]))
    x1, nx1, x2, nx2 = literal_vertex(0, 0), literal_vertex(0, 1), literal_vertex(1, 0), literal_vertex(1, 1)
    pairs = {frozenset((a, b)) for a, b, _ in G.edges()}
    assert pairs == {frozenset(p) for p in [(x1, nx1), (x2, nx2), (x1, nx2), (nx1, x2)]}
    assert len(G.variable_edges()) == 2 and len(G.constraint_edges()) == 2
    assert G.is_bipartite()


def test_phi_g_contradiction_has_odd_cycle():
    G = phi_g(_equ2(2, [[0, 1], [0, 1]], [0, 0b10]))
    cyc = find_odd_cycle(G)
    assert cyc is not None
    assert is_odd_cycle_in(G, *cyc)


def test_phi_g_bipartite_iff_satisfiable():
    rng = np.random.default_rng(0)
    for t in range(100):
        n = int(rng.integers(2, 7))
        m = int(rng.integers(1, 8))
        pairs = rng.integers(0, n, size=(m, 2))
        inst = _equ2(n, pairs, rng.integers(0, 4, size=m))
        sat = brute_farness(inst).min_removals == 0
        assert phi_g(inst).is_bipartite() == sat


def test_composed_reduction_bipartite_iff_satisfiable():
    rng = np.random.default_rng(1)
    for t in range(60):
        n = int(rng.integers(3, 15))
        m = int(rng.integers(1, 6))
        edges = np.array([rng.choice(n, size=3, replace=False) for _ in range(m)])
        H = Hypergraph(n, 3, edges)
        inst = Instance(equ(3), H, rng.integers(0, 8, size=m), H.max_degree())
        sat = brute_farness(inst).min_removals == 0
        G = phi_g_of_kequ(inst)
        assert G.is_bipartite() == sat
        assert G.degree_bound == 1 + 2 * H.max_degree()
        assert len(G.variable_edges()) == n


def test_lazy_graph_matches_materialised_graph():
    for s in range(5):
        H = sample_config_model(30, 4, 3, seed=s)
        inst = sample_uniform(H, equ(3), s)
        G = phi_g_of_kequ(inst)
        lazy = LazyKequGraph(OracleSession(inst))
        assert lazy.degree_bound == G.degree_bound
        for v in range(G.n):
            for j in range(G.degree_bound):
                assert lazy.neighbor(v, j) == G.neighbor(v, j)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_odd_cycle_extraction(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 9))
    edges = [(int(a), int(b)) for a, b in rng.integers(0, n, size=(int(rng.integers(3, 14)), 2)) if a != b]
    G = ListGraph(n, edges)
    cyc = find_odd_cycle(G)
    colours = _two_colourable(n, edges)
    assert (cyc is None) == colours
    if cyc is not None:
        vs, ls = cyc
        assert is_odd_cycle_in(G, vs, ls)
        assert len(set(vs[:-1])) == len(vs) - 1


def _two_colourable(n, edges):
    import itertools
    for c in itertools.product((0, 1), repeat=n):
        if all(c[a] != c[b] for a, b in edges):
            return True
    return False


def test_closed_walk_must_be_odd():
    with pytest.raises(ValueError):
        odd_cycle_from_closed_walk([0, 1, 0], ["a", "a"])
    vs, ls = odd_cycle_from_closed_walk([0, 1, 2, 3, 1, 2, 4, 0], list("abcdefg"))
    assert vs[0] == vs[-1] and (len(vs) - 1) % 2 == 1


def test_even_cycle_always_accepted():
    G = cycle_graph(100)
    for s in range(30):
        assert test_bipartite(G, 0.1, s).accept


def test_disjoint_triangles_rejected():
    G = disjoint_triangles(100)
    rejects = 0
    for s in range(30):
        v = test_bipartite(G, 1 / 3, s)
        if not v.accept:
            rejects += 1
            assert is_odd_cycle_in(G, v.cycle, v.cycle_labels)
    assert rejects >= 20


def test_schedule_defaults():
    rounds, walks, length = TesterConfig().schedule(10_000, 0.1)
    assert rounds == 4 and walks == 100 and length == 10
    assert kequ_eps(0.2, 3, 4) == pytest.approx((0.4 / 3) / 32)


def test_satisfiable_kequ_accepted_fuzz():
    rng = np.random.default_rng(2)
    for t in range(300):
        k = int(rng.choice([2, 3, 4]))
        d = int(rng.integers(1, 5))
        n = k * int(rng.integers(2, 12))
        H = sample_config_model(n, d, k, seed=t)
        inst = sample_planted(H, equ(k), t)
        v = test_kequ(inst, 0.2, t)
        assert v.accept
        assert v.queries <= v.budget


def test_far_kequ_rejects_with_verified_witness():
    rejects = 0
    for s in range(10):
        H = sample_config_model(501, 4, 3, seed=s)
        inst = sample_uniform(H, equ(3), s)
        v = test_kequ(inst, 0.2, s, shuffle_seed=s)
        assert v.queries <= v.budget
        if not v.accept:
            rejects += 1
            assert not equ_constraints_satisfiable(v.witness)
            assert all(c in {(tuple(inst.hypergraph.edges[e].tolist()), int(inst.literals[e])) for e in range(inst.m)}
                       for c in v.witness)
    assert rejects >= 7


def test_equ_constraint_solver():
    assert equ_constraints_satisfiable([((0, 1, 2), 0b000), ((2, 3, 4), 0b111)])
    assert not equ_constraints_satisfiable([((0, 1), 0b00), ((0, 1), 0b01)])
