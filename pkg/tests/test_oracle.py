from __future__ import annotations

import json
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bdcsp.errors import IndexOutOfRange
from bdcsp.hypergraph import Hypergraph, random_hypertree, sample_config_model
from bdcsp.instances import Instance, sample_planted
from bdcsp.oracle import OracleSession
from bdcsp.predicates import nae


def _instance(H: Hypergraph, d: int | None = None) -> Instance:
    return sample_planted(H, nae(H.k), 0, declared_d=d)


def test_isolated_variable_returns_none():
    H = Hypergraph(4, 3, np.array([[0, 1, 2]]))
    orc = OracleSession(_instance(H, d=2))
    assert orc.query(3, 1) is None
    assert orc.query_count == 1


def test_second_incident_constraint():
    H = Hypergraph(5, 3, np.array([[0, 1, 2], [2, 3, 4]]))
    inst = _instance(H, d=2)
    orc = OracleSession(inst)
    a = orc.query(2, 2)
    assert a.edge_id == 1 and a.vertices == (2, 3, 4) and a.position == 0
    assert a.literal == int(inst.literals[1])


def test_index_range():
    H = sample_config_model(9, 2, 3, seed=0)
    orc = OracleSession(_instance(H))
    with pytest.raises(IndexOutOfRange):
        orc.query(0, 3)
    with pytest.raises(IndexOutOfRange):
        orc.query(0, 0)
    with pytest.raises(IndexOutOfRange):
        orc.query(9, 1)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.booleans())
def test_answers_enumerate_incidence_lists(seed, shuffle):
    H = sample_config_model(12, 3, 3, seed=seed)
    inst = _instance(H)
    orc = OracleSession(inst, shuffle_seed=seed if shuffle else None)
    for v in range(H.n):
        got = Counter()
        for i in range(1, 4):
            a = orc.query(v, i)
            assert orc.query(v, i) == a
            got[(a.edge_id, a.position)] += 1
            assert a.vertices[a.position] == v
        expected = Counter((e, p) for e, row in enumerate(H.edges.tolist()) for p, w in enumerate(row) if w == v)
        assert got == expected
    assert orc.query_count == 2 * 3 * H.n


def test_history_stats_grow_monotonically():
    H = sample_config_model(30, 3, 3, seed=5)
    orc = OracleSession(_instance(H))
    rep = orc.history_stats()
    assert rep.cyclomatic == 0 and rep.girth == math.inf
    rng = np.random.default_rng(0)
    last_cy, last_g = 0, math.inf
    for _ in range(60):
        orc.query(int(rng.integers(30)), int(rng.integers(1, 4)))
        rep = orc.history_stats()
        assert rep.cyclomatic >= last_cy
        assert rep.girth <= last_g
        last_cy, last_g = rep.cyclomatic, rep.girth
        assert set(map(tuple, orc.history_edges().tolist())) <= set(map(tuple, H.edges.tolist()))


def test_hypertree_history_has_no_cycles():
    T = random_hypertree(6, 3, np.random.default_rng(1))
    orc = OracleSession(_instance(T, d=3))
    for v in range(T.n):
        for i in (1, 2, 3):
            orc.query(v, i)
    rep = orc.history_stats()
    assert rep.cyclomatic == 0 and rep.m == 6


def test_trace_roundtrips_through_json():
    H = sample_config_model(9, 2, 3, seed=0)
    orc = OracleSession(_instance(H))
    orc.query(0, 1)
    orc.query(4, 2)
    trace = json.loads(orc.trace_json())
    assert [(t["v"], t["i"]) for t in trace] == [(0, 1), (4, 2)]
    assert trace[0]["answer"]["vertices"][trace[0]["answer"]["position"]] == 0
