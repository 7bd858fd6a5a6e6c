from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bdcsp import gf2
from bdcsp.errors import ArityMismatch, AsymmetricWeights, EmptyAcceptance
from bdcsp.predicates import (
    GeneratorMatrix, accept_all, by_name, decode, encode, equ, from_json, hamming_generator,
    is_superset_of, make_symmetric, merge_edge_ratio, nae, origin_limit, rho, rho_search, weight, xor,
)


def test_make_symmetric_nae_and_equ():
    P = make_symmetric(3, {1, 2})
    assert P.n_accepting == 6
    assert P == nae(3)
    Q = make_symmetric(3, {0, 3})
    assert Q.n_accepting == 2
    assert Q.is_equ()
    assert set(Q.accepting) == {0b000, 0b111}


def test_make_symmetric_errors():
    with pytest.raises(AsymmetricWeights):
        make_symmetric(3, {1})
    with pytest.raises(EmptyAcceptance):
        make_symmetric(3, set())
    with pytest.raises(ValueError):
        make_symmetric(3, {4})


def test_is_superset_of():
    assert is_superset_of(nae(3), nae(3))
    assert is_superset_of(accept_all(3), equ(3))
    assert not is_superset_of(equ(3), nae(3))
    with pytest.raises(ArityMismatch):
        is_superset_of(nae(4), nae(3))


def test_encode_decode_roundtrip():
    for x in range(32):
        assert encode(decode(x, 5)) == x
    assert decode(0b011, 3) == (1, 1, 0)


def test_by_name_and_json_roundtrip():
    for name in ["3-NAE", "4-EQU", "2-XOR", "3-XOR", "5-W2,3", "3-TRUE"]:
        P = by_name(name)
        assert from_json(P.to_json()) == P
    assert by_name("5-W2,3").n_accepting == 20


def test_xor_acceptance_is_odd_parity():
    P = xor(3)
    assert all(P.accepts(x) == (weight(x) % 2 == 1) for x in range(8))
    assert not P.is_symmetric()
    assert xor(2).is_symmetric()


def test_forced_parities_of_equ():
    assert equ(4).forced_parities() == {p: 0 for p in itertools.combinations(range(4), 2)}
    assert nae(3).forced_parities() == {}


@pytest.mark.parametrize("k,h,acc", [(7, 4, 8), (3, 1, 4), (5, 2, 8)])
def test_hamming_generator_examples(k, h, acc):
    A = hamming_generator(k)
    assert A.h == h
    assert A.predicate().n_accepting == acc
    assert acc <= 2 * k
    assert A.rank() == h


def test_hamming_k3_is_all_ones_row():
    A = hamming_generator(3)
    assert A.rows == (0b111,)
    assert set(A.predicate().accepting) == {x for x in range(8) if weight(x) % 2 == 0}


@pytest.mark.parametrize("k", range(3, 13))
def test_hamming_generator_distance_and_kernel(k):
    A = hamming_generator(k)
    for mask in range(1, 1 << A.h):
        comb = 0
        for t in range(A.h):
            if mask >> t & 1:
                comb ^= A.rows[t]
        assert gf2.popcount(comb) >= 3
    kernel = sum(A.syndrome(x) == 0 for x in range(1 << k))
    assert kernel == 1 << (k - A.h)


def test_generator_json_roundtrip():
    A = hamming_generator(7)
    assert GeneratorMatrix.from_json(A.to_json()) == A


@pytest.mark.parametrize("k", range(2, 11))
def test_symmetric_predicates_are_complement_invariant(k):
    full = (1 << k) - 1
    for lo in range(k // 2 + 1):
        ws = {lo, k - lo}
        P = make_symmetric(k, ws)
        table = P.table
        assert all(table[x] == table[x ^ full] for x in range(1 << k))


def test_rho_equ_is_one_and_nae_below_one():
    assert rho(equ(3)) == 1.0
    r = rho(nae(3))
    assert r < 1 - 1e-3
    assert rho(nae(4)) < 1
    assert rho(nae(5)) < 1


def test_rho_grid_values_are_stable():
    # values computed by the grid search; frozen as regression anchors
    assert rho(nae(3), 0.05) == pytest.approx(0.5, abs=1e-9)
    assert rho(nae(4), 0.05) == pytest.approx(1 / 3, abs=1e-9)


def test_rho_origin_limit_is_finite():
    for P in (nae(3), nae(4), make_symmetric(5, {2, 3})):
        lim = origin_limit(P)
        assert np.isfinite(lim) and 0 <= lim <= 1
        assert rho_search(P).value >= lim - 1e-12


def test_rho_never_decreases_under_refinement():
    for P in (nae(3), nae(4)):
        coarse = rho(P, 0.1)
        fine = rho(P, 0.05)
        assert fine >= coarse - 1e-12
        assert abs(fine - coarse) <= 2 * 0.1


def test_merge_edge_ratio_matches_direct_marginal():
    # direct computation: law of the last position when the other positions
    # carry independent priors and the constraint must hold
    P = nae(3)
    rng = np.random.default_rng(0)
    for _ in range(50):
        dl = rng.uniform(-0.5, 0.5, size=2)
        ratio, _ = merge_edge_ratio(P, dl[None, :])
        p0 = [0.5 + dl[0], 0.5 + dl[1]]
        w = np.zeros(2)
        for x in P.accepting:
            b = decode(x, 3)
            w[b[2]] += (p0[0] if b[0] == 0 else 1 - p0[0]) * (p0[1] if b[1] == 0 else 1 - p0[1])
        w /= w.sum()
        assert ratio[0] == pytest.approx(abs(w[0] - w[1]) / (2 * np.abs(dl).sum()), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-0.5, 0.5), min_size=2, max_size=2))
def test_nae_ratio_bounded_by_rho(dl):
    ratio, _ = merge_edge_ratio(nae(3), np.array([dl]))
    if not np.isnan(ratio[0]):
        assert ratio[0] <= rho(nae(3)) + 1e-9


@pytest.mark.parametrize("k", [3, 4, 5])
def test_grid_rho_bounds_ten_thousand_random_points(k):
    P = nae(k)
    r = rho(P)
    dl = np.random.default_rng(k).uniform(-0.5, 0.5, size=(10_000, k - 1))
    ratio, _ = merge_edge_ratio(P, dl)
    assert np.nanmax(ratio) <= r + 1e-9
