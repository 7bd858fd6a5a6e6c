"""GF(2) linear algebra on Python int bitsets (bit j = column j)."""

from __future__ import annotations

from typing import Iterable, List


def popcount(x: int) -> int:
    return bin(x).count("1")


def rank(rows: Iterable[int]) -> int:
    """Rank over GF(2) by elimination on leading bits."""
    basis: dict[int, int] = {}
    r = 0
    for row in rows:
        while row:
            top = row.bit_length() - 1
            if top in basis:
                row ^= basis[top]
            else:
                basis[top] = row
                r += 1
                break
    return r


def kernel_basis(rows: List[int], n_cols: int) -> List[int]:
    """Basis of {x : popcount(row & x) even for every row}."""
    # reduced row echelon form, pivots on lowest set bit
    work = [r for r in rows if r]
    pivots: list[tuple[int, int]] = []
    for col in range(n_cols):
        idx = next((i for i, r in enumerate(work) if (r >> col) & 1), None)
        if idx is None:
            continue
        prow = work.pop(idx)
        work = [r ^ prow if (r >> col) & 1 else r for r in work]
        pivots = [(c, r ^ prow if (r >> col) & 1 else r) for c, r in pivots]
        pivots.append((col, prow))
    pivot_cols = {c for c, _ in pivots}
    basis = []
    for free in range(n_cols):
        if free in pivot_cols:
            continue
        x = 1 << free
        for c, r in pivots:
            if (r >> free) & 1:
                x |= 1 << c
        basis.append(x)
    return basis


def span(basis: List[int]) -> List[int]:
    out = [0]
    for b in basis:
        out += [v ^ b for v in out]
    return out


def min_weight(basis: List[int]) -> int:
    """Minimum Hamming weight of a nonzero vector in the span (exhaustive)."""
    return min((popcount(v) for v in span(basis) if v), default=0)
