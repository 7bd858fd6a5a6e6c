"""Union-find over GF(2) variables that tracks pairwise parities."""

from __future__ import annotations


class ParityUnionFind:
    """Maintains constraints ``x_u + x_v = c`` and detects contradictions."""

    def __init__(self):
        self._parent: dict[int, int] = {}
        self._par: dict[int, int] = {}  # parity to parent
        self._size: dict[int, int] = {}

    def find(self, u: int) -> tuple[int, int]:
        """Root of ``u`` and the parity ``x_u + x_root``."""
        if u not in self._parent:
            self._parent[u] = u
            self._par[u] = 0
            self._size[u] = 1
            return u, 0
        path = []
        while self._parent[u] != u:
            path.append(u)
            u = self._parent[u]
        root, acc = u, 0
        for w in reversed(path):
            acc ^= self._par[w]
            self._parent[w] = root
            self._par[w] = acc
        return root, (self._par[path[0]] if path else 0)

    def union(self, u: int, v: int, parity: int) -> bool:
        """Add ``x_u + x_v = parity``; False if it contradicts earlier constraints."""
        ru, pu = self.find(u)
        rv, pv = self.find(v)
        if ru == rv:
            return (pu ^ pv) == parity
        if self._size[ru] < self._size[rv]:
            ru, rv, pu, pv = rv, ru, pv, pu
        self._parent[rv] = ru
        self._par[rv] = pu ^ pv ^ parity
        self._size[ru] += self._size[rv]
        return True

    def same_set(self, u: int, v: int) -> bool:
        return self.find(u)[0] == self.find(v)[0]
