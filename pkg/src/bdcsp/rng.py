"""Random sources and seed derivation.

Every sampler in the package draws through :class:`Source`, whose two
primitives (``randbelow`` and ``random``) are enough to express all the
randomness used by the lazy processes.  :func:`enumerate_outcomes` replays a
computation under every possible sequence of ``randbelow`` draws, which turns
any sampler written against ``Source`` into an exact distribution.
"""

from __future__ import annotations

import random as _random
from fractions import Fraction
from typing import Callable, Hashable, Sequence

import numpy as np


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic 63-bit seed for the stream identified by ``(seed, *keys)``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *(int(k) & 0xFFFFFFFF for k in keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0]) >> 1


def numpy_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *keys))


class Source:
    """Scalar random draws backed by :class:`random.Random`."""

    def __init__(self, seed: int | None = None):
        self._r = _random.Random(seed)

    def randbelow(self, n: int) -> int:
        return self._r.randrange(n)

    def random(self) -> float:
        return self._r.random()

    def seed_for_numpy(self) -> int:
        return self._r.getrandbits(63)


class _Branch(Exception):
    def __init__(self, n: int):
        self.n = n


class ScriptedSource(Source):
    """Source replaying a fixed prefix of ``randbelow`` outcomes.

    Running past the prefix raises an internal branch signal carrying the
    range of the next draw; ``random()`` is not enumerable and raises.
    """

    def __init__(self, script: Sequence[int]):
        self._script = list(script)
        self._pos = 0
        self.weight = Fraction(1)

    def randbelow(self, n: int) -> int:
        if self._pos == len(self._script):
            raise _Branch(n)
        j = self._script[self._pos]
        self._pos += 1
        self.weight /= n
        return j

    def random(self) -> float:
        raise TypeError("continuous draws cannot be enumerated")

    def seed_for_numpy(self) -> int:
        raise TypeError("numpy streams cannot be enumerated")


def enumerate_outcomes(run: Callable[[Source], Hashable], max_paths: int = 5_000_000) -> dict:
    """Exact law of ``run(source)`` over all ``randbelow`` paths.

    Returns ``{outcome: Fraction}``.  ``run`` must be deterministic given the
    draws it receives.
    """
    law: dict = {}
    stack: list[list[int]] = [[]]
    paths = 0
    while stack:
        script = stack.pop()
        src = ScriptedSource(script)
        try:
            out = run(src)
        except _Branch as br:
            stack.extend(script + [j] for j in range(br.n - 1, -1, -1))
            continue
        paths += 1
        if paths > max_paths:
            raise RuntimeError(f"more than {max_paths} random paths")
        law[out] = law.get(out, Fraction(0)) + src.weight
    return law
