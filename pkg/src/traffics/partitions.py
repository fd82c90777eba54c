"""Set partitions of ``{0, ..., n-1}`` and the combinatorics built on them.

Enumeration order is restricted-growth-string (RGS) order: a partition is
encoded by the word ``a`` with ``a[i]`` the index of the block holding ``i``
(blocks numbered by first appearance), and words are listed
lexicographically.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial
from typing import Iterator, Sequence

from .errors import GuardError

PARTITION_GUARD = 12
PAIRING_GUARD = 16
NONCROSSING_GUARD = 12


@dataclass(frozen=True)
class SetPartition:
    """Partition of ``{0, ..., n-1}`` with blocks sorted by minimum element.

    Parameters
    ----------
    blocks : sequence of iterables of int
        Disjoint nonempty blocks covering ``range(n)``.
    n : int, optional
        Size of the ground set. Inferred from the blocks when omitted.
    """

    blocks: tuple
    n: int

    def __init__(self, blocks, n: int | None = None):
        canon = tuple(sorted((tuple(sorted(b)) for b in blocks), key=lambda b: b[0] if b else -1))
        if any(len(b) == 0 for b in canon):
            raise ValueError("partition blocks must be nonempty")
        flat = [i for b in canon for i in b]
        if n is None:
            n = len(flat)
        if sorted(flat) != list(range(n)):
            raise ValueError(f"blocks do not partition range({n})")
        object.__setattr__(self, "blocks", canon)
        object.__setattr__(self, "n", n)

    @classmethod
    def from_rgs(cls, word: Sequence[int]) -> "SetPartition":
        blocks: dict[int, list[int]] = {}
        for i, b in enumerate(word):
            blocks.setdefault(b, []).append(i)
        return cls(blocks.values(), len(word))

    @classmethod
    def discrete(cls, n: int) -> "SetPartition":
        return cls([[i] for i in range(n)], n)

    @classmethod
    def full(cls, n: int) -> "SetPartition":
        return cls([list(range(n))] if n else [], n)

    def rgs(self) -> tuple:
        word = [0] * self.n
        for k, b in enumerate(self.blocks):
            for i in b:
                word[i] = k
        return tuple(word)

    def block_of(self) -> list[int]:
        """Map each element to the index of its block."""
        return list(self.rgs())

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    def is_noncrossing(self) -> bool:
        word = self.rgs()
        for a in range(self.n):
            for b in range(a + 1, self.n):
                if word[a] != word[b]:
                    continue
                for c in range(a + 1, b):
                    if word[c] == word[a]:
                        continue
                    for d in range(b + 1, self.n):
                        if word[d] == word[c]:
                            return False
        return True


def _rgs_words(n: int) -> Iterator[list[int]]:
    if n == 0:
        yield []
        return
    word = [0] * n

    def rec(i: int, m: int):
        # m = number of blocks opened so far
        if i == n:
            yield word
            return
        for v in range(m + 1):
            word[i] = v
            yield from rec(i + 1, max(m, v + 1))

    yield from rec(1, 1)


def enumerate_partitions(n: int, guard: int = PARTITION_GUARD) -> Iterator[SetPartition]:
    """Yield every partition of ``range(n)`` once, in RGS order.

    Raises
    ------
    GuardError
        If ``n`` exceeds ``guard``.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n > guard:
        raise GuardError(f"partition enumeration of n={n} exceeds guard {guard}")
    for word in _rgs_words(n):
        yield SetPartition.from_rgs(word)


def mobius_from_discrete(p: SetPartition) -> int:
    """Möbius value mu(0, p) in the partition lattice."""
    out = 1
    for b in p.blocks:
        k = len(b)
        out *= (-1) ** (k - 1) * factorial(k - 1)
    return out


def refines(p: SetPartition, s: SetPartition) -> bool:
    """True iff every block of ``p`` lies inside a block of ``s``."""
    if p.n != s.n:
        raise ValueError(f"ground sets differ: {p.n} vs {s.n}")
    owner = s.block_of()
    return all(len({owner[i] for i in b}) == 1 for b in p.blocks)


def enumerate_pair_partitions(n: int, guard: int = PAIRING_GUARD) -> Iterator[SetPartition]:
    """Yield the pair partitions of ``range(n)``; none for odd ``n``.

    Order is lexicographic in the partner chosen for the smallest free element,
    which is deterministic and streams without buffering.
    """
    if n > guard:
        raise GuardError(f"pairing enumeration of n={n} exceeds guard {guard}")
    if n % 2:
        return

    def rec(rest: list[int]) -> Iterator[list[tuple[int, int]]]:
        if not rest:
            yield []
            return
        a = rest[0]
        for k in range(1, len(rest)):
            others = rest[1:k] + rest[k + 1:]
            for tail in rec(others):
                yield [(a, rest[k])] + tail

    for pairs in rec(list(range(n))):
        yield SetPartition(pairs, n)


def enumerate_noncrossing_partitions(n: int, guard: int = NONCROSSING_GUARD) -> Iterator[SetPartition]:
    """Yield the non-crossing partitions of ``range(n)`` in RGS order."""
    if n > guard:
        raise GuardError(f"non-crossing enumeration of n={n} exceeds guard {guard}")

    @lru_cache(maxsize=None)
    def rec(elems: tuple) -> list[list[tuple]]:
        # The block of the first element splits the rest into independent gaps.
        if not elems:
            return [[]]
        first, rest = elems[0], elems[1:]
        out = []
        for mask in range(1 << len(rest)):
            chosen = [rest[i] for i in range(len(rest)) if mask >> i & 1]
            block = (first, *chosen)
            gaps = []
            bounds = list(block) + [None]
            for a, b in zip(bounds, bounds[1:]):
                gaps.append(tuple(e for e in rest if e > a and (b is None or e < b)))
            parts = [[block]]
            for g in gaps:
                parts = [p + q for p in parts for q in rec(g)]
            out.extend(parts)
        return out

    found = [SetPartition(bl, n) for bl in rec(tuple(range(n)))] if n else [SetPartition([], 0)]
    found.sort(key=lambda p: p.rgs())
    yield from found


def bell(n: int) -> int:
    """Bell number by the Bell triangle."""
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
    return row[0]


def catalan(n: int) -> int:
    return factorial(2 * n) // (factorial(n) * factorial(n + 1))


def double_factorial(n: int) -> int:
    """``n!!`` with the convention ``(-1)!! = 1``."""
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out
