"""The Robin-Hood pruning and the growth process built from it.

``prune_deterministic`` inserts vertex ``n`` into a decorated tree of size
``n - 1`` given pruning parameters ``(k, l, x)``: the new vertex gets stamp
``k``, every vertex with stamp ``s >= k`` and ``x_s = 1`` is rewired to the
new vertex, and the new vertex hangs below the stamp-``l`` vertex (or becomes
the root when ``k = 1``). ``robin_hood_step`` draws the parameters at random
so that the uniform law on decorated trees is preserved.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .trees import (
    ROOT,
    DecoratedTree,
    Permutation,
    RootedTree,
    degree_sequence,
    format_decorated,
    parse_decorated,
)


@dataclass(frozen=True)
class HSet:
    """Pruning parameters ``(k, l, x)`` for growing to size ``n``.

    ``ones`` holds the indices ``i`` in ``[1, n-1]`` with ``x_i = 1``. When
    ``full`` is False only the bits the pruning reads are materialized:
    indices ``>= k`` (which includes ``x_1`` when ``k = 1``).
    """

    n: int
    k: int
    l: int
    ones: frozenset[int] = field(default_factory=frozenset)
    full: bool = True

    def __post_init__(self):
        n, k, l = self.n, self.k, self.l
        if n < 2:
            raise ValueError("pruning parameters need n >= 2")
        if k == 1:
            if l != 0:
                raise ValueError("k = 1 requires l = 0")
            if 1 not in self.ones:
                raise ValueError("k = 1 requires x_1 = 1")
        elif not 1 <= l < k <= n:
            raise ValueError(f"(k, l) = ({k}, {l}) violates 1 <= l < k <= {n}")
        if any(not 1 <= i <= n - 1 for i in self.ones):
            raise ValueError(f"bit indices must lie in [1, {n - 1}]")
        if not self.full and any(i < k for i in self.ones):
            raise ValueError("lazy parameter sets only store bits at indices >= k")

    def bit(self, i: int) -> int:
        if not 1 <= i <= self.n - 1:
            raise IndexError(i)
        if not self.full and i < self.k:
            raise LookupError(f"x_{i} was not sampled (lazy parameter set, k={self.k})")
        return int(i in self.ones)

    def yield_(self) -> int:
        """Number of rewired stamps: ``sum_{i=k}^{n-1} x_i``."""
        return sum(1 for i in self.ones if i >= self.k)

    def to_line(self) -> str:
        return f"{self.k};{self.l};{','.join(map(str, sorted(self.ones)))}"

    @classmethod
    def from_line(cls, n: int, line: str, full: bool | None = None) -> "HSet":
        k_field, l_field, x_field = line.strip().split(";")
        k = int(k_field)
        ones = frozenset(int(t) for t in x_field.split(",") if t)
        if full is None:
            full = any(i < k for i in ones)
        return cls(n, k, int(l_field), ones, full)


def prune_set(dt: DecoratedTree, h: HSet) -> set[int]:
    """Labels rewired to the new vertex: stamp ``>= k`` and bit set."""
    if h.n != dt.n + 1:
        raise ValueError(f"parameters are for size {h.n}, tree has size {dt.n}")
    return {v for v, s in enumerate(dt.stamp.image, 1) if s >= h.k and s in h.ones}


def prune_deterministic(dt: DecoratedTree, h: HSet, check: bool = True) -> DecoratedTree:
    n = dt.n + 1
    if h.n != n:
        raise ValueError(f"parameters are for size {h.n}, tree has size {dt.n}")
    rewired = prune_set(dt, h)
    parents = list(dt.tree.parents) + [ROOT]
    for v in rewired:
        parents[v - 1] = n
    if h.k > 1:
        parents[n - 1] = dt.stamp.inverse()(h.l)
    stamps = [s + (s >= h.k) for s in dt.stamp.image] + [h.k]
    out = DecoratedTree(RootedTree(tuple(parents)), Permutation(tuple(stamps)))
    if check:
        _check_degree_bookkeeping(dt, h, out)
    return out


def _check_degree_bookkeeping(dt: DecoratedTree, h: HSet, out: DecoratedTree) -> None:
    n = out.n
    before = degree_sequence(dt.tree)
    after = degree_sequence(out.tree)
    inv = dt.stamp.inverse()
    lost = [0] * (n + 1)
    for i in h.ones:
        if i >= h.k:
            lost[dt.tree.parent(inv(i))] += 1
    assert after[n - 1] == h.yield_(), "new-vertex degree differs from the rewire count"
    for v in range(1, n):
        expected = before[v - 1] + (h.l == dt.stamp(v)) - lost[v]
        assert after[v - 1] == expected, f"degree bookkeeping fails at vertex {v}"


def sample_hset(n: int, rng: np.random.Generator, full: bool = False) -> HSet:
    """Draw ``K ~ Unif[1, n]``, ``L ~ Unif[1, K-1]`` (0 if K = 1), ``X_i ~ Ber(1/i)``.

    Lazy mode draws ``X_i`` only for ``i >= K``; full mode draws all of
    ``X_1, ..., X_{n-1}``. Either way the stream is read as: one double for
    K, one for L when K > 1, then one per bit in increasing index order.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    k = int(rng.random() * n) + 1
    l = int(rng.random() * (k - 1)) + 1 if k > 1 else 0
    start = 1 if full else k
    ones = frozenset(i for i in range(start, n) if rng.random() * i < 1.0)
    return HSet(n, k, l, ones, full)


def robin_hood_step(dt: DecoratedTree, rng: np.random.Generator, full: bool = False):
    """One random pruning step ``D_{n-1} -> D_n``; returns ``(tree, hset)``."""
    h = sample_hset(dt.n + 1, rng, full=full)
    return prune_deterministic(dt, h), h


def singleton() -> DecoratedTree:
    return DecoratedTree(RootedTree((ROOT,)), Permutation((1,)))


@dataclass(frozen=True)
class GrowthTrace:
    """Decorated trees of sizes 1..n with the parameters that produced each."""

    trees: tuple[DecoratedTree, ...]
    hsets: tuple[HSet, ...]  # hsets[j] grew trees[j] into trees[j + 1]

    @property
    def final(self) -> DecoratedTree:
        return self.trees[-1]

    def replay(self) -> bool:
        current = self.trees[0]
        for h, nxt in zip(self.hsets, self.trees[1:]):
            current = prune_deterministic(current, h)
            if current != nxt:
                return False
        return True

    def to_lines(self) -> list[str]:
        lines = [format_decorated(self.trees[0])]
        for h, dt in zip(self.hsets, self.trees[1:]):
            lines.append(h.to_line())
            lines.append(format_decorated(dt))
        return lines

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "GrowthTrace":
        lines = [ln for ln in lines if ln.strip()]
        trees = [parse_decorated(lines[0])]
        hsets = []
        for h_line, t_line in zip(lines[1::2], lines[2::2]):
            dt = parse_decorated(t_line)
            hsets.append(HSet.from_line(dt.n, h_line))
            trees.append(dt)
        trace = cls(tuple(trees), tuple(hsets))
        if not trace.replay():
            raise ValueError("growth trace does not replay")
        return trace


def grow_process(n: int, rng: np.random.Generator) -> GrowthTrace:
    if n < 1:
        raise ValueError("n must be positive")
    trees = [singleton()]
    hsets = []
    for size in range(2, n + 1):
        dt, h = robin_hood_step(trees[-1], rng)
        trees.append(dt)
        hsets.append(h)
    return GrowthTrace(tuple(trees), tuple(hsets))
