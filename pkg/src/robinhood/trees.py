"""Rooted labeled trees, permutations and decorated trees.

Labels are 1-based. A tree is stored as its parent array ``parents`` where
``parents[v - 1]`` is the parent of vertex ``v`` and the root carries the
sentinel ``0``. A decorated tree pairs a tree with a stamp history: a
permutation ``stamp`` such that relabeling the tree by ``stamp`` gives an
increasing tree (parents carry smaller labels than their children).

Text format, one decorated tree per line::

    n;p_1,...,p_n;s_1,...,s_n

with ``p_v`` the parent of ``v`` (0 for the root) and ``s_v`` the stamp of v.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

ROOT = 0
DEFAULT_ENUMERATION_BOUND = 6


class NotAStampHistory(ValueError):
    """Raised when a permutation is not a stamp history of a tree."""

    def __init__(self, child: int, parent: int, message: str):
        super().__init__(message)
        self.child = child
        self.parent = parent


@dataclass(frozen=True)
class RootedTree:
    parents: tuple[int, ...]

    def __post_init__(self):
        n = len(self.parents)
        if n < 1:
            raise ValueError("a tree needs at least one vertex")
        roots = [v for v, p in enumerate(self.parents, 1) if p == ROOT]
        if len(roots) != 1:
            raise ValueError(f"expected exactly one root, found {len(roots)}")
        for v, p in enumerate(self.parents, 1):
            if p != ROOT and not 1 <= p <= n:
                raise ValueError(f"parent {p} of vertex {v} is not a label in [1, {n}]")
            if p == v:
                raise ValueError(f"vertex {v} is its own parent")
        # every vertex reaches the root in fewer than n steps
        depth_known = [False] * (n + 1)
        depth_known[roots[0]] = True
        for v in range(1, n + 1):
            path = []
            u = v
            while not depth_known[u]:
                path.append(u)
                if len(path) >= n:
                    raise ValueError(f"cycle through vertex {v}")
                u = self.parents[u - 1]
            for w in path:
                depth_known[w] = True

    @classmethod
    def from_parents(cls, parents: Sequence[int]) -> "RootedTree":
        return cls(tuple(int(p) for p in parents))

    @property
    def n(self) -> int:
        return len(self.parents)

    @property
    def root(self) -> int:
        return self.parents.index(ROOT) + 1

    def parent(self, v: int) -> int:
        """Parent of ``v``, or 0 if ``v`` is the root."""
        _check_label(v, self.n)
        return self.parents[v - 1]

    def edges(self) -> list[tuple[int, int]]:
        """Edges ``(child, parent)``, directed toward the root."""
        return [(v, p) for v, p in enumerate(self.parents, 1) if p != ROOT]

    def children(self, v: int) -> list[int]:
        _check_label(v, self.n)
        return [u for u, p in enumerate(self.parents, 1) if p == v]


@dataclass(frozen=True)
class Permutation:
    image: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.image) != list(range(1, len(self.image) + 1)):
            raise ValueError(f"{self.image} is not a permutation of [1, {len(self.image)}]")

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(1, n + 1)))

    @classmethod
    def from_image(cls, image: Sequence[int]) -> "Permutation":
        return cls(tuple(int(s) for s in image))

    @property
    def n(self) -> int:
        return len(self.image)

    def __call__(self, v: int) -> int:
        return self.image[v - 1]

    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for v, s in enumerate(self.image, 1):
            inv[s - 1] = v
        return Permutation(tuple(inv))

    def compose(self, other: "Permutation") -> "Permutation":
        """``self o other``: apply ``other`` first."""
        if other.n != self.n:
            raise ValueError("size mismatch")
        return Permutation(tuple(self.image[s - 1] for s in other.image))


@dataclass(frozen=True)
class DecoratedTree:
    """A tree with a stamp history. Build through :func:`validate_decorated`."""

    tree: RootedTree
    stamp: Permutation

    def __post_init__(self):
        if self.tree.n != self.stamp.n:
            raise ValueError("tree and stamp sizes differ")
        s = self.stamp.image
        for v, p in enumerate(self.tree.parents, 1):
            if p != ROOT and s[p - 1] >= s[v - 1]:
                raise NotAStampHistory(
                    v, p,
                    f"not a stamp history: edge {v}->{p} has stamps "
                    f"{s[v - 1]}->{s[p - 1]}",
                )

    @property
    def n(self) -> int:
        return self.tree.n

    def to_line(self) -> str:
        return format_decorated(self)


def _check_label(v: int, n: int) -> None:
    if not 1 <= v <= n:
        raise IndexError(f"label {v} out of range [1, {n}]")


def is_increasing(tree: RootedTree) -> bool:
    return all(p < v for v, p in enumerate(tree.parents, 1) if p != ROOT)


def relabel(tree: RootedTree, sigma: Permutation) -> RootedTree:
    """The tree with edges ``sigma(u) sigma(v)`` for every edge ``uv``."""
    if tree.n != sigma.n:
        raise ValueError(f"size mismatch: tree has {tree.n} vertices, permutation {sigma.n}")
    parents = [ROOT] * tree.n
    for v, p in enumerate(tree.parents, 1):
        if p != ROOT:
            parents[sigma(v) - 1] = sigma(p)
    return RootedTree(tuple(parents))


def validate_decorated(tree: RootedTree, stamp: Permutation) -> DecoratedTree:
    """Return ``(tree, stamp)`` as a DecoratedTree or raise NotAStampHistory."""
    if tree.n != stamp.n:
        raise ValueError(f"size mismatch: tree has {tree.n} vertices, permutation {stamp.n}")
    return DecoratedTree(tree, stamp)


def degree(tree: RootedTree, v: int) -> int:
    _check_label(v, tree.n)
    return sum(1 for p in tree.parents if p == v)


def degree_sequence(tree: RootedTree) -> list[int]:
    deg = [0] * (tree.n + 1)
    for p in tree.parents:
        deg[p] += 1
    return deg[1:]


def increasing_form(dt: DecoratedTree) -> tuple[RootedTree, Permutation]:
    """The bijection onto (increasing tree, permutation) pairs."""
    return relabel(dt.tree, dt.stamp), dt.stamp


def from_increasing_form(inc: RootedTree, stamp: Permutation) -> DecoratedTree:
    if not is_increasing(inc):
        raise ValueError("first argument must be an increasing tree")
    return DecoratedTree(relabel(inc, stamp.inverse()), stamp)


def decorated_count(n: int) -> int:
    return math.factorial(n) * math.factorial(n - 1)


def increasing_trees(n: int) -> Iterator[RootedTree]:
    """All (n-1)! increasing trees: vertex j picks a parent in [1, j-1]."""
    for choice in itertools.product(*(range(1, j) for j in range(2, n + 1))):
        yield RootedTree((ROOT,) + choice)


def enumerate_decorated(n: int, bound: int = DEFAULT_ENUMERATION_BOUND) -> Iterator[DecoratedTree]:
    """Every element of D_n exactly once, n!(n-1)! in total."""
    if n < 1:
        raise ValueError("n must be positive")
    if n > bound:
        raise ValueError(f"n={n} exceeds the enumeration bound {bound} "
                         f"({decorated_count(n)} decorated trees)")
    incs = list(increasing_trees(n))
    for image in itertools.permutations(range(1, n + 1)):
        sigma = Permutation(image)
        inv = sigma.inverse()
        for inc in incs:
            yield DecoratedTree(relabel(inc, inv), sigma)


def random_decorated(n: int, rng: np.random.Generator) -> DecoratedTree:
    """Uniform element of D_n via a uniform recursive tree and a uniform stamp.

    Consumes ``rng.random()`` in the same order as the compiled sampler in
    ``robinhood._kernels`` so both give identical output for a given stream.
    """
    par = [ROOT] * (n + 1)
    for j in range(2, n + 1):
        par[j] = int(rng.random() * (j - 1)) + 1
    inv = list(range(n + 1))  # stamp -> label
    for s in range(n, 1, -1):
        t = int(rng.random() * s) + 1
        inv[s], inv[t] = inv[t], inv[s]
    return from_stamp_arrays(par, inv, n)


def from_stamp_arrays(par, inv, n: int) -> DecoratedTree:
    """Build a DecoratedTree from stamp-indexed arrays.

    ``par[s]`` is the stamp of the parent of the vertex with stamp ``s``
    (0 for the root, which has stamp 1) and ``inv[s]`` is its label.
    Index 0 of both arrays is unused.
    """
    parents = [ROOT] * n
    image = [0] * n
    for s in range(1, n + 1):
        v = int(inv[s])
        image[v - 1] = s
        if s > 1:
            parents[v - 1] = int(inv[int(par[s])])
    return DecoratedTree(RootedTree(tuple(parents)), Permutation(tuple(image)))


def to_stamp_arrays(dt: DecoratedTree) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`from_stamp_arrays` (arrays of length n + 1)."""
    n = dt.n
    par = np.zeros(n + 1, dtype=np.int64)
    inv = np.zeros(n + 1, dtype=np.int64)
    for v in range(1, n + 1):
        s = dt.stamp(v)
        inv[s] = v
        p = dt.tree.parent(v)
        par[s] = dt.stamp(p) if p != ROOT else ROOT
    return par, inv


def format_decorated(dt: DecoratedTree) -> str:
    return (f"{dt.n};{','.join(map(str, dt.tree.parents))};"
            f"{','.join(map(str, dt.stamp.image))}")


def parse_decorated(line: str) -> DecoratedTree:
    try:
        n_field, p_field, s_field = line.strip().split(";")
        n = int(n_field)
        parents = tuple(int(t) for t in p_field.split(","))
        image = tuple(int(t) for t in s_field.split(","))
    except ValueError as exc:
        raise ValueError(f"malformed decorated-tree line {line!r}") from exc
    if len(parents) != n or len(image) != n:
        raise ValueError(f"line {line!r} does not list {n} parents and {n} stamps")
    return validate_decorated(RootedTree(parents), Permutation(image))
