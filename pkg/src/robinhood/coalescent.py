"""Kingman's coalescent as a chain of forests, and its bijection with decorated trees.

A trace lists one merge event per forest size ``i = n, n-1, ..., 2``. At size
``i`` the trees are indexed ``1..i`` in increasing order of their smallest
label; event ``(a, b, xi)`` with ``a < b`` joins the roots of trees ``a`` and
``b`` and directs the new edge toward tree ``a``'s root when ``xi = 1``.

Text format: the line ``n`` followed by one line ``i:a,b,xi`` per event.
"""
from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass

import numpy as np
from scipy.cluster.hierarchy import DisjointSet

from .trees import ROOT, DecoratedTree, Permutation, RootedTree


@dataclass(frozen=True)
class CoalescentTrace:
    n: int
    merges: tuple[tuple[int, int, int], ...]  # merges[t] is the event at size n - t

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if len(self.merges) != self.n - 1:
            raise ValueError(f"expected {self.n - 1} merge events, got {len(self.merges)}")
        for t, (a, b, xi) in enumerate(self.merges):
            i = self.n - t
            if not 1 <= a < b <= i or xi not in (0, 1):
                raise ValueError(f"invalid event {(a, b, xi)} at forest size {i}")

    def event(self, i: int) -> tuple[int, int, int]:
        """The merge applied to the forest with ``i`` trees."""
        return self.merges[self.n - i]

    def to_lines(self) -> list[str]:
        return [str(self.n)] + [
            f"{self.n - t}:{a},{b},{xi}" for t, (a, b, xi) in enumerate(self.merges)
        ]

    @classmethod
    def from_lines(cls, lines) -> "CoalescentTrace":
        lines = [ln.strip() for ln in lines if ln.strip()]
        n = int(lines[0])
        merges = []
        for t, line in enumerate(lines[1:]):
            i_field, rest = line.split(":")
            if int(i_field) != n - t:
                raise ValueError(f"expected event for size {n - t}, got {line!r}")
            a, b, xi = (int(s) for s in rest.split(","))
            merges.append((a, b, xi))
        return cls(n, tuple(merges))


def _pair_tables(n: int) -> tuple[list[np.ndarray], list[np.ndarray]]:
    a_tab, b_tab = [None, None], [None, None]
    for i in range(2, n + 1):
        a, b = np.triu_indices(i, k=1)
        a_tab.append(a + 1)
        b_tab.append(b + 1)
    return a_tab, b_tab


def sample_kingman_batch(n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` independent traces as an int array of shape ``(size, n-1, 3)``.

    Column ``t`` holds the event at forest size ``n - t``: a uniform pair
    ``a < b`` of tree indices and a fair coin ``xi``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    out = np.empty((size, max(n - 1, 0), 3), dtype=np.int64)
    a_tab, b_tab = _pair_tables(n)
    for t, i in enumerate(range(n, 1, -1)):
        idx = rng.integers(0, i * (i - 1) // 2, size=size)
        out[:, t, 0] = a_tab[i][idx]
        out[:, t, 1] = b_tab[i][idx]
        out[:, t, 2] = rng.integers(0, 2, size=size)
    return out


def sample_kingman(n: int, rng: np.random.Generator) -> CoalescentTrace:
    events = sample_kingman_batch(n, 1, rng)[0]
    return CoalescentTrace(n, tuple((int(a), int(b), int(x)) for a, b, x in events))


def chain_to_decorated(trace: CoalescentTrace) -> DecoratedTree:
    """Replay the chain; the edge added at forest size ``i`` stamps its child ``i``."""
    n = trace.n
    mins = list(range(1, n + 1))
    root_of = {v: v for v in range(1, n + 1)}  # smallest label -> tree root
    parents = [ROOT] * n
    stamps = [0] * n
    for i in range(n, 1, -1):
        a, b, xi = trace.event(i)
        min_a, min_b = mins[a - 1], mins[b - 1]
        ra, rb = root_of[min_a], root_of[min_b]
        child, head = (rb, ra) if xi == 1 else (ra, rb)
        parents[child - 1] = head
        stamps[child - 1] = i  # edge clock i - 1, plus one
        root_of[min_a] = head
        del root_of[min_b]
        mins.pop(b - 1)
    (root,) = root_of.values()
    stamps[root - 1] = 1
    dt = DecoratedTree(RootedTree(tuple(parents)), Permutation(tuple(stamps)))
    _check_edge_clock(dt)
    return dt


def edge_clock(dt: DecoratedTree) -> dict[tuple[int, int], int]:
    """Largest forest index in which each edge ``(child, parent)`` is present."""
    return {(v, p): dt.stamp(v) - 1 for v, p in dt.tree.edges()}


def _check_edge_clock(dt: DecoratedTree) -> None:
    clock = edge_clock(dt)
    assert sorted(clock.values()) == list(range(1, dt.n)), "edge clock is not a bijection"
    for (v, p), rho in clock.items():
        q = dt.tree.parent(p)
        if q != ROOT:
            assert clock[(p, q)] < rho, f"edge clock not decreasing toward the root at {v}"


def decorated_to_chain(dt: DecoratedTree) -> CoalescentTrace:
    """Invert :func:`chain_to_decorated` by replaying edges in decreasing clock order."""
    n = dt.n
    sets = DisjointSet(range(1, n + 1))
    smallest = {v: v for v in range(1, n + 1)}  # representative -> smallest label
    mins = list(range(1, n + 1))
    inv = dt.stamp.inverse()
    merges = []
    for i in range(n, 1, -1):
        child = inv(i)
        head = dt.tree.parent(child)
        m_child, m_head = smallest[sets[child]], smallest[sets[head]]
        pos_child = bisect_left(mins, m_child) + 1
        pos_head = bisect_left(mins, m_head) + 1
        a, b = sorted((pos_child, pos_head))
        xi = 1 if pos_head == a else 0
        merges.append((a, b, xi))
        del smallest[sets[child]], smallest[sets[head]]
        sets.merge(child, head)
        smallest[sets[child]] = min(m_child, m_head)
        mins.pop(b - 1)
    return CoalescentTrace(n, tuple(merges))


def track_positions(events: np.ndarray, v) -> np.ndarray:
    """Index of the tree holding label ``v`` at every forest size, vectorized.

    ``events`` has shape ``(size, n-1, 3)`` (or ``(n-1, 3)``). Returns an
    array ``pos`` of shape ``(size, n-1)`` with ``pos[:, t]`` the index of
    ``v``'s tree just before the merge at forest size ``n - t``. The merged
    tree inherits index ``a``; indices above ``b`` shift down by one.
    """
    events = np.asarray(events)
    if events.ndim == 2:
        events = events[None]
    size, steps, _ = events.shape
    pos = np.empty((size, steps), dtype=np.int64)
    cur = np.broadcast_to(np.asarray(v, dtype=np.int64), (size,)).copy()
    for t in range(steps):
        a, b = events[:, t, 0], events[:, t, 1]
        pos[:, t] = cur
        cur = np.where(cur == b, a, cur - (cur > b))
    return pos


def selection_sizes(events: np.ndarray, v) -> np.ndarray:
    """``|S_n(v)|`` for each trace in a batch."""
    events = np.asarray(events)
    if events.ndim == 2:
        events = events[None]
    pos = track_positions(events, v)
    hit = (pos == events[:, :, 0]) | (pos == events[:, :, 1])
    return hit.sum(axis=1)


def selection_set(trace: CoalescentTrace, v: int) -> set[int]:
    """Forest sizes ``j`` at which the tree containing ``v`` takes part in the merge."""
    n = trace.n
    if not 1 <= v <= n:
        raise IndexError(f"label {v} out of range [1, {n}]")
    if n == 1:
        return set()
    events = np.array(trace.merges, dtype=np.int64)
    pos = track_positions(events, v)[0]
    sizes = range(n, 1, -1)
    return {i for t, i in enumerate(sizes) if pos[t] in (events[t, 0], events[t, 1])}


def tau_batch(events: np.ndarray, v, w) -> np.ndarray:
    """Forest size at which the trees of ``v`` and ``w`` merge, per trace."""
    events = np.asarray(events)
    if events.ndim == 2:
        events = events[None]
    n = events.shape[1] + 1
    pv, pw = track_positions(events, v), track_positions(events, w)
    a, b = events[:, :, 0], events[:, :, 1]
    joined = ((pv == a) & (pw == b)) | ((pv == b) & (pw == a))
    first = joined.argmax(axis=1)  # every pair merges by forest size 2
    return n - first


def tau(trace: CoalescentTrace, v: int, w: int) -> int:
    """``max(S_n(v) & S_n(w))``: the forest size where ``v`` and ``w`` first share a tree."""
    if v == w:
        raise ValueError("tau needs two distinct labels")
    for label in (v, w):
        if not 1 <= label <= trace.n:
            raise IndexError(f"label {label} out of range [1, {trace.n}]")
    events = np.array(trace.merges, dtype=np.int64)
    return int(tau_batch(events, v, w)[0])


def selection_sets_by_replay(trace: CoalescentTrace) -> dict[int, set[int]]:
    """All selection sets from a direct forest replay (reference for the tracker)."""
    n = trace.n
    members = {v: {v} for v in range(1, n + 1)}  # smallest label -> members
    mins = list(range(1, n + 1))
    out = {v: set() for v in range(1, n + 1)}
    for i in range(n, 1, -1):
        a, b, _ = trace.event(i)
        ma, mb = mins[a - 1], mins[b - 1]
        for v in members[ma] | members[mb]:
            out[v].add(i)
        members[ma] |= members.pop(mb)
        mins.pop(b - 1)
    return out


def kingman_tree_counts(n: int, size: int, rng: np.random.Generator) -> dict[str, int]:
    """How often each decorated tree (text form) arises from ``size`` Kingman traces."""
    events = sample_kingman_batch(n, size, rng).reshape(size, -1)
    uniq, counts = np.unique(events, axis=0, return_counts=True)
    out: dict[str, int] = {}
    for row, count in zip(uniq, counts):
        merges = tuple(tuple(int(x) for x in row[3 * t: 3 * t + 3]) for t in range(n - 1))
        key = chain_to_decorated(CoalescentTrace(n, merges)).to_line()
        out[key] = out.get(key, 0) + int(count)
    return out
