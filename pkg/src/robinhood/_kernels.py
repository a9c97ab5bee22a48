"""Compiled samplers working in stamp space.

A decorated tree of size ``n`` is held as two arrays of length ``n + 1``:
``par[s]`` is the stamp of the parent of the stamp-``s`` vertex (0 for the
root, stamp 1) and ``inv[s]`` is that vertex's label. Random numbers come
from an SFC64 state through ``next_double`` and are consumed in the same
order as the pure-Python samplers, so both give identical output.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from .rng import next_double

BASE_DIRECT = 0
BASE_GROW = 1

# coupling counters
C_TRIALS, C_DOM_K, C_DOM_L, C_DOM_X, C_CONTAIN, C_DIFF, C_JN, C_QP, C_FIXUP, C_FACT, \
    C_VIOL, C_VIOL_TRIALS, C_IN, C_VIOL_SQ = range(14)
N_COUNTERS = 14


@njit(nogil=True)
def recursive_into(par, n, st):
    par[1] = 0
    for j in range(2, n + 1):
        par[j] = int(next_double(st) * (j - 1)) + 1


@njit(nogil=True)
def shuffle_into(inv, n, st):
    for s in range(n + 1):
        inv[s] = s
    for s in range(n, 1, -1):
        t = int(next_double(st) * s) + 1
        tmp = inv[s]
        inv[s] = inv[t]
        inv[t] = tmp


@njit(nogil=True)
def draw_hset(n, st, full, bits):
    """Return ``(k, l)`` and fill ``bits[i]`` for ``i`` from ``k`` (or 1) to ``n - 1``."""
    k = int(next_double(st) * n) + 1
    l = 0
    if k > 1:
        l = int(next_double(st) * (k - 1)) + 1
    start = 1 if full else k
    for i in range(start, n):
        bits[i] = 1 if next_double(st) * i < 1.0 else 0
    return k, l


@njit(nogil=True)
def prune_inplace(par, inv, n_old, k, l, bits):
    """Insert vertex ``n_old + 1`` with stamp ``k``; arrays must have room."""
    for s in range(n_old, k - 1, -1):
        p = par[s]
        if bits[s]:
            par[s + 1] = k
        elif p >= k:
            par[s + 1] = p + 1
        else:
            par[s + 1] = p
        inv[s + 1] = inv[s]
    par[k] = l
    inv[k] = n_old + 1


@njit(nogil=True)
def grow_into(par, inv, n, st, bits):
    par[1] = 0
    inv[1] = 1
    for size in range(2, n + 1):
        k, l = draw_hset(size, st, False, bits)
        prune_inplace(par, inv, size - 1, k, l, bits)


@njit(nogil=True)
def base_into(par, inv, n, st, mode, bits):
    if mode == BASE_GROW:
        grow_into(par, inv, n, st, bits)
    else:
        recursive_into(par, n, st)
        shuffle_into(inv, n, st)


@njit(nogil=True)
def label_degrees(par, inv, n, deg):
    for v in range(n + 1):
        deg[v] = 0
    for s in range(2, n + 1):
        deg[inv[par[s]]] += 1


@njit(nogil=True)
def sample_trees(trials, n, st, mode):
    par = np.zeros((trials, n + 2), dtype=np.int64)
    inv = np.zeros((trials, n + 2), dtype=np.int64)
    bits = np.zeros(n + 1, dtype=np.int8)
    for t in range(trials):
        base_into(par[t], inv[t], n, st, mode, bits)
    return par[:, : n + 1], inv[:, : n + 1]


@njit(nogil=True)
def degree_stats(trials, n, ms, st):
    """Degree summaries of ``trials`` recursive trees of size ``n``.

    Returns ``z[t, j] = #{v : deg(v) >= ms[j]}``, the maximum degree, and the
    degrees of a uniform pair of distinct stamps (two doubles after the tree).
    """
    nm = ms.shape[0]
    z = np.zeros((trials, nm), dtype=np.int64)
    maxdeg = np.zeros(trials, dtype=np.int64)
    pair = np.zeros((trials, 2), dtype=np.int64)
    cnt = np.zeros(n + 1, dtype=np.int64)
    hist = np.zeros(n + 1, dtype=np.int64)
    for t in range(trials):
        cnt[:] = 0
        hist[:] = 0
        for j in range(2, n + 1):
            cnt[int(next_double(st) * (j - 1)) + 1] += 1
        top = 0
        for v in range(1, n + 1):
            d = cnt[v]
            hist[d] += 1
            if d > top:
                top = d
        maxdeg[t] = top
        for j in range(nm):
            acc = 0
            for d in range(ms[j], top + 1):
                acc += hist[d]
            z[t, j] = acc
        if n >= 2:
            a = int(next_double(st) * n) + 1
            b = int(next_double(st) * (n - 1)) + 1
            if b >= a:
                b += 1
            pair[t, 0] = cnt[a]
            pair[t, 1] = cnt[b]
    return z, maxdeg, pair


@njit(nogil=True)
def hset_batch(trials, n, st, full):
    """Columns: K, L, yield ``sum_{i >= K} x_i``, and ``x_1`` (-1 when not drawn)."""
    out = np.zeros((trials, 4), dtype=np.int64)
    bits = np.zeros(n + 1, dtype=np.int8)
    for t in range(trials):
        k, l = draw_hset(n, st, full, bits)
        y = 0
        for i in range(k, n):
            y += bits[i]
        out[t, 0] = k
        out[t, 1] = l
        out[t, 2] = y
        out[t, 3] = bits[1] if (full or k == 1) else -1
    return out


@njit(nogil=True)
def new_vertex(trials, n, st, mode):
    """Degree of vertex ``n`` after one pruning step from a uniform ``D_{n-1}`` tree.

    Returns the degrees and the number of draws where the degree differs
    from the rewire count ``sum_{i >= k} x_i``.
    """
    out = np.zeros(trials, dtype=np.int64)
    mismatch = 0
    par = np.zeros(n + 2, dtype=np.int64)
    inv = np.zeros(n + 2, dtype=np.int64)
    bits = np.zeros(n + 1, dtype=np.int8)
    for t in range(trials):
        base_into(par, inv, n - 1, st, mode, bits)
        k, l = draw_hset(n, st, False, bits)
        expected = 0
        for i in range(k, n):
            expected += bits[i]
        prune_inplace(par, inv, n - 1, k, l, bits)
        d = 0
        for s in range(k + 1, n + 1):
            if par[s] == k:
                d += 1
        out[t] = d
        if d != expected:
            mismatch += 1
    return out, mismatch


@njit(nogil=True)
def draw_coupled(n, m, st, cum, kmax, q, bits, bits2):
    """One coupled pair of parameter sets.

    Reads ``U1``, ``U2`` and then one uniform per index ``i = K'..n-1``.
    Returns ``(k, l, k2, l2, fixup, q_below_p)``.
    """
    u1 = next_double(st)
    u2 = next_double(st)
    k = int(u1 * n) + 1
    k2 = np.searchsorted(cum[:kmax], u1)
    if k2 < 1:
        k2 = 1
    fix = 0
    if k2 > k:
        k2 = k
        fix = 1
    l = int(u2 * (k - 1)) + 1 if k > 1 else 0
    l2 = int(u2 * (k2 - 1)) + 1 if k2 > 1 else 0
    r = m
    qbad = 0
    for i in range(k2, n):
        u = next_double(st)
        p = 1.0 / i
        qi = q[i, r]
        if qi < p:
            qbad += 1
        bits[i] = 1 if u < p else 0
        if u < qi:
            bits2[i] = 1
            if r > 0:
                r -= 1
        else:
            bits2[i] = 0
    return k, l, k2, l2, fix, qbad


@njit(nogil=True)
def coupled_hset_batch(trials, n, m, st, cum, kmax, q):
    """Columns: K, L, K', L', plain yield, conditioned yield, fixup, q<p, X>X' count."""
    out = np.zeros((trials, 9), dtype=np.int64)
    bits = np.zeros(n + 1, dtype=np.int8)
    bits2 = np.zeros(n + 1, dtype=np.int8)
    for t in range(trials):
        k, l, k2, l2, fix, qbad = draw_coupled(n, m, st, cum, kmax, q, bits, bits2)
        y = 0
        for i in range(k, n):
            y += bits[i]
        y2 = 0
        bad = 0
        for i in range(k2, n):
            y2 += bits2[i]
            if bits[i] > bits2[i]:
                bad += 1
        out[t, 0] = k
        out[t, 1] = l
        out[t, 2] = k2
        out[t, 3] = l2
        out[t, 4] = y
        out[t, 5] = y2
        out[t, 6] = fix
        out[t, 7] = qbad
        out[t, 8] = bad
    return out


@njit(nogil=True)
def coupled_trees_batch(trials, n, m, st, mode, cum, kmax, q):
    """Run the coupled tree pair ``trials`` times and count every sure-event failure.

    Returns the counter vector (see ``C_*``) and per-label counts of
    ``{I_v < J_v}`` for ``v = 1..n-1``.
    """
    counters = np.zeros(N_COUNTERS, dtype=np.int64)
    viol = np.zeros(n + 1, dtype=np.int64)
    par = np.zeros(n + 2, dtype=np.int64)
    inv = np.zeros(n + 2, dtype=np.int64)
    par2 = np.zeros(n + 2, dtype=np.int64)
    inv2 = np.zeros(n + 2, dtype=np.int64)
    stamp = np.zeros(n + 1, dtype=np.int64)
    d0 = np.zeros(n + 2, dtype=np.int64)
    d1 = np.zeros(n + 2, dtype=np.int64)
    d2 = np.zeros(n + 2, dtype=np.int64)
    bits = np.zeros(n + 1, dtype=np.int8)
    bits2 = np.zeros(n + 1, dtype=np.int8)
    for t in range(trials):
        base_into(par, inv, n - 1, st, mode, bits)
        label_degrees(par, inv, n - 1, d0)
        for s in range(1, n):
            stamp[inv[s]] = s
        par2[: n] = par[: n]
        inv2[: n] = inv[: n]
        k, l, k2, l2, fix, qbad = draw_coupled(n, m, st, cum, kmax, q, bits, bits2)
        counters[C_TRIALS] += 1
        counters[C_FIXUP] += fix
        counters[C_QP] += qbad
        if k2 > k:
            counters[C_DOM_K] += 1
        if l2 > l:
            counters[C_DOM_L] += 1
        y = 0
        y2 = 0
        for i in range(k2, n):
            if bits[i] > bits2[i]:
                counters[C_DOM_X] += 1
            y2 += bits2[i]
            if i >= k:
                y += bits[i]
        prune_inplace(par, inv, n - 1, k, l, bits)
        prune_inplace(par2, inv2, n - 1, k2, l2, bits2)
        label_degrees(par, inv, n, d1)
        label_degrees(par2, inv2, n, d2)
        if d1[n] != y or d2[n] != y2:
            counters[C_FACT] += 1
        if d2[n] < m:
            counters[C_JN] += 1
        if d1[n] >= m:
            counters[C_IN] += 1
        nviol = 0
        for v in range(1, n):
            hit = 1 if stamp[v] == l2 else 0
            if d2[v] - d1[v] > hit:
                counters[C_DIFF] += 1
            if d1[v] < m and d2[v] >= m:
                viol[v] += 1
                nviol += 1
                if hit == 0 or d0[v] < m - 1:
                    counters[C_CONTAIN] += 1
        counters[C_VIOL] += nviol
        counters[C_VIOL_SQ] += nviol * nviol
        if nviol:
            counters[C_VIOL_TRIALS] += 1
    return counters, viol
