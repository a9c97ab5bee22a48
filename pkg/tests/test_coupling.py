import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from robinhood import _kernels as K
from robinhood.coupling import (
    conditioned_x,
    coupled_hsets,
    coupled_kl,
    coupled_trees,
    coupling_tables,
    estimate_violation,
)
from robinhood.exact import pb_tail, rewire_probs
from robinhood.rng import bit_generator
from numpy.random import Generator

seeds = st.integers(0, 2**32 - 1)


def rejection_x(n, k, m, size, rng):
    """Independent oracle: i.i.d. Ber(1/i) rows kept when the suffix from k has >= m ones."""
    p = 1.0 / np.arange(1, n)
    out = []
    got = 0
    while got < size:
        x = rng.random((200_000, n - 1)) < p
        keep = x[x[:, k - 1:].sum(axis=1) >= m]
        out.append(keep)
        got += len(keep)
    return np.vstack(out)[:size]


def rejection_hsets(n, m, size, rng):
    """Rows (K, suffix sum) of plain parameter sets kept when the suffix sum is >= m."""
    p = 1.0 / np.arange(1, n)
    ks, ys = [], []
    got = 0
    while got < size:
        k = rng.integers(1, n + 1, size=200_000)
        x = rng.random((200_000, n - 1)) < p
        mask = np.arange(1, n) >= k[:, None]
        y = (x & mask).sum(axis=1)
        keep = y >= m
        ks.append(k[keep])
        ys.append(y[keep])
        got += keep.sum()
    return np.concatenate(ks)[:size], np.concatenate(ys)[:size]


def test_vacuous_conditioning():
    rng = np.random.default_rng(0)
    for _ in range(200):
        x, xc = conditioned_x(12, 4, 0, rng)
        assert x == xc
    for u1 in np.linspace(0.001, 0.999, 97):
        (k, l), (k2, l2) = coupled_kl(9, 0, u=(u1, 0.37))
        assert (k, l) == (k2, l2)
    h = coupled_hsets(9, 0, rng)
    assert (h.plain.k, h.plain.l, h.plain.ones) == (h.conditioned.k, h.conditioned.l, h.conditioned.ones)


def test_forced_coordinate():
    rng = np.random.default_rng(1)
    seen = set()
    for _ in range(500):
        x, xc = conditioned_x(3, 2, 1, rng)
        assert xc[1] == 1 and x[1] <= xc[1]
        seen.add(x[1])
    assert seen == {0, 1}
    with pytest.raises(ValueError):
        conditioned_x(3, 2, 2, rng)


def test_coupled_kl_example():
    t = coupling_tables(3, 1)
    assert t.p == (Fraction(2, 3), Fraction(1, 3), Fraction(0))
    assert coupled_kl(3, 1, u=(0.5, 0.9)) == ((2, 1), (1, 0))


@pytest.mark.parametrize("n,m", [(10, 2), (30, 5), (256, 8)])
def test_tables(n, m):
    t = coupling_tables(n, m)
    assert sum(t.p) == 1
    assert all(a >= b for a, b in zip(t.p, t.p[1:]))
    weights = [pb_tail(rewire_probs(n), k, m) for k in range(1, n + 1)]
    assert t.p[0] == weights[0] / sum(weights)
    for i in range(1, n):
        assert np.all(t.q[i] >= 1.0 / i)
    assert t.kmax == n - m


def test_conditioned_x_matches_rejection():
    n, k, m, draws = 20, 10, 3, 100_000
    rng = np.random.default_rng(3)
    coupled = np.array([conditioned_x(n, k, m, rng)[1] for _ in range(draws)])
    oracle = rejection_x(n, k, m, draws, np.random.default_rng(4))
    for i in range(n - 1):
        a, b = coupled[:, i].mean(), oracle[:, i].mean()
        se = math.sqrt(a * (1 - a) / draws + b * (1 - b) / draws)
        assert abs(a - b) <= 3 * se + 1e-12, f"coordinate {i + 1}"
    sa = coupled[:, k - 1:].sum(axis=1)
    sb = oracle[:, k - 1:].sum(axis=1)
    top = max(sa.max(), sb.max()) + 1
    table = np.vstack([np.bincount(sa, minlength=top), np.bincount(sb, minlength=top)])
    table = table[:, table.sum(axis=0) > 0]
    assert sps.chi2_contingency(table).pvalue >= 1e-3


def test_k_prime_marginal():
    n, m, draws = 10, 2, 1_000_000
    t = coupling_tables(n, m)
    bg = bit_generator(5)
    out = K.coupled_hset_batch(draws, n, m, bg.ctypes.state_address, t.cum, t.kmax, t.q)
    counts = np.bincount(out[:, 2], minlength=n + 1)[1:]
    for k in range(1, n + 1):
        p = float(t.p[k - 1])
        assert abs(counts[k - 1] / draws - p) <= 3 * math.sqrt(p * (1 - p) / draws) + 1e-12


def test_python_and_kernel_agree():
    n, m = 12, 3
    t = coupling_tables(n, m)
    bg = bit_generator(6)
    out = K.coupled_hset_batch(300, n, m, bg.ctypes.state_address, t.cum, t.kmax, t.q)
    g = Generator(bit_generator(6))
    for row in out:
        h = coupled_hsets(n, m, g)
        got = (h.plain.k, h.plain.l, h.conditioned.k, h.conditioned.l,
               h.plain.yield_(), h.conditioned.yield_())
        assert got == tuple(int(v) for v in row[:6])


def test_domination_never_fails():
    n, m, draws = 40, 4, 1_000_000
    t = coupling_tables(n, m)
    bg = bit_generator(7)
    out = K.coupled_hset_batch(draws, n, m, bg.ctypes.state_address, t.cum, t.kmax, t.q)
    assert np.all(out[:, 2] <= out[:, 0])
    assert np.all(out[:, 3] <= out[:, 1])
    assert np.all(out[:, 8] == 0) and np.all(out[:, 7] == 0)
    assert np.all(out[:, 5] >= m)


def test_conditioned_hsets_match_rejection():
    n, m, draws = 12, 3, 200_000
    t = coupling_tables(n, m)
    bg = bit_generator(8)
    out = K.coupled_hset_batch(draws, n, m, bg.ctypes.state_address, t.cum, t.kmax, t.q)
    k_o, y_o = rejection_hsets(n, m, draws, np.random.default_rng(9))
    cells_a = out[:, 2] * n + out[:, 5]
    cells_b = k_o * n + y_o
    top = max(cells_a.max(), cells_b.max()) + 1
    table = np.vstack([np.bincount(cells_a, minlength=top), np.bincount(cells_b, minlength=top)])
    table = table[:, table.sum(axis=0) > 0]
    assert sps.chi2_contingency(table).pvalue >= 1e-3


@settings(max_examples=30, deadline=None)
@given(st.integers(4, 24), st.data(), seeds)
def test_coupled_trees_sure_events(n, data, seed):
    m = data.draw(st.integers(0, n - 2))
    cd = coupled_trees(n, m, np.random.default_rng(seed), base="direct")
    assert cd.J[n - 1] == 1
    h = cd.hsets
    assert h.conditioned.k <= h.plain.k and h.conditioned.l <= h.plain.l
    for v in cd.violations():
        assert cd.base.stamp(v) == h.conditioned.l


@pytest.mark.parametrize("base", ["grow", "direct"])
def test_kernel_counts_match_python(base):
    n, m, trials = 20, 3, 300
    t = coupling_tables(n, m)
    bg = bit_generator(11)
    counters, viol = K.coupled_trees_batch(trials, n, m, bg.ctypes.state_address,
                                           {"grow": K.BASE_GROW, "direct": K.BASE_DIRECT}[base],
                                           t.cum, t.kmax, t.q)
    g = Generator(bit_generator(11))
    ref = np.zeros(n + 1, dtype=np.int64)
    for _ in range(trials):
        for v in coupled_trees(n, m, g, base=base).violations():
            ref[v] += 1
    assert np.array_equal(viol, ref)
    assert counters[K.C_TRIALS] == trials


def test_estimate_violation_small():
    rep = estimate_violation(40, 0, 10, seed=1)
    assert rep.rate.estimate == 0
    rep = estimate_violation(128, math.ceil(1.3 * math.log(128)), 100_000, seed=2)
    assert rep.sure_events_hold
    assert rep.rate.estimate < 10 / 128
    assert rep.envelope is not None and rep.envelope < 1 / 128


def test_violation_rate_decays():
    c = 1.3
    small = estimate_violation(128, math.ceil(c * math.log(128)), 100_000, seed=3, base="direct")
    large = estimate_violation(1024, math.ceil(c * math.log(1024)), 100_000, seed=3, base="direct")
    assert small.sure_events_hold and large.sure_events_hold
    assert large.rate.estimate < small.rate.estimate
