from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from robinhood import _kernels as K
from robinhood.exact import hset_cases, transition_distribution
from robinhood.pruning import (
    GrowthTrace,
    HSet,
    grow_process,
    prune_deterministic,
    prune_set,
    robin_hood_step,
    sample_hset,
    singleton,
)
from robinhood.rng import bit_generator
from robinhood.trees import (
    Permutation,
    RootedTree,
    degree,
    degree_sequence,
    from_stamp_arrays,
    random_decorated,
    validate_decorated,
)

seeds = st.integers(0, 2**32 - 1)
EDGE = validate_decorated(RootedTree((0, 1)), Permutation((1, 2)))


def test_prune_set_examples():
    assert prune_set(EDGE, HSet(3, 1, 0, frozenset({1, 2}))) == {1, 2}
    assert prune_set(EDGE, HSet(3, 3, 2, frozenset({1, 2}))) == set()
    assert prune_set(EDGE, HSet(3, 2, 1, frozenset({1}))) == set()
    with pytest.raises(ValueError):
        prune_set(EDGE, HSet(4, 2, 1, frozenset({1})))


def test_prune_examples():
    out = prune_deterministic(EDGE, HSet(3, 3, 1, frozenset({1})))
    assert out.tree == RootedTree((0, 1, 1)) and out.stamp == Permutation((1, 2, 3))
    assert degree(out.tree, 3) == 0
    out = prune_deterministic(EDGE, HSet(3, 1, 0, frozenset({1, 2})))
    assert out.tree == RootedTree((3, 3, 0))
    assert out.stamp == Permutation((2, 3, 1))
    assert degree(out.tree, 3) == 2


def test_rewire_configuration_with_k6_l5():
    dt = random_decorated(9, np.random.default_rng(5))
    h = HSet(10, 6, 5, frozenset({1, 2, 7, 8}))
    inv = dt.stamp.inverse()
    out = prune_deterministic(dt, h)
    assert prune_set(dt, h) == {inv(7), inv(8)}
    assert set(out.tree.children(10)) == {inv(7), inv(8)}
    assert out.tree.parent(10) == inv(5)
    assert degree(out.tree, 10) == 2 == h.yield_()
    assert out.stamp(10) == 6


def test_hset_validation():
    with pytest.raises(ValueError):
        HSet(3, 1, 1, frozenset({1}))
    with pytest.raises(ValueError):
        HSet(3, 1, 0, frozenset())
    with pytest.raises(ValueError):
        HSet(3, 2, 2, frozenset())
    with pytest.raises(ValueError):
        HSet(3, 2, 1, frozenset({3}))
    with pytest.raises(ValueError):
        HSet(4, 3, 1, frozenset({1}), full=False)
    lazy = HSet(5, 3, 2, frozenset({4}), full=False)
    with pytest.raises(LookupError):
        lazy.bit(2)
    assert HSet.from_line(5, lazy.to_line()) == lazy
    full = HSet(5, 3, 2, frozenset({1, 4}))
    assert HSet.from_line(5, full.to_line()) == full


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 30), seeds)
def test_lazy_and_full_give_the_same_tree(n, seed):
    rng = np.random.default_rng(seed)
    dt = random_decorated(n - 1, rng)
    full = sample_hset(n, rng, full=True)
    lazy = HSet(n, full.k, full.l, frozenset(i for i in full.ones if i >= full.k), full=False)
    assert prune_deterministic(dt, full) == prune_deterministic(dt, lazy)


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 40), seeds)
def test_stamp_update_and_bookkeeping(n, seed):
    rng = np.random.default_rng(seed)
    dt = random_decorated(n - 1, rng)
    h = sample_hset(n, rng)
    out = prune_deterministic(dt, h)  # asserts the degree bookkeeping itself
    assert out.stamp(n) == h.k
    for v in range(1, n):
        s = dt.stamp(v)
        assert out.stamp(v) == s + (s >= h.k)
    assert degree_sequence(out.tree)[n - 1] == h.yield_()


def test_hset_marginals():
    n, trials = 10, 1_000_000
    bg = bit_generator(7)
    out = K.hset_batch(trials, n, bg.ctypes.state_address, True)
    counts = np.bincount(out[:, 0], minlength=n + 1)[1:]
    se = np.sqrt((1 / n) * (1 - 1 / n) / trials)
    assert np.all(np.abs(counts / trials - 1 / n) <= 3 * se)
    assert np.all(out[:, 3] == 1)
    for k in (2, 5, 10):
        ls = out[out[:, 0] == k, 1]
        assert ls.min() >= 1 and ls.max() <= k - 1


@pytest.mark.parametrize("n", [2, 5, 50])
def test_yield_mean(n, request):
    mean = 1 - Fraction(1, n)
    if n <= 8:
        assert sum(p * h.yield_() for h, p in hset_cases(n)) == mean
    exact_sum = sum(Fraction(1, n) * sum(Fraction(1, i) for i in range(k, n)) for k in range(1, n + 1))
    assert exact_sum == mean
    trials = 200_000
    bg = bit_generator(8, n)
    y = K.hset_batch(trials, n, bg.ctypes.state_address, False)[:, 2]
    assert abs(y.mean() - float(mean)) <= 3 * y.std() / np.sqrt(trials)


def test_step_from_singleton_is_uniform_on_d2():
    row = transition_distribution(singleton())
    assert sorted(row.values()) == [Fraction(1, 2), Fraction(1, 2)]
    rng = np.random.default_rng(0)
    dt, h = robin_hood_step(singleton(), rng)
    assert dt.n == 2 and h.n == 2


def test_process_is_not_increasing():
    # a last step with k = 1 puts the old root under the new vertex
    t2 = EDGE
    t3 = prune_deterministic(t2, HSet(3, 1, 0, frozenset({1}), full=False))
    assert t3.tree.parent(1) == 3
    assert t2.tree.parent(1) == 0


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 25), seeds)
def test_growth_trace_round_trip(n, seed):
    trace = grow_process(n, np.random.default_rng(seed))
    assert trace.replay()
    assert GrowthTrace.from_lines(trace.to_lines()) == trace
    assert trace.trees[0] == singleton()
    assert [t.n for t in trace.trees] == list(range(1, n + 1))


def test_tampered_trace_is_rejected():
    trace = grow_process(6, np.random.default_rng(4))
    lines = trace.to_lines()
    h = HSet.from_line(3, lines[3])
    other = next(c for c, _ in hset_cases(3) if (c.k, c.l) != (h.k, h.l))
    lines[3] = other.to_line()
    with pytest.raises(ValueError):
        GrowthTrace.from_lines(lines)


def test_grown_trees_uniform_on_d4():
    trials = 1_000_000
    bg = bit_generator(9)
    par, inv = K.sample_trees(trials, 4, bg.ctypes.state_address, K.BASE_GROW)
    keys, counts = np.unique(np.hstack([par[:, 1:], inv[:, 1:]]), axis=0, return_counts=True)
    assert len(keys) == 144
    lines = {from_stamp_arrays(np.r_[0, k[:4]], np.r_[0, k[4:]], 4).to_line() for k in keys}
    assert len(lines) == 144
    assert sps.chisquare(counts).pvalue >= 1e-3


def test_shape_law_recursive():
    n, trials = 64, 100_000
    bg = bit_generator(10)
    par, _ = K.sample_trees(trials, n, bg.ctypes.state_address, K.BASE_GROW)
    worst = 1.0
    for j in range(2, n + 1):
        counts = np.bincount(par[:, j], minlength=j)[1:j]
        worst = min(worst, sps.chisquare(counts).pvalue)
    # 63 tests at once: Bonferroni at 1e-3
    assert worst >= 1e-3 / 63
