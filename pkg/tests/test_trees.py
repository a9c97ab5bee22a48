import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robinhood.trees import (
    NotAStampHistory,
    Permutation,
    RootedTree,
    decorated_count,
    degree,
    degree_sequence,
    enumerate_decorated,
    format_decorated,
    from_increasing_form,
    from_stamp_arrays,
    increasing_form,
    increasing_trees,
    is_increasing,
    parse_decorated,
    random_decorated,
    relabel,
    to_stamp_arrays,
    validate_decorated,
)

seeds = st.integers(0, 2**32 - 1)
sizes = st.integers(1, 40)


def star_root2():
    # root 2 with children 1 and 3
    return RootedTree((2, 0, 2))


def test_is_increasing_examples():
    assert is_increasing(RootedTree((0, 1, 2)))
    assert not is_increasing(RootedTree((0, 3, 1)))
    assert is_increasing(RootedTree((0,)))


def test_relabel_examples():
    t = star_root2()
    assert relabel(t, Permutation.identity(3)) == t
    sigma = Permutation((2, 1, 3))
    assert relabel(t, sigma) == RootedTree((0, 1, 1))
    with pytest.raises(ValueError):
        relabel(t, Permutation.identity(2))


def test_validate_examples():
    edge = RootedTree((0, 1))
    validate_decorated(edge, Permutation.identity(2))
    with pytest.raises(NotAStampHistory) as info:
        validate_decorated(edge, Permutation((2, 1)))
    assert (info.value.child, info.value.parent) == (2, 1)
    validate_decorated(star_root2(), Permutation((2, 1, 3)))


def test_degree_examples():
    star = RootedTree((0, 1, 1, 1))
    assert degree(star, 1) == 3
    assert all(degree(star, v) == 0 for v in (2, 3, 4))
    with pytest.raises(IndexError):
        degree(star, 5)


def test_tree_validation_errors():
    with pytest.raises(ValueError):
        RootedTree((0, 0))
    with pytest.raises(ValueError):
        RootedTree((0, 3, 2))  # 2 and 3 form a cycle
    with pytest.raises(ValueError):
        RootedTree((0, 5))
    with pytest.raises(ValueError):
        Permutation((1, 1))


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_enumeration_counts(n):
    items = list(enumerate_decorated(n))
    assert len(items) == decorated_count(n) == math.factorial(n) * math.factorial(n - 1)
    assert len({format_decorated(dt) for dt in items}) == len(items)


def test_enumeration_bound():
    with pytest.raises(ValueError):
        next(enumerate_decorated(7))
    assert sum(1 for _ in increasing_trees(5)) == 24


def test_increasing_form_bijection_on_d4():
    seen = set()
    for dt in enumerate_decorated(4):
        inc, sigma = increasing_form(dt)
        assert is_increasing(inc)
        assert from_increasing_form(inc, sigma) == dt
        seen.add((inc, sigma))
    assert len(seen) == 144


def test_permutation_algebra():
    a, b = Permutation((2, 3, 1)), Permutation((3, 1, 2))
    assert a.compose(a.inverse()) == Permutation.identity(3)
    assert a.compose(b)(1) == a(b(1))


@settings(max_examples=60, deadline=None)
@given(sizes, seeds)
def test_random_decorated_round_trips(n, seed):
    dt = random_decorated(n, np.random.default_rng(seed))
    assert parse_decorated(format_decorated(dt)) == dt
    par, inv = to_stamp_arrays(dt)
    assert from_stamp_arrays(par, inv, n) == dt
    inc, sigma = increasing_form(dt)
    assert is_increasing(inc)
    assert from_increasing_form(inc, sigma) == dt
    assert sum(degree_sequence(dt.tree)) == n - 1


@settings(max_examples=60, deadline=None)
@given(sizes, seeds)
def test_relabel_preserves_degree_multiset(n, seed):
    rng = np.random.default_rng(seed)
    dt = random_decorated(n, rng)
    sigma = Permutation.from_image(rng.permutation(n) + 1)
    assert sorted(degree_sequence(relabel(dt.tree, sigma))) == sorted(degree_sequence(dt.tree))


def test_parse_rejects_malformed():
    with pytest.raises(ValueError):
        parse_decorated("3;0,1;1,2,3")
    with pytest.raises(ValueError):
        parse_decorated("x;y;z")
    with pytest.raises(NotAStampHistory):
        parse_decorated("2;0,1;2,1")
