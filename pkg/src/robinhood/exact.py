"""Exact probability machinery.

Poisson-binomial tails, the exact transition law of the random pruning in
rational arithmetic, finite certificates that the pruning preserves the
uniform law, and closed-form degree tails for recursive trees.
"""
from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .pruning import HSet, prune_deterministic
from .trees import (
    DecoratedTree,
    decorated_count,
    enumerate_decorated,
    format_decorated,
    parse_decorated,
)

KERNEL_BOUND = 5
# rational lambda tables above this size get slow (denominators ~ lcm(1..n))
EXACT_LAMBDA_LIMIT = 600


# --------------------------------------------------------------------------
# Poisson-binomial tails


class PBTail:
    """Tail table ``P(sum_{i=a}^{len} Ber(p_i) >= r)`` for every window start ``a``.

    ``a`` is 1-based and may equal ``len + 1`` (empty window). Thresholds
    above ``max_r`` are not tabulated.
    """

    def __init__(self, probs: Sequence, exact: bool = True, max_r: int | None = None):
        if exact:
            ps = tuple(Fraction(p) for p in probs)
        else:
            ps = tuple(float(p) for p in probs)
        if any(not 0 <= p <= 1 for p in ps):
            raise ValueError("probabilities must lie in [0, 1]")
        self.probs = ps
        self.exact = exact
        size = len(ps)
        self.max_r = size if max_r is None else max_r
        R = self.max_r
        if exact:
            one, zero = Fraction(1), Fraction(0)
            table = [None] * (size + 2)
            table[size + 1] = [one] + [zero] * R
            for a in range(size, 0, -1):
                p, nxt = ps[a - 1], table[a + 1]
                row = [one]
                for r in range(1, R + 1):
                    row.append(p * nxt[r - 1] + (1 - p) * nxt[r])
                table[a] = row
            self._table = table
        else:
            table = np.zeros((size + 2, R + 1))
            table[:, 0] = 1.0
            for a in range(size, 0, -1):
                p = ps[a - 1]
                table[a, 1:] = p * table[a + 1, :-1] + (1.0 - p) * table[a + 1, 1:]
            self._table = table

    def __len__(self) -> int:
        return len(self.probs)

    def tail(self, a: int, r: int):
        if r < 0:
            raise ValueError("threshold must be nonnegative")
        if not 1 <= a <= len(self.probs) + 1:
            raise IndexError(f"window start {a} out of range [1, {len(self.probs) + 1}]")
        if r > len(self.probs) - a + 1:
            return Fraction(0) if self.exact else 0.0
        if r > self.max_r:
            raise ValueError(f"threshold {r} above the tabulated maximum {self.max_r}")
        return self._table[a][r]

    def as_float_array(self) -> np.ndarray:
        """Table as floats, shape ``(len + 2, max_r + 1)``; row 0 unused."""
        if not self.exact:
            return np.array(self._table)
        out = np.zeros((len(self.probs) + 2, self.max_r + 1))
        for a in range(1, len(self.probs) + 2):
            out[a] = [float(v) for v in self._table[a]]
        return out


def pb_tail(probs: Sequence, a: int, r: int, exact: bool = True):
    """``P(sum_{i=a}^{len} Ber(p_i) >= r)``."""
    if r < 0:
        raise ValueError("threshold must be nonnegative")
    if not 1 <= a <= len(probs) + 1:
        raise IndexError(f"window start {a} out of range [1, {len(probs) + 1}]")
    r_cap = min(r, len(probs) - a + 1)
    return PBTail(list(probs)[a - 1:], exact=exact, max_r=max(r_cap, 0)).tail(1, r)


def pb_pmf(probs: Sequence, exact: bool = True) -> list:
    one = Fraction(1) if exact else 1.0
    pmf = [one]
    for p in probs:
        p = Fraction(p) if exact else float(p)
        nxt = [pmf[0] * (1 - p)]
        for r in range(1, len(pmf)):
            nxt.append(pmf[r] * (1 - p) + pmf[r - 1] * p)
        nxt.append(pmf[-1] * p)
        pmf = nxt
    return pmf


def rewire_probs(n: int, exact: bool = True) -> list:
    """Success probabilities ``1/i`` of the rewire bits ``x_1..x_{n-1}``."""
    return [Fraction(1, i) if exact else 1.0 / i for i in range(1, n)]


def selection_probs(n: int, exact: bool = True) -> list:
    """``P(j in S_n(v)) = 2/j`` for ``j = 2..n``."""
    return [Fraction(2, j) if exact else 2.0 / j for j in range(2, n + 1)]


# --------------------------------------------------------------------------
# the transition law of the random pruning


@lru_cache(maxsize=None)
def hset_cases(n: int) -> tuple[tuple[HSet, Fraction], ...]:
    """Every distinguishable parameter set for size ``n`` with its probability.

    Bits below ``k`` are never read by the pruning, so they are summed out
    rather than enumerated.
    """
    cases = []
    for k in range(1, n + 1):
        idx = list(range(max(k, 2), n))
        p_kl = Fraction(1, n) * (1 if k == 1 else Fraction(1, k - 1))
        for l in ([0] if k == 1 else range(1, k)):
            for bits in itertools.product((0, 1), repeat=len(idx)):
                p = p_kl
                for i, b in zip(idx, bits):
                    p *= Fraction(1, i) if b else Fraction(i - 1, i)
                ones = {i for i, b in zip(idx, bits) if b}
                if k == 1:
                    ones.add(1)
                cases.append((HSet(n, k, l, frozenset(ones), full=False), p))
    return tuple(cases)


def transition_distribution(dt: DecoratedTree, bound: int = KERNEL_BOUND + 1) -> dict[str, Fraction]:
    """Exact law of one random pruning step from ``dt``, keyed by text form."""
    n = dt.n + 1
    if n > bound:
        raise ValueError(f"n={n} exceeds the kernel bound {bound}")
    row: dict[str, Fraction] = defaultdict(Fraction)
    for h, p in hset_cases(n):
        row[format_decorated(prune_deterministic(dt, h))] += p
    return dict(row)


@dataclass
class RationalKernel:
    n: int
    rows: dict[str, dict[str, Fraction]]


def transition_kernel(n: int, bound: int = KERNEL_BOUND) -> RationalKernel:
    """Rows for every source in ``D_{n-1}``."""
    if n > bound:
        raise ValueError(f"n={n} exceeds the kernel bound {bound}")
    rows = {format_decorated(dt): transition_distribution(dt, bound)
            for dt in enumerate_decorated(n - 1, bound)}
    return RationalKernel(n, rows)


def pruned_measure(n: int, bound: int = KERNEL_BOUND) -> dict[str, Fraction]:
    """Law of one pruning step applied to a uniform element of ``D_{n-1}``."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if n > bound:
        raise ValueError(f"n={n} exceeds the kernel bound {bound}; raise the bound explicitly")
    sources = list(enumerate_decorated(n - 1, bound))
    w = Fraction(1, len(sources))
    total: dict[str, Fraction] = defaultdict(Fraction)
    for dt in sources:
        for key, p in transition_distribution(dt, bound).items():
            total[key] += w * p
    return dict(total)


def _ratio_str(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


@dataclass
class UniformCertificate:
    n: int
    cardinality: int
    uniform_mass: Fraction
    max_abs_deviation: Fraction
    passed: bool

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "cardinality": self.cardinality,
            "uniform_mass": _ratio_str(self.uniform_mass),
            "max_abs_deviation": _ratio_str(self.max_abs_deviation),
            "pass": self.passed,
        }


def verify_uniform_preservation(n: int, bound: int = KERNEL_BOUND) -> UniformCertificate:
    """Exact check that one pruning step maps uniform ``D_{n-1}`` to uniform ``D_n``."""
    measure = pruned_measure(n, bound)
    targets = [format_decorated(dt) for dt in enumerate_decorated(n, max(bound, n))]
    uniform = Fraction(1, decorated_count(n))
    dev = max(abs(measure.get(t, Fraction(0)) - uniform) for t in targets)
    outside = set(measure) - set(targets)
    if outside:
        dev = max(dev, max(measure[t] for t in outside))
    return UniformCertificate(n, len(targets), uniform, dev, dev == 0 and not outside)


@dataclass
class CharacterizationReport:
    n: int
    uniform_stamps: bool
    conditional_independence: bool
    joint_law: bool
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.uniform_stamps and self.conditional_independence and self.joint_law

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "uniform_stamps": self.uniform_stamps,
            "conditional_independence": self.conditional_independence,
            "joint_law": self.joint_law,
            "failures": self.failures[:20],
            "pass": self.passed,
        }


def characterization_check(
    n: int,
    measure: Mapping[str, Fraction] | None = None,
    bound: int = KERNEL_BOUND + 1,
) -> CharacterizationReport:
    """Check the three properties that characterize the uniform law on ``D_n``.

    (i) the stamp permutation is uniform; (ii) given the stamps, the parents
    of the increasing form are independent; (iii)
    ``P(p(v)=w, s(v)=j, s(w)=i) = 1{j>i} / (n(n-1)(j-1))``.
    ``measure`` defaults to the uniform law on ``D_n``.
    """
    if n > bound:
        raise ValueError(f"n={n} exceeds the enumeration bound {bound}")
    if measure is None:
        mass = Fraction(1, decorated_count(n))
        items = [(dt, mass) for dt in enumerate_decorated(n, bound)]
    else:
        items = [(parse_decorated(key), p) for key, p in measure.items() if p]
    failures = []

    by_sigma: dict[tuple, list[tuple[tuple, Fraction]]] = defaultdict(list)
    joint: dict[tuple, Fraction] = defaultdict(Fraction)
    for dt, p in items:
        s = dt.stamp.image
        inc_parents = [0] * (n + 1)
        for v, w in dt.tree.edges():
            inc_parents[s[v - 1]] = s[w - 1]
            joint[(v, w, s[v - 1], s[w - 1])] += p
        by_sigma[s].append((tuple(inc_parents[2:]), p))

    target = Fraction(1, math.factorial(n))
    uniform_stamps = len(by_sigma) == math.factorial(n)
    for s, rows in by_sigma.items():
        total = sum(p for _, p in rows)
        if total != target:
            uniform_stamps = False
            failures.append(f"stamp {s} has mass {total}")

    independent = True
    for s, rows in by_sigma.items():
        total = sum(p for _, p in rows)
        cond = {parents: p / total for parents, p in rows}
        marginals = [defaultdict(Fraction) for _ in range(n - 1)]
        for parents, q in cond.items():
            for j, par in enumerate(parents):
                marginals[j][par] += q
        for combo in itertools.product(*(m.items() for m in marginals)):
            prod = Fraction(1)
            for _, q in combo:
                prod *= q
            if cond.get(tuple(par for par, _ in combo), Fraction(0)) != prod:
                independent = False
                failures.append(f"parents not independent given stamp {s}")
                break

    joint_ok = True
    for v, w in itertools.permutations(range(1, n + 1), 2):
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                want = Fraction(1, n * (n - 1) * (j - 1)) if j > i else Fraction(0)
                got = joint.get((v, w, j, i), Fraction(0))
                if got != want:
                    joint_ok = False
                    failures.append(f"P(p({v})={w}, s({v})={j}, s({w})={i}) = {got} != {want}")
    return CharacterizationReport(n, uniform_stamps, independent, joint_ok, failures)


# --------------------------------------------------------------------------
# degree tails


def degree_tail_rn(n: int, i: int, m: int, exact: bool = True):
    """``P(d_{R_n}(i) >= m)``: vertex ``k > i`` picks ``i`` with probability ``1/(k-1)``."""
    if not 1 <= i <= n:
        raise IndexError(f"vertex {i} out of range [1, {n}]")
    if m < 0:
        raise ValueError("threshold must be nonnegative")
    probs = [Fraction(1, k - 1) if exact else 1.0 / (k - 1) for k in range(i + 1, n + 1)]
    return pb_tail(probs, 1, m, exact=exact)


def degree_tail_tn(n: int, m: int, exact: bool = True):
    """``P(d_{T_n}(v) >= m) = 2^{-m} P(|S_n(v)| >= m)``, the same for every ``v``."""
    if m < 0:
        raise ValueError("threshold must be nonnegative")
    half_m = Fraction(1, 2 ** m) if exact else 2.0 ** -m
    return half_m * pb_tail(selection_probs(n, exact), 1, m, exact=exact)


def degree_pmf_tn(n: int, exact: bool = True, m_max: int | None = None) -> list:
    """Law of one vertex's degree in ``T_n`` (equivalently of ``min(Geo(1/2), |S_n|)``).

    Entries ``0..m_max-1`` are point masses and the last entry is
    ``P(degree >= m_max)``. ``m_max`` defaults to ``n``, where that mass is 0.
    """
    M = n if m_max is None else min(m_max, n)
    table = PBTail(selection_probs(n, exact), exact=exact, max_r=M)
    half = Fraction(1, 2) if exact else 0.5
    tails = [half ** m * table.tail(1, m) for m in range(M + 1)]
    return [tails[d] - tails[d + 1] for d in range(M)] + [tails[M]]


@lru_cache(maxsize=64)
def lambda_table(n: int, m_max: int, exact: bool | None = None) -> tuple:
    """``E[Z_m] = sum_i P(d_{R_n}(i) >= m)`` for ``m = 0..m_max`` in one sweep.

    Sweeps ``i`` from ``n`` down to 1, adding the ``Ber(1/i)`` variable that
    vertex ``i`` sees from vertex ``i + 1`` to a pmf truncated at ``m_max``.
    ``exact=None`` picks rationals for ``n <= EXACT_LAMBDA_LIMIT``.
    """
    if exact is None:
        exact = n <= EXACT_LAMBDA_LIMIT
    M = max(m_max, 1)
    if exact:
        pmf = [Fraction(0)] * (M + 1)
        pmf[0] = Fraction(1)
        acc = [Fraction(0)] * (M + 1)

        def add_tails():
            run = Fraction(0)
            for r in range(M, -1, -1):
                run += pmf[r]
                acc[r] += run

        add_tails()
        for i in range(n - 1, 0, -1):
            p = Fraction(1, i)
            top = pmf[M] + p * pmf[M - 1]
            for r in range(M - 1, 0, -1):
                pmf[r] = (1 - p) * pmf[r] + p * pmf[r - 1]
            pmf[0] = (1 - p) * pmf[0]
            pmf[M] = top
            add_tails()
        return tuple(acc[: m_max + 1])
    pmf = np.zeros(M + 1)
    pmf[0] = 1.0
    acc = np.cumsum(pmf[::-1])[::-1].copy()
    for i in range(n - 1, 0, -1):
        p = 1.0 / i
        top = pmf[M] + p * pmf[M - 1]
        pmf[1:M] = (1.0 - p) * pmf[1:M] + p * pmf[0:M - 1]
        pmf[0] *= 1.0 - p
        pmf[M] = top
        acc += np.cumsum(pmf[::-1])[::-1]
    return tuple(float(v) for v in acc[: m_max + 1])


@dataclass(frozen=True)
class LambdaValue:
    n: int
    m: int
    value: object  # Fraction or float
    envelope: object  # n * 2^{-m}

    @property
    def ratio(self):
        return self.value / self.envelope


def lambda_exact(n: int, m: int, exact: bool | None = None) -> LambdaValue:
    """Expected number of vertices of degree ``>= m`` in a recursive tree of size ``n``."""
    if n < 1 or m < 0:
        raise ValueError("need n >= 1 and m >= 0")
    if m >= n:
        value = Fraction(0)
    else:
        value = lambda_table(n, m, exact)[m]
    if isinstance(value, Fraction):
        envelope = Fraction(n, 2 ** m)
    else:
        envelope = n * 2.0 ** -m
    return LambdaValue(n, m, value, envelope)


def tau_tail(n: int, k: int, a: float | None = None) -> Fraction:
    """``P(tau <= k) = prod_{j=k+1}^{n} (1 - 2/(j(j-1)))``.

    With ``a`` given, ``k`` must equal ``ceil(n^a)`` and the bound
    ``P(tau > n^a) <= 4 n^{-a}`` is asserted.
    """
    if not 2 <= k <= n:
        raise ValueError(f"need 2 <= k <= n, got k={k}, n={n}")
    out = Fraction(1)
    for j in range(k + 1, n + 1):
        out *= 1 - Fraction(2, j * (j - 1))
    if a is not None:
        if not 0 < a < 1 or k != math.ceil(n ** a):
            raise ValueError("a must lie in (0, 1) with k = ceil(n^a)")
        assert 1 - out <= 4 * n ** -a, f"tail bound fails at n={n}, a={a}"
    return out


@dataclass(frozen=True)
class BoundConstants:
    c: float
    c_prime: float
    alpha_sup: float  # alpha < alpha_sup strictly
    beta: float | None
    gamma_sup: float  # gamma < gamma_sup strictly
    epsilon: float

    def to_json(self) -> dict:
        return {
            "c": self.c,
            "c_prime": self.c_prime,
            "alpha_sup": self.alpha_sup,
            "alpha_strict": True,
            "beta": self.beta,
            "gamma_sup": self.gamma_sup,
            "gamma_strict": True,
            "epsilon": self.epsilon,
        }


def bound_constants(c: float, c_prime: float | None = None) -> BoundConstants:
    """Closed-form exponents for the correlation, coupling and mean bounds.

    ``alpha_sup = gamma_sup = (1 - c + sqrt(1 + 2c - c^2)) / 4``,
    ``beta = 3e^2 / (2(3 + e))`` with ``e = c' - 1`` and
    ``epsilon = (2 - c)^2 / 4``. ``c'`` defaults to ``c``; ``beta`` is None
    when ``c' <= 1`` and was not requested explicitly.
    """
    if not 0 < c <= 2:
        raise ValueError("c must lie in (0, 2]")
    explicit = c_prime is not None
    if c_prime is None:
        c_prime = c
    if explicit and c_prime <= 1:
        raise ValueError("c_prime must exceed 1")
    sup = (1 - c + math.sqrt(1 + 2 * c - c * c)) / 4
    beta = None
    if c_prime > 1:
        e = c_prime - 1
        beta = 3 * e * e / (2 * (3 + e))
    return BoundConstants(c, c_prime, sup, beta, sup, (2 - c) ** 2 / 4)
