"""Monotone coupling of a plain pruning parameter set with one conditioned on a large yield.

The conditioned set ``(K', L', X')`` has the law of ``(K, L, X)`` given
``sum_{i=K}^{n-1} X_i >= m``. Both are driven by shared uniforms so that
``K' <= K``, ``L' <= L`` and ``X <= X'`` hold on every draw:

* ``K = floor(n U1) + 1`` and ``K' = max{k : U1 > p_1 + ... + p_{k-1}}`` with
  ``p_k`` proportional to ``P(sum_{i=k}^{n-1} X_i >= m)``;
* ``L = floor((K - 1) U2) + 1`` and the same formula for ``L'``;
* for ``i = K', ..., n-1`` one uniform ``U_i`` sets ``X_i = 1{U_i < 1/i}`` and
  ``X'_i = 1{U_i < q_i}``, where ``q_i`` is the success probability of
  coordinate ``i`` given the residual requirement ``r`` on the suffix.

Applying both sets to the same uniform decorated tree of size ``n - 1`` gives
the tree pair whose degree indicators ``I_v`` and ``J_v`` are compared.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import accumulate

import numpy as np

from . import _kernels as K
from .exact import PBTail, bound_constants, rewire_probs
from .pruning import HSet, grow_process, prune_deterministic
from .rng import run_chunks
from .stats import StatReport
from .trees import DecoratedTree, degree_sequence, random_decorated

BASES = {"direct": K.BASE_DIRECT, "grow": K.BASE_GROW}


@dataclass(frozen=True, eq=False)
class CouplingTables:
    n: int
    m: int
    p: tuple[Fraction, ...]  # p[k - 1] = P(K' = k)
    cum: np.ndarray  # cum[j] = p_1 + ... + p_j rounded, j = 0..n
    kmax: int  # largest k with p_k > 0
    q: np.ndarray  # q[i, r]: success probability of X'_i with residual r


@lru_cache(maxsize=32)
def coupling_tables(n: int, m: int) -> CouplingTables:
    """Exact tables for the coupling, rounded to floats once.

    Every probability is computed in rationals and then rounded, so
    ``q[i, r] >= 1/i`` holds exactly in floating point as well.
    """
    if n < 2 or not 0 <= m <= n - 1:
        raise ValueError(f"need n >= 2 and 0 <= m <= n-1, got n={n}, m={m}")
    probs = rewire_probs(n)
    tail = PBTail(probs, exact=True, max_r=m)
    weights = [tail.tail(k, m) for k in range(1, n + 1)]
    total = sum(weights)
    p = tuple(w / total for w in weights)
    if sum(p) != 1 or any(a < b for a, b in zip(p, p[1:])):
        raise AssertionError("K' weights must be nonincreasing and sum to one")
    audit = PBTail(probs, exact=False, max_r=m)
    worst = max(abs(float(tail.tail(k, r)) - audit.tail(k, r))
                for k in range(1, n + 1) for r in range(m + 1))
    if worst > 1e-12:
        raise AssertionError(f"float tail table drifts from rationals by {worst:g}")
    cum = np.array([float(c) for c in accumulate(p, initial=Fraction(0))])
    kmax = max(k for k in range(1, n + 1) if p[k - 1] > 0)
    q = np.ones((n + 1, m + 1))
    for i in range(1, n):
        q[i, 0] = 1.0 / i
        for r in range(1, m + 1):
            denom = tail.tail(i, r)
            if denom:
                q[i, r] = float(Fraction(1, i) * tail.tail(i + 1, r - 1) / denom)
    return CouplingTables(n, m, p, cum, kmax, q)


def _k_prime(t: CouplingTables, u1: float) -> int:
    return max(1, int(np.searchsorted(t.cum[: t.kmax], u1)))


def conditioned_x(n: int, k: int, m: int, rng: np.random.Generator):
    """``(X, X')`` with ``X`` i.i.d. ``Ber(1/i)`` and ``X'`` distributed as ``X``
    given ``sum_{i=k}^{n-1} X_i >= m``; ``X <= X'`` coordinatewise.

    Reads one uniform per index ``i = 1..n-1``. Index ``i`` lives at
    position ``i - 1`` of the returned tuples.
    """
    if not 1 <= k <= n - 1 and not (k == n and m == 0):
        raise ValueError(f"stamp {k} out of range [1, {n - 1}]")
    if m > n - k:
        raise ValueError(f"cannot condition on {m} successes among {n - k} bits")
    q = coupling_tables(n, m).q
    x, xc = [], []
    r = m
    for i in range(1, n):
        u = rng.random()
        p = 1.0 / i
        if i < k:
            bit = int(u < p)
            x.append(bit)
            xc.append(bit)
            continue
        if q[i, r] < p:
            raise AssertionError(f"q_{i} < p_{i}")
        x.append(int(u < p))
        hit = int(u < q[i, r])
        xc.append(hit)
        if hit and r > 0:
            r -= 1
    return tuple(x), tuple(xc)


def coupled_kl(n: int, m: int, rng: np.random.Generator | None = None,
               u: tuple[float, float] | None = None):
    """``((K, L), (K', L'))`` from shared uniforms ``(U1, U2)``."""
    t = coupling_tables(n, m)
    if u is None:
        if rng is None:
            raise ValueError("pass an rng or explicit uniforms")
        u = (rng.random(), rng.random())
    u1, u2 = u
    k = int(u1 * n) + 1
    k2 = min(_k_prime(t, u1), k)
    l = int(u2 * (k - 1)) + 1 if k > 1 else 0
    l2 = int(u2 * (k2 - 1)) + 1 if k2 > 1 else 0
    return (k, l), (k2, l2)


@dataclass(frozen=True)
class CoupledHSets:
    plain: HSet
    conditioned: HSet
    u1: float
    u2: float


def coupled_hsets(n: int, m: int, rng: np.random.Generator) -> CoupledHSets:
    """One coupled draw; consumes the stream exactly as the compiled sampler."""
    if not 0 <= m <= n - 2:
        raise ValueError(f"need 0 <= m <= n-2, got m={m}")
    t = coupling_tables(n, m)
    u1, u2 = rng.random(), rng.random()
    (k, l), (k2, l2) = coupled_kl(n, m, u=(u1, u2))
    ones, ones_c = set(), set()
    r = m
    for i in range(k2, n):
        u = rng.random()
        p = 1.0 / i
        qi = t.q[i, r]
        assert qi >= p, f"q_{i} < p_{i}"
        if u < p and i >= k:
            ones.add(i)
        if u < qi:
            ones_c.add(i)
            if r > 0:
                r -= 1
        assert not (u < p and not u < qi)
    plain = HSet(n, k, l, frozenset(ones), full=False)
    cond = HSet(n, k2, l2, frozenset(ones_c), full=False)
    assert k2 <= k and l2 <= l, "domination of (K, L) fails"
    assert cond.yield_() >= m, "conditioned yield below m"
    return CoupledHSets(plain, cond, u1, u2)


@dataclass(frozen=True)
class CoupledDegrees:
    m: int
    base: DecoratedTree
    plain: DecoratedTree
    conditioned: DecoratedTree
    hsets: CoupledHSets
    I: tuple[int, ...]  # I[v - 1] = 1{d_plain(v) >= m}
    J: tuple[int, ...]

    def violations(self) -> list[int]:
        """Labels ``v < n`` with ``I_v < J_v``."""
        return [v for v, (a, b) in enumerate(zip(self.I, self.J), 1)
                if v < len(self.I) and a < b]


def coupled_trees(n: int, m: int, rng: np.random.Generator, base: str = "grow") -> CoupledDegrees:
    """Apply a coupled pair of parameter sets to one uniform tree of size ``n - 1``.

    ``base`` selects the sampler for that tree: the pruning chain from a
    single vertex ("grow") or a uniform recursive tree with uniform stamps
    ("direct"). Both give the uniform law.
    """
    if base == "grow":
        dt = grow_process(n - 1, rng).final
    elif base == "direct":
        dt = random_decorated(n - 1, rng)
    else:
        raise ValueError(f"unknown base sampler {base!r}")
    h = coupled_hsets(n, m, rng)
    t1 = prune_deterministic(dt, h.plain)
    t2 = prune_deterministic(dt, h.conditioned)
    d0, d1, d2 = degree_sequence(dt.tree), degree_sequence(t1.tree), degree_sequence(t2.tree)
    I = tuple(int(d >= m) for d in d1)
    J = tuple(int(d >= m) for d in d2)
    assert J[n - 1] == 1, "conditioned new vertex has degree below m"
    l2 = h.conditioned.l
    for v in range(1, n):
        hit = int(dt.stamp(v) == l2)
        assert d2[v - 1] - d1[v - 1] <= hit, f"difference bound fails at {v}"
        if I[v - 1] < J[v - 1]:
            assert hit and d0[v - 1] >= m - 1, f"containment fails at {v}"
    return CoupledDegrees(m, dt, t1, t2, h, I, J)


@dataclass
class ViolationReport:
    n: int
    m: int
    rate: StatReport  # pooled per-vertex P(I_v < J_v), v < n
    max_rate: float  # largest per-label empirical rate
    envelope: float | None  # n^{-1-beta}
    loose_envelope: float  # 10 / n
    counters: dict = field(default_factory=dict)

    @property
    def sure_events_hold(self) -> bool:
        c = self.counters
        return all(c[k] == 0 for k in ("k_domination", "l_domination", "x_domination",
                                       "containment", "difference_bound", "new_vertex_below_m",
                                       "q_below_p", "degree_bookkeeping"))

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "rate": self.rate.to_json(),
            "max_rate": self.max_rate,
            "envelope": self.envelope,
            "loose_envelope": self.loose_envelope,
            "counters": dict(self.counters),
            "sure_events_hold": self.sure_events_hold,
        }


_COUNTER_NAMES = {
    K.C_TRIALS: "trials",
    K.C_DOM_K: "k_domination",
    K.C_DOM_L: "l_domination",
    K.C_DOM_X: "x_domination",
    K.C_CONTAIN: "containment",
    K.C_DIFF: "difference_bound",
    K.C_JN: "new_vertex_below_m",
    K.C_QP: "q_below_p",
    K.C_FIXUP: "k_prime_fixups",
    K.C_FACT: "degree_bookkeeping",
    K.C_VIOL: "violations",
    K.C_VIOL_TRIALS: "trials_with_violation",
    K.C_IN: "plain_new_vertex_at_least_m",
    K.C_VIOL_SQ: "violations_sq",
}


def estimate_violation(n: int, m: int, trials: int, seed: int, base: str = "grow",
                       threads: int | None = None, chunk_size: int = 10_000) -> ViolationReport:
    """Monte Carlo rate of ``{I_v < J_v}`` with every sure event counted."""
    if base not in BASES:
        raise ValueError(f"unknown base sampler {base!r}")
    if m == 0:
        counters = {name: 0 for name in _COUNTER_NAMES.values()}
        counters["trials"] = trials
        rate = StatReport(0.0, 0.0, trials, seed, reference=0.0)
        return ViolationReport(n, m, rate, 0.0, None, 10 / n, counters)
    t = coupling_tables(n, m)
    mode = BASES[base]

    def work(size, state):
        return K.coupled_trees_batch(size, n, m, state, mode, t.cum, t.kmax, t.q)

    parts = run_chunks(work, trials, seed, f"coupling-{base}-{n}-{m}", chunk_size, threads)
    counts = sum(c for c, _ in parts)
    viol = sum(v for _, v in parts)
    counters = {_COUNTER_NAMES[i]: int(counts[i]) for i in range(K.N_COUNTERS)}
    per_trial_mean = counts[K.C_VIOL] / trials
    var = max(counts[K.C_VIOL_SQ] / trials - per_trial_mean ** 2, 0.0)
    rate = StatReport(per_trial_mean / (n - 1), math.sqrt(var / trials) / (n - 1), trials, seed)
    c_eff = m / math.log(n)
    envelope = None
    if c_eff > 1:
        beta = bound_constants(min(c_eff, 2.0), c_prime=c_eff).beta
        envelope = n ** (-1 - beta)
    return ViolationReport(n, m, rate, float(viol[1:n].max()) / trials, envelope, 10 / n, counters)
