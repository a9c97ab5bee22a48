"""Degree statistics of large random recursive trees and their reference laws.

Monte Carlo here samples the recursive tree ``R_n`` directly (each vertex
``j`` attaches to a uniform earlier vertex). ``Z_m`` and the maximum degree
do not depend on labels, and the degrees at a uniform pair of distinct stamps
have the law of the degrees of two fixed labels in a uniform decorated tree,
so nothing is lost against running the pruning chain, which costs
``O(n^2)`` per tree.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats as sps

from . import _kernels as K
from .exact import bound_constants, degree_pmf_tn, degree_tail_tn, lambda_exact
from .rng import generator, run_chunks, stream_tag
from .trees import RootedTree, degree_sequence

BOOTSTRAP = 200


@dataclass
class StatReport:
    estimate: float
    stderr: float
    trials: int
    seed: int | None
    reference: float | None = None
    verdict: bool | None = None

    def __post_init__(self):
        if self.stderr < 0:
            raise ValueError("standard error must be nonnegative")
        if self.verdict is not None and self.reference is None:
            raise ValueError("a verdict needs a reference value")

    @classmethod
    def against(cls, estimate, stderr, trials, seed, reference, sigmas=3.0) -> "StatReport":
        """Report with verdict ``|estimate - reference| <= sigmas * stderr``."""
        ok = abs(estimate - reference) <= sigmas * stderr
        return cls(float(estimate), float(stderr), trials, seed, float(reference), bool(ok))

    def to_json(self) -> dict:
        return asdict(self)


# --------------------------------------------------------------------------
# per-tree statistics


def max_degree(tree: RootedTree) -> int:
    return max(degree_sequence(tree))


def z_count(tree: RootedTree, m: int) -> int:
    """Number of vertices with at least ``m`` children."""
    z = sum(1 for d in degree_sequence(tree) if d >= m)
    assert (z > 0) == (max_degree(tree) >= m)
    return z


@dataclass
class DegreeStats:
    n: int
    m: int
    z: int
    max_degree: int
    histogram: dict[int, int]  # degree -> number of vertices with exactly that degree

    @classmethod
    def of(cls, tree: RootedTree, m: int) -> "DegreeStats":
        degs = degree_sequence(tree)
        hist: dict[int, int] = {}
        for d in degs:
            hist[d] = hist.get(d, 0) + 1
        return cls(tree.n, m, z_count(tree, m), max(degs), dict(sorted(hist.items())))


# --------------------------------------------------------------------------
# batched sampling


def _add_hist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if len(a) < len(b):
        a, b = b, a
    out = a.copy()
    out[: len(b)] += b
    return out


@dataclass
class DegreeSample:
    """Merged summaries of ``trials`` recursive trees of size ``n``."""

    n: int
    ms: tuple[int, ...]
    trials: int
    z_hist: list[np.ndarray]  # z_hist[j][z] = number of trees with Z_{ms[j]} = z
    max_hist: np.ndarray  # max_hist[d] = number of trees with maximum degree d
    pair_first: np.ndarray  # per m: trees where the first sampled vertex has degree >= m
    pair_second: np.ndarray
    pair_joint: np.ndarray

    def merge(self, other: "DegreeSample") -> "DegreeSample":
        return DegreeSample(
            self.n, self.ms, self.trials + other.trials,
            [_add_hist(a, b) for a, b in zip(self.z_hist, other.z_hist)],
            _add_hist(self.max_hist, other.max_hist),
            self.pair_first + other.pair_first,
            self.pair_second + other.pair_second,
            self.pair_joint + other.pair_joint,
        )

    def z_histogram(self, m: int) -> np.ndarray:
        return self.z_hist[self.ms.index(m)]


def _summarize(n, ms, z, maxdeg, pair) -> DegreeSample:
    msa = np.asarray(ms)
    first = (pair[:, :1] >= msa).sum(axis=0)
    second = (pair[:, 1:] >= msa).sum(axis=0)
    joint = ((pair[:, :1] >= msa) & (pair[:, 1:] >= msa)).sum(axis=0)
    return DegreeSample(n, tuple(ms), len(maxdeg),
                        [np.bincount(z[:, j]) for j in range(len(ms))],
                        np.bincount(maxdeg), first, second, joint)


def degree_sample(n: int, ms, trials: int, seed: int, threads: int | None = None,
                  chunk_size: int = 10_000) -> DegreeSample:
    if n < 2:
        raise ValueError("n must be at least 2")
    ms = tuple(int(m) for m in ms)
    msa = np.array(ms, dtype=np.int64)

    def work(size, state):
        return _summarize(n, ms, *K.degree_stats(size, n, msa, state))

    parts = run_chunks(work, trials, seed, f"recursive-{n}", chunk_size, threads)
    out = parts[0]
    for part in parts[1:]:
        out = out.merge(part)
    return out


# --------------------------------------------------------------------------
# total variation to a Poisson law


@dataclass
class DtvEstimate:
    estimate: float
    stderr: float
    truncation: int
    truncated_mass: float  # Poisson mass above the truncation, included in the estimate


def _dtv_hist(hist: np.ndarray, lam: float, cutoff: int) -> float:
    ks = np.arange(cutoff + 1)
    ref = sps.poisson.pmf(ks, lam)
    emp = np.zeros(cutoff + 1)
    emp[: len(hist)] = hist / hist.sum()
    return 0.5 * (np.abs(emp - ref).sum() + sps.poisson.sf(cutoff, lam))


def dtv_from_histogram(hist, lam: float, bootstrap: int = BOOTSTRAP,
                       rng: np.random.Generator | None = None) -> DtvEstimate:
    hist = np.asarray(hist, dtype=np.int64)
    total = int(hist.sum())
    if total == 0:
        raise ValueError("no samples")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    cutoff = max(math.ceil(lam + 12 * math.sqrt(lam)), len(hist) - 1)
    est = _dtv_hist(hist, lam, cutoff)
    se = 0.0
    if bootstrap:
        rng = rng or np.random.default_rng(0)
        draws = rng.multinomial(total, hist / total, size=bootstrap)
        se = float(np.std([_dtv_hist(d, lam, cutoff) for d in draws], ddof=1))
    return DtvEstimate(float(est), se, cutoff, float(sps.poisson.sf(cutoff, lam)))


def empirical_dtv(samples, lam: float, bootstrap: int = BOOTSTRAP,
                  rng: np.random.Generator | None = None) -> DtvEstimate:
    """Plug-in ``d_TV`` between the empirical law of ``samples`` and ``Poi(lam)``."""
    samples = np.asarray(samples, dtype=np.int64)
    if samples.size == 0:
        raise ValueError("no samples")
    if samples.min() < 0:
        raise ValueError("samples must be nonnegative integers")
    return dtv_from_histogram(np.bincount(samples), lam, bootstrap, rng)


def pooled_chisquare(observed, probs, min_expected: float = 5.0):
    """Chi-square goodness of fit after merging sparse cells from the right.

    ``probs`` covers every outcome; mass beyond the observed range is folded
    into the last cell. Returns ``(statistic, dof, p-value)``.
    """
    probs = np.asarray(probs, dtype=float)
    observed = np.asarray(observed, dtype=float)
    size = max(len(probs), len(observed))
    obs = np.zeros(size)
    obs[: len(observed)] = observed
    p = np.zeros(size)
    p[: len(probs)] = probs
    p[-1] += max(0.0, 1.0 - p.sum())
    exp = p * obs.sum()
    o_cells, e_cells = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(obs[::-1], exp[::-1]):
        o_acc += o
        e_acc += e
        if e_acc >= min_expected:
            o_cells.append(o_acc)
            e_cells.append(e_acc)
            o_acc = e_acc = 0.0
    if e_acc or o_acc:
        if not e_cells:
            raise ValueError("not enough expected mass for a chi-square test")
        o_cells[-1] += o_acc
        e_cells[-1] += e_acc
    o_cells, e_cells = np.array(o_cells), np.array(e_cells)
    stat = float(((o_cells - e_cells) ** 2 / e_cells).sum())
    dof = len(o_cells) - 1
    return stat, dof, float(sps.chi2.sf(stat, dof)) if dof > 0 else 1.0


@dataclass
class SweepRow:
    n: int
    m: int
    lambda_exact: float
    estimate: float
    stderr: float
    reference: float | None
    verdict: bool | None

    CSV_HEADER = "n,m,lambda_exact,estimate,stderr,reference,verdict"

    def to_csv(self) -> str:
        ref = "" if self.reference is None else repr(self.reference)
        verdict = "" if self.verdict is None else ("pass" if self.verdict else "fail")
        return f"{self.n},{self.m},{self.lambda_exact!r},{self.estimate!r},{self.stderr!r},{ref},{verdict}"


@dataclass
class DtvSweep:
    c: float
    rows: list[SweepRow]
    decreasing: bool  # each step drops or rises by less than 2 combined bootstrap sigmas
    endpoint_decrease: bool  # same comparison between the first and last grid point

    def to_csv(self) -> str:
        return "\n".join([SweepRow.CSV_HEADER] + [r.to_csv() for r in self.rows]) + "\n"


def _within_2sigma_not_larger(a: SweepRow, b: SweepRow) -> bool:
    return b.estimate <= a.estimate + 2 * math.hypot(a.stderr, b.stderr)


def dtv_sweep(n_list, c: float, trials: int, seed: int, threads: int | None = None,
              bootstrap: int = BOOTSTRAP) -> DtvSweep:
    """``d_TV(Z_m, Poi(lambda))`` with ``m = ceil(c ln n)`` over a grid of sizes."""
    rows = []
    for n in n_list:
        m = math.ceil(c * math.log(n))
        lam = float(lambda_exact(n, m).value)
        sample = degree_sample(n, [m], trials, seed, threads)
        rng = generator(seed, stream_tag("bootstrap"), n, m)
        d = dtv_from_histogram(sample.z_histogram(m), lam, bootstrap, rng)
        rows.append(SweepRow(n, m, lam, d.estimate, d.stderr, None, None))
    steps = [_within_2sigma_not_larger(a, b) for a, b in zip(rows, rows[1:])]
    for row, ok in zip(rows[1:], steps):
        row.verdict = ok
    ends = _within_2sigma_not_larger(rows[0], rows[-1]) if len(rows) > 1 else True
    return DtvSweep(c, rows, all(steps), ends)


@dataclass
class PoissonFit:
    n: int
    m: int
    lam: float
    statistic: float
    dof: int
    pvalue: float
    significance: float
    dtv: DtvEstimate

    @property
    def passed(self) -> bool:
        return self.pvalue >= self.significance


def poisson_fit(n: int, m: int, trials: int, seed: int, threads: int | None = None,
                significance: float = 1e-3) -> PoissonFit:
    """Chi-square of the ``Z_m`` histogram against ``Poi(lambda_exact(n, m))``."""
    lam = float(lambda_exact(n, m).value)
    hist = degree_sample(n, [m], trials, seed, threads).z_histogram(m)
    top = max(len(hist), math.ceil(lam + 12 * math.sqrt(lam)) + 1)
    stat, dof, p = pooled_chisquare(hist, sps.poisson.pmf(np.arange(top), lam))
    rng = generator(seed, stream_tag("bootstrap"), n, m)
    return PoissonFit(n, m, lam, stat, dof, p, significance, dtv_from_histogram(hist, lam, rng=rng))


# --------------------------------------------------------------------------
# correlation of two vertices


@dataclass
class CorrelationReport:
    n: int
    m: int
    excess: StatReport  # P(d(v) >= m, d(w) >= m) - P(d >= m)^2 for fixed v != w
    envelope: float  # 2^{-2m} n^{-alpha_sup}
    exchangeable_excess: float  # same quantity from E[Z(Z-1)] / (n(n-1))
    first_tail: StatReport
    second_tail: StatReport

    @property
    def passed(self) -> bool:
        return (self.excess.estimate <= self.envelope + 3 * self.excess.stderr
                and bool(self.first_tail.verdict) and bool(self.second_tail.verdict))

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "excess": self.excess.to_json(),
            "envelope": self.envelope,
            "exchangeable_excess": self.exchangeable_excess,
            "first_tail": self.first_tail.to_json(),
            "second_tail": self.second_tail.to_json(),
            "pass": self.passed,
        }


def correlation_check(n: int, m: int, trials: int, seed: int,
                      threads: int | None = None) -> CorrelationReport:
    tail = float(degree_tail_tn(n, m))
    if m == 0:
        zero = StatReport(0.0, 0.0, trials, seed)
        one = StatReport(1.0, 0.0, trials, seed, 1.0, True)
        return CorrelationReport(n, m, zero, 1.0, 0.0, one, one)
    s = degree_sample(n, [m], trials, seed, threads)
    joint = s.pair_joint[0] / trials
    se = math.sqrt(max(joint, 1.0 / trials) * (1 - joint) / trials)
    excess = StatReport(float(joint - tail * tail), se, trials, seed)
    c = m / math.log(n)
    alpha = bound_constants(min(c, 2.0)).alpha_sup if c > 0 else 0.0
    envelope = 2.0 ** (-2 * m) * n ** (-alpha)
    hist = s.z_histogram(m)
    zs = np.arange(len(hist))
    ezz = float((hist * zs * (zs - 1)).sum()) / trials
    exch = ezz / (n * (n - 1)) - tail * tail

    def tail_report(count):
        p = count / trials
        return StatReport.against(p, math.sqrt(tail * (1 - tail) / trials), trials, seed, tail)

    return CorrelationReport(n, m, excess, envelope, exch,
                             tail_report(s.pair_first[0]), tail_report(s.pair_second[0]))


# --------------------------------------------------------------------------
# maximum degree


@dataclass
class MaxDegreeReport:
    n: int
    i: int
    threshold: int  # floor(log2 n) - i
    empirical: StatReport  # P(max degree < threshold) against exp(-lambda_exact)
    gumbel_reference: float  # exp(-2^{i + eps_n})
    lambda_ratio: float  # lambda_exact / (n 2^{-threshold})

    @property
    def passed(self) -> bool:
        # lambda <= n 2^{-threshold} means the exact reference sits above the Gumbel one
        return bool(self.empirical.verdict) and self.empirical.reference >= self.gumbel_reference - 1e-15

    def to_json(self) -> dict:
        out = asdict(self)
        out["pass"] = self.passed
        return out


def max_degree_tail(n: int, i: int, trials: int, seed: int, threads: int | None = None,
                    sample: DegreeSample | None = None) -> MaxDegreeReport:
    """``P(max degree < floor(log2 n) - i)`` against ``exp(-lambda)``.

    Pass a precomputed ``sample`` to reuse the same trees for several ``i``.
    """
    log_n = math.log2(n)
    top = math.floor(log_n)
    thr = top - i
    eps = log_n - top
    gumbel = math.exp(-(2.0 ** (i + eps)))
    if thr <= 0:
        rep = StatReport(0.0, 0.0, trials, seed, 0.0, True)
        return MaxDegreeReport(n, i, thr, rep, gumbel, 0.0)
    if sample is None:
        sample = degree_sample(n, [thr], trials, seed, threads)
    lam = lambda_exact(n, thr)
    ref = math.exp(-float(lam.value))
    below = int(sample.max_hist[:thr].sum())
    p = below / sample.trials
    se = math.sqrt(max(p * (1 - p), 1.0 / sample.trials) / sample.trials)
    rep = StatReport.against(p, se, sample.trials, seed, ref)
    return MaxDegreeReport(n, i, thr, rep, gumbel, float(lam.ratio))


# --------------------------------------------------------------------------
# degree of the newest vertex


@dataclass
class NewVertexReport:
    n: int
    mean: StatReport  # against 1 - 1/n
    leaf: StatReport  # P(degree 0) against 1/2
    chisquare: float
    dof: int
    pvalue: float
    bookkeeping_mismatches: int

    def passed(self, leaf_tol: float | None = None, significance: float = 1e-3) -> bool:
        leaf_ok = (abs(self.leaf.estimate - self.leaf.reference) <= leaf_tol
                   if leaf_tol is not None else bool(self.leaf.verdict))
        return (bool(self.mean.verdict) and leaf_ok and self.pvalue >= significance
                and self.bookkeeping_mismatches == 0)

    def to_json(self) -> dict:
        out = asdict(self)
        out["pass"] = self.passed()
        return out


def new_vertex_profile(n: int, trials: int, seed: int, base: str = "direct",
                       threads: int | None = None) -> NewVertexReport:
    """Degree of vertex ``n`` right after it is inserted into a uniform tree of size ``n - 1``."""
    if n < 2:
        raise ValueError("n must be at least 2")
    mode = {"direct": K.BASE_DIRECT, "grow": K.BASE_GROW}[base]

    def work(size, state):
        degs, bad = K.new_vertex(size, n, state, mode)
        return np.bincount(degs), bad

    parts = run_chunks(work, trials, seed, f"new-vertex-{base}-{n}", threads=threads)
    hist = np.zeros(1, dtype=np.int64)
    bad = 0
    for h, b in parts:
        hist = _add_hist(hist, h)
        bad += b
    ds = np.arange(len(hist))
    mean = float((hist * ds).sum()) / trials
    var = float((hist * ds * ds).sum()) / trials - mean * mean
    mean_rep = StatReport.against(mean, math.sqrt(max(var, 0.0) / trials), trials, seed, 1 - 1 / n)
    leaf = hist[0] / trials
    leaf_rep = StatReport.against(leaf, math.sqrt(0.25 / trials), trials, seed, 0.5)
    pmf = [float(p) for p in degree_pmf_tn(n, exact=n <= 200, m_max=64)]
    stat, dof, p = pooled_chisquare(hist, pmf)
    return NewVertexReport(n, mean_rep, leaf_rep, stat, dof, p, int(bad))


# --------------------------------------------------------------------------
# normal approximation diagnostics


@dataclass
class MomentReport:
    n: int
    m: int
    lam: float
    standardized_mean: float  # E[(Z - lambda) / sqrt(lambda)]
    standardized_var: float
    skewness: StatReport
    excess_kurtosis: StatReport
    poisson_skewness: float  # lambda^{-1/2}

    def to_json(self) -> dict:
        return asdict(self)


def _moments(hist: np.ndarray):
    xs = np.arange(len(hist), dtype=float)
    w = hist / hist.sum()
    mu = (w * xs).sum()
    c2 = (w * (xs - mu) ** 2).sum()
    if c2 == 0:
        return 0.0, 0.0
    c3 = (w * (xs - mu) ** 3).sum()
    c4 = (w * (xs - mu) ** 4).sum()
    return c3 / c2 ** 1.5, c4 / c2 ** 2 - 3


def moment_diagnostics(hist, lam: float, trials: int, seed: int, n: int = 0, m: int = 0,
                       bootstrap: int = BOOTSTRAP) -> MomentReport:
    hist = np.asarray(hist, dtype=np.int64)
    if lam == 0:
        zero = StatReport(0.0, 0.0, trials, seed)
        return MomentReport(n, m, 0.0, 0.0, 0.0, zero, zero, math.inf)
    xs = np.arange(len(hist))
    w = hist / hist.sum()
    zs = (xs - lam) / math.sqrt(lam)
    s_mean = float((w * zs).sum())
    s_var = float((w * zs * zs).sum() - s_mean ** 2)
    skew, kurt = _moments(hist)
    rng = generator(seed, stream_tag("moments"), n, m)
    boots = np.array([_moments(d) for d in rng.multinomial(hist.sum(), w, size=bootstrap)])
    se_s, se_k = boots.std(axis=0, ddof=1)
    return MomentReport(n, m, lam, s_mean, s_var,
                        StatReport(float(skew), float(se_s), trials, seed),
                        StatReport(float(kurt), float(se_k), trials, seed),
                        lam ** -0.5)


def normality_diagnostics(n: int, m: int, trials: int, seed: int,
                          threads: int | None = None) -> MomentReport:
    """Skewness and excess kurtosis of ``Z_m``, standardized with the exact mean."""
    if m > n - 1:
        zero = StatReport(0.0, 0.0, trials, seed)
        return MomentReport(n, m, 0.0, 0.0, 0.0, zero, zero, math.inf)
    lam = float(lambda_exact(n, m).value)
    hist = degree_sample(n, [m], trials, seed, threads).z_histogram(m)
    return moment_diagnostics(hist, lam, trials, seed, n, m)


def poisson_control(lam: float, trials: int, seed: int) -> MomentReport:
    """Moment diagnostics on genuine ``Poi(lam)`` samples."""
    samples = generator(seed, stream_tag("poisson-control")).poisson(lam, size=trials)
    return moment_diagnostics(np.bincount(samples), lam, trials, seed)
