"""Command line entry point.

Every stochastic subcommand needs ``--seed``; reports are JSON with sorted
keys and embed the configuration that produced them. Exit status is 0 when
all verdicts pass, 1 when any fails and 2 on usage errors.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict
from fractions import Fraction

from . import coalescent, exact, pruning, stats, trees
from .coupling import estimate_violation
from .rng import generator, stream_tag


class UsageError(Exception):
    pass


def _jsonable(value):
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "item"):
        return value.item()
    return value


def _emit(args, text: str) -> None:
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _report(args, body: dict, passed: bool | None = None) -> int:
    config = {k: v for k, v in vars(args).items() if k not in ("func", "output")}
    body = dict(body)
    body["config"] = config
    if passed is not None:
        body["pass"] = bool(passed)
    _emit(args, json.dumps(_jsonable(body), sort_keys=True, indent=2) + "\n")
    return 0 if passed is None or passed else 1


def _m_from(args, n: int) -> int:
    if args.m is not None:
        return args.m
    if args.c is not None:
        return math.ceil(args.c * math.log(n))
    raise UsageError("give --m or --c")


def _check_trials(args):
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")


# --------------------------------------------------------------------------
# subcommands


def cmd_grow(args) -> int:
    _check_trials(args)
    lines = []
    for t in range(args.trials):
        trace = pruning.grow_process(args.n, generator(args.seed, stream_tag("grow"), t))
        lines += trace.to_lines() if args.trace else [trace.final.to_line()]
    _emit(args, "\n".join(lines) + "\n")
    return 0


def cmd_sample_kingman(args) -> int:
    trace = coalescent.sample_kingman(args.n, generator(args.seed, stream_tag("kingman")))
    lines = trace.to_lines()
    if args.tree:
        lines = [coalescent.chain_to_decorated(trace).to_line()]
    _emit(args, "\n".join(lines) + "\n")
    return 0


def cmd_convert(args) -> int:
    with open(args.input) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise UsageError(f"{args.input} is empty")
    if ";" in lines[0]:
        dt = trees.parse_decorated(lines[0])
        out = coalescent.decorated_to_chain(dt).to_lines()
    else:
        out = [coalescent.chain_to_decorated(coalescent.CoalescentTrace.from_lines(lines)).to_line()]
    _emit(args, "\n".join(out) + "\n")
    return 0


def cmd_enumerate(args) -> int:
    if args.count_only:
        count = sum(1 for _ in trees.enumerate_decorated(args.n, args.bound))
        _emit(args, f"{count}\n")
        return 0 if count == trees.decorated_count(args.n) else 1
    _emit(args, "".join(dt.to_line() + "\n" for dt in trees.enumerate_decorated(args.n, args.bound)))
    return 0


def cmd_verify_uniform(args) -> int:
    bound = 6 if args.allow_n6 else exact.KERNEL_BOUND
    cert = exact.verify_uniform_preservation(args.n, bound)
    return _report(args, cert.to_json(), cert.passed)


def cmd_characterize(args) -> int:
    measure = exact.pruned_measure(args.n) if args.pushforward else None
    rep = exact.characterization_check(args.n, measure)
    return _report(args, rep.to_json(), rep.passed)


def cmd_degree_tail(args) -> int:
    if args.vertex is None:
        value = exact.degree_tail_tn(args.n, args.m, exact=args.exact)
    else:
        value = exact.degree_tail_rn(args.n, args.vertex, args.m, exact=args.exact)
    return _report(args, {"probability": value, "float": float(value)})


def cmd_lambda(args) -> int:
    lam = exact.lambda_exact(args.n, args.m, exact=True if args.exact else None)
    ok = lam.value <= lam.envelope
    return _report(args, {"lambda": lam.value, "lambda_float": float(lam.value),
                          "envelope": lam.envelope, "ratio": float(lam.ratio)}, ok)


def cmd_coupling(args) -> int:
    _check_trials(args)
    m = _m_from(args, args.n)
    rep = estimate_violation(args.n, m, args.trials, args.seed, args.base, args.threads)
    if args.report:
        args.output = args.report
    return _report(args, rep.to_json(), rep.sure_events_hold)


def cmd_dtv(args) -> int:
    _check_trials(args)
    if args.c is None:
        raise UsageError("dtv needs --c")
    sweep = stats.dtv_sweep(args.n, args.c, args.trials, args.seed, args.threads)
    if args.format == "csv":
        _emit(args, sweep.to_csv())
        return 0 if sweep.decreasing else 1
    body = {"rows": [asdict(r) for r in sweep.rows], "decreasing": sweep.decreasing,
            "endpoint_decrease": sweep.endpoint_decrease}
    return _report(args, body, sweep.decreasing)


def cmd_maxdeg(args) -> int:
    _check_trials(args)
    top = math.floor(math.log2(args.n))
    thresholds = sorted({top - i for i in args.i if top - i > 0}) or [1]
    sample = stats.degree_sample(args.n, thresholds, args.trials, args.seed, args.threads)
    reps = [stats.max_degree_tail(args.n, i, args.trials, args.seed, sample=sample) for i in args.i]
    return _report(args, {"reports": [r.to_json() for r in reps]}, all(r.passed for r in reps))


def cmd_correlation(args) -> int:
    _check_trials(args)
    m = _m_from(args, args.n)
    rep = stats.correlation_check(args.n, m, args.trials, args.seed, args.threads)
    return _report(args, rep.to_json(), rep.passed)


def cmd_newvertex(args) -> int:
    _check_trials(args)
    rep = stats.new_vertex_profile(args.n, args.trials, args.seed, args.base, args.threads)
    return _report(args, rep.to_json(), rep.passed())


def cmd_normality(args) -> int:
    _check_trials(args)
    m = _m_from(args, args.n)
    rep = stats.normality_diagnostics(args.n, m, args.trials, args.seed, args.threads)
    return _report(args, rep.to_json())


def cmd_constants(args) -> int:
    const = exact.bound_constants(args.c, args.c_prime)
    return _report(args, const.to_json())


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robinhood", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, func, help_, seed=False, trials=False):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--output", "--out", "-o", help="write the result here instead of stdout")
        if seed:
            p.add_argument("--seed", type=int, required=True, help="master seed (required)")
            p.add_argument("--threads", type=int, default=None,
                           help="worker threads (default from ROBINHOOD_THREADS, else 1)")
        if trials:
            p.add_argument("--trials", type=int, required=True)
        return p

    p = add("grow", cmd_grow, "grow decorated trees by repeated pruning", seed=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trials", type=int, default=1, help="independent runs, one per line")
    p.add_argument("--trace", action="store_true", help="print every intermediate tree and parameter set")

    p = add("sample-kingman", cmd_sample_kingman, "sample a Kingman coalescent trace", seed=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--tree", action="store_true", help="print the corresponding decorated tree")

    p = add("convert", cmd_convert, "convert between tree lines and coalescent traces")
    p.add_argument("input", help="file with a tree line or a coalescent trace")

    p = add("enumerate", cmd_enumerate, "list every decorated tree of size n")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count-only", action="store_true")
    p.add_argument("--bound", type=int, default=trees.DEFAULT_ENUMERATION_BOUND)

    p = add("verify-uniform", cmd_verify_uniform, "exact check that pruning preserves uniformity")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--allow-n6", action="store_true", help="permit n = 6 (slow)")

    p = add("characterize", cmd_characterize, "exact check of the uniform-law characterization")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--pushforward", action="store_true",
                   help="check the law of one pruning step from uniform D_{n-1}")

    p = add("degree-tail", cmd_degree_tail, "exact degree tail probabilities")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--vertex", type=int, default=None,
                   help="vertex of the recursive tree; omit for any vertex of the decorated tree")
    p.add_argument("--exact", action="store_true", help="rational arithmetic")

    p = add("lambda", cmd_lambda, "expected number of vertices with degree >= m")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--exact", action="store_true", help="force rational arithmetic")

    p = add("coupling", cmd_coupling, "coupled tree pair: sure events and violation rate",
            seed=True, trials=True)
    p.add_argument("--n", type=int, required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--m", type=int)
    g.add_argument("--c", type=float)
    p.add_argument("--base", choices=["grow", "direct"], default="grow")
    p.add_argument("--report", help="alias for --output")

    p = add("dtv", cmd_dtv, "total variation of Z_m to Poisson over sizes", seed=True, trials=True)
    p.add_argument("--n", type=int, nargs="+", required=True)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--m", type=int, default=None, help=argparse.SUPPRESS)
    p.add_argument("--format", choices=["json", "csv"], default="json")

    p = add("maxdeg", cmd_maxdeg, "lower tail of the maximum degree", seed=True, trials=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--i", type=int, nargs="+", required=True)

    for name, func, help_ in (("correlation", cmd_correlation, "pair excess of degree tails"),
                              ("normality", cmd_normality, "moment diagnostics of Z_m")):
        p = add(name, func, help_, seed=True, trials=True)
        p.add_argument("--n", type=int, required=True)
        g = p.add_mutually_exclusive_group(required=True)
        g.add_argument("--m", type=int)
        g.add_argument("--c", type=float)

    p = add("newvertex", cmd_newvertex, "degree law of the newest vertex", seed=True, trials=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--base", choices=["direct", "grow"], default="direct")

    p = add("constants", cmd_constants, "closed-form exponents of the bounds")
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--c-prime", type=float, default=None)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ValueError, IndexError) as exc:
        print(f"robinhood {args.subcommand}: error: {exc}", file=sys.stderr)
        return 2


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
