"""Coupling violation rate P(I_v < J_v) against n at fixed c, with the n^{-1-beta} envelope.

CSV columns: n, m, rate, stderr, envelope, sure_events_hold.
"""
import argparse
import math

from robinhood.coupling import estimate_violation


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--log2-n", type=int, nargs="+", default=[6, 7, 8, 9, 10])
    ap.add_argument("--c", type=float, default=1.3)
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--base", choices=["grow", "direct"], default="direct")
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()
    print("n,m,rate,stderr,envelope,sure_events_hold")
    for k in args.log2_n:
        n = 2**k
        m = math.ceil(args.c * math.log(n))
        r = estimate_violation(n, m, args.trials, args.seed, base=args.base, threads=args.threads)
        env = "" if r.envelope is None else r.envelope
        print(f"{n},{m},{r.rate.estimate},{r.rate.stderr},{env},{r.sure_events_hold}", flush=True)


if __name__ == "__main__":
    main()
