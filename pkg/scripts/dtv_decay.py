"""Empirical d_TV(Z_m, Poi(lambda_exact)) with m = ceil(c ln n) over dyadic n; prints CSV."""
import argparse

from robinhood.stats import dtv_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--log2-n", type=int, nargs="+", default=[8, 10, 12, 14])
    ap.add_argument("--c", type=float, nargs="+", default=[1.3])
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()
    for c in args.c:
        sweep = dtv_sweep([2**k for k in args.log2_n], c, args.trials, args.seed, args.threads)
        print(f"# c={c} decreasing={sweep.decreasing} endpoints={sweep.endpoint_decrease}")
        print(sweep.to_csv(), end="", flush=True)


if __name__ == "__main__":
    main()
