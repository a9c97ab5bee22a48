"""Lower tail of the maximum degree against exp(-lambda_exact) and the double-exponential form.

CSV columns: n, i, threshold, empirical, stderr, exp_minus_lambda, gumbel, lambda_ratio.
"""
import argparse
import math

from robinhood.stats import degree_sample, max_degree_tail


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--log2-n", type=int, nargs="+", default=[10, 12, 14, 16])
    ap.add_argument("--i", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()
    print("n,i,threshold,empirical,stderr,exp_minus_lambda,gumbel,lambda_ratio")
    for k in args.log2_n:
        n = 2**k
        top = math.floor(math.log2(n))
        ms = [top - i for i in args.i if top - i > 0]
        sample = degree_sample(n, ms, args.trials, args.seed, args.threads)
        for i in args.i:
            r = max_degree_tail(n, i, args.trials, args.seed, sample=sample)
            e = r.empirical
            print(f"{n},{i},{r.threshold},{e.estimate},{e.stderr},{e.reference},"
                  f"{r.gumbel_reference},{r.lambda_ratio}", flush=True)


if __name__ == "__main__":
    main()
