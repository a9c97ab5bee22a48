"""Exact checks at desk scale: uniform preservation and the three-property characterization.

Writes one JSON object per n to stdout.
"""
import argparse
import json
import time

from robinhood.exact import characterization_check, pruned_measure, verify_uniform_preservation


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-max", type=int, default=5)
    args = ap.parse_args()
    for n in range(2, args.n_max + 1):
        t0 = time.perf_counter()
        cert = verify_uniform_preservation(n)
        char = characterization_check(n, pruned_measure(n))
        out = cert.to_json()
        out["characterization"] = char.to_json()
        out["seconds"] = round(time.perf_counter() - t0, 3)
        print(json.dumps(out, sort_keys=True), flush=True)


if __name__ == "__main__":
    main()
