"""Smallest T at which the union contact graph has diameter <= 2^T, per seed."""

import argparse
import statistics

from dagossip import lowerbound as lb


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--log2n", nargs="+", type=int, default=[10, 12, 14, 16, 18, 20])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--max-t", type=int, default=8)
    ap.add_argument("--out", default=None, help="optional CSV of every (n, seed, T) row")
    args = ap.parse_args()
    rows = []
    print(f"{'log2 n':>6} {'median T':>8} {'min':>4} {'max':>4}")
    for k in args.log2n:
        n = 1 << k
        per_seed = {}
        for s in range(args.seeds):
            trace = lb.feasibility_trace(n, s, args.max_t)
            rows.extend(trace)
            per_seed[s] = trace[-1].T if trace[-1].feasible else None
        Ts = [t for t in per_seed.values() if t is not None]
        if Ts:
            print(f"{k:>6} {statistics.median(Ts):>8} {min(Ts):>4} {max(Ts):>4}", flush=True)
        else:
            print(f"{k:>6} {'none':>8}", flush=True)
    if args.out:
        lb.write_lb_csv(args.out, rows)


if __name__ == "__main__":
    main()
