"""Round and message scaling of gc1 and gc2 across n, with a log log n fit.

Writes one CSV plus summary JSON per algorithm into --outdir and prints a
table of medians.
"""

import argparse
import math
from pathlib import Path

from dagossip.experiments import SweepSpec, run_sweep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--algs", nargs="+", default=["gc1", "gc2"])
    ap.add_argument("--log2n", nargs="+", type=int, default=[12, 14, 16, 18, 20])
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    ns = [1 << k for k in args.log2n]
    for alg in args.algs:
        spec = SweepSpec(alg, ns, trials=args.trials, jobs=args.jobs, out=str(out / f"{alg}.csv"))
        _, summary, errors = run_sweep(spec)
        for e in errors:
            print("error:", e)
        print(f"\n{alg}")
        print(f"{'log2 n':>6} {'loglog':>6} {'success':>8} {'rounds':>7} {'msgs/n':>7}")
        for p in summary["points"]:
            print(f"{int(math.log2(p['n'])):>6} {math.ceil(math.log2(math.log2(p['n']))):>6} "
                  f"{p['success_rate']:>8.2f} {p['median_rounds']:>7.0f} {p['median_avg_msgs_per_node']:>7.2f}")
        fit = summary["loglog_fit"]
        if fit:
            print(f"rounds ~ {fit['slope']:.2f} * loglog n + {fit['intercept']:.2f} "
                  f"(max rel residual {fit['max_relative_residual']:.3f})")


if __name__ == "__main__":
    main()
