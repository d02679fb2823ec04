"""Rerun the calibration sweep and print the values to commit in dagossip/calibration.py."""

import argparse
import json
import time
from dataclasses import asdict

from dagossip.calibration import calibrate


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=100)
    ap.add_argument("--measure-seeds", type=int, default=50)
    ap.add_argument("--out", default=None, help="optional JSON dump")
    args = ap.parse_args()
    t0 = time.time()
    cal = calibrate(args.seeds, args.measure_seeds, log=lambda s: print(s, flush=True))
    print("constants:", cal.constants)
    print("observed:", cal.observed)
    print(f"K0 = {cal.K0}\nKAPPA = {cal.KAPPA}\nKAPPA_M = {cal.KAPPA_M}\nKAPPA_M_BROADCAST = {cal.KAPPA_M_BROADCAST}")
    print(f"[{time.time() - t0:.0f}s]")
    if args.out:
        rec = {
            "constants": asdict(cal.constants),
            "observed": cal.observed,
            "K0": cal.K0, "KAPPA": cal.KAPPA, "KAPPA_M": cal.KAPPA_M,
            "KAPPA_M_BROADCAST": cal.KAPPA_M_BROADCAST,
            "success": [list(k) + [v] for k, v in cal.success.items()],
        }
        with open(args.out, "w") as fh:
            json.dump(rec, fh, indent=2)


if __name__ == "__main__":
    main()
