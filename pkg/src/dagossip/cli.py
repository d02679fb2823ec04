"""Command-line entry point: ``simulate``, ``sweep`` and ``lowerbound``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError
from .experiments import ALGS, SweepSpec, parse_config_text, run_sweep, summary_path


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dagossip", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("simulate", help="run a batch of trials at one n")
    s.add_argument("--alg", choices=ALGS, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--trials", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--delta", type=int)
    s.add_argument("--fail-f", type=int)
    s.add_argument("--adversary-seed", type=int, default=0)
    s.add_argument("--rumor-bits", type=int)
    s.add_argument("--validate", action="store_true")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--timing", action="store_true", help="add a wall_time column (breaks byte-identical reruns)")
    s.add_argument("--out", required=True)

    w = sub.add_parser("sweep", help="run a sweep described by a key = value file")
    w.add_argument("--config", required=True)
    w.add_argument("--out", required=True)
    w.add_argument("--jobs", type=int)

    lb = sub.add_parser("lowerbound", help="minimum feasible rounds on sampled contact graphs")
    lb.add_argument("--n", type=int, required=True)
    lb.add_argument("--max-t", type=int, default=8)
    lb.add_argument("--trials", type=int, default=1)
    lb.add_argument("--seed", type=int, default=0)
    lb.add_argument("--out", required=True)
    return p


def _spec(args) -> SweepSpec:
    if args.cmd == "simulate":
        return SweepSpec(
            algorithm=args.alg, n_values=[args.n], trials=args.trials, base_seed=args.seed,
            delta=args.delta, fail_f=args.fail_f, adversary_seed=args.adversary_seed,
            rumor_bits=args.rumor_bits, validate=args.validate, jobs=args.jobs,
            timing=args.timing, out=args.out,
        )
    if args.cmd == "sweep":
        spec = parse_config_text(Path(args.config).read_text())
        spec.out = args.out
        if args.jobs is not None:
            spec.jobs = args.jobs
        return spec
    return SweepSpec(algorithm="lb", n_values=[args.n], trials=args.trials, base_seed=args.seed,
                     max_t=args.max_t, out=args.out)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        spec = _spec(args)
        spec.check()
        out = Path(spec.out)
        if not out.parent.exists():
            raise ConfigError(f"output directory {out.parent} does not exist")
        rows, summary, errors = run_sweep(spec)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for e in errors:
        print(f"trial failed: {e}", file=sys.stderr)
    print(f"wrote {len(rows)} rows to {spec.out} and {summary_path(spec.out)}")
    return 0 if not errors else 1


if __name__ == "__main__":
    sys.exit(main())
