"""Trial batches, sweeps, summaries and the log log n fit."""

from __future__ import annotations

import csv
import json
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .algorithms import broadcast_success, clustering_ok, run_algorithm
from .config import ConfigError, FailureSpec, ScheduleConstants, TrialConfig
from . import lowerbound as lb

SCHEMA_VERSION = 1
ALGS = ("gc1", "gc2", "gc3", "cpp")


@dataclass
class ResultRow:
    algorithm: str
    n: int
    seed: int
    success: bool
    rounds: int
    messages_total: int
    avg_msgs_per_node: float
    bits_total: int
    max_fanin: int
    uninformed_survivors: int
    wall_time: Optional[float] = None


ROW_FIELDS = [f.name for f in fields(ResultRow)]


@dataclass
class SweepSpec:
    algorithm: str
    n_values: list
    trials: int = 1
    base_seed: int = 0
    delta: Optional[int] = None
    fail_f: Optional[int] = None
    adversary_seed: int = 0
    rumor_bits: Optional[int] = None
    constants: dict = field(default_factory=dict)
    out: Optional[str] = None
    validate: bool = False
    jobs: int = 1
    timing: bool = False
    max_t: int = 8

    def check(self) -> None:
        if self.algorithm not in ALGS + ("lb",):
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.n_values:
            raise ConfigError("need at least one n")
        if list(self.n_values) != sorted(self.n_values):
            raise ConfigError("n values must be sorted ascending")
        unknown = set(self.constants) - {f.name for f in fields(ScheduleConstants)}
        if unknown:
            raise ConfigError(f"unknown schedule constants: {sorted(unknown)}")

    def trial_config(self, n: int, seed: int) -> TrialConfig:
        failure = FailureSpec() if not self.fail_f else FailureSpec.uniform(self.fail_f, self.adversary_seed)
        cfg = TrialConfig(
            n=n, seed=seed, rumor_bits=self.rumor_bits, delta=self.delta,
            failure=failure, validation=self.validate,
            constants=replace(ScheduleConstants(), **self.constants),
        )
        cfg.validate()
        return cfg


def run_trial(alg: str, config: TrialConfig, timing: bool = False) -> ResultRow:
    t0 = time.perf_counter()
    out = run_algorithm(alg, config)
    wall = time.perf_counter() - t0
    m = out.metrics
    ok, u = broadcast_success(out)
    if alg == "gc3":
        # no rumor here: success is a valid delta-clustering, and the survivor
        # column counts alive nodes left unclustered
        ok = clustering_ok(out, config.delta)
        u = int(np.count_nonzero(out.network.unclustered()))
    return ResultRow(
        algorithm=alg, n=config.n, seed=config.seed, success=bool(ok), rounds=m.rounds,
        messages_total=m.messages_total, avg_msgs_per_node=m.messages_total / config.n,
        bits_total=m.bits_total, max_fanin=m.max_fanin, uninformed_survivors=u,
        wall_time=round(wall, 3) if timing else None,
    )


def _job(args):
    alg, cfg, timing = args
    try:
        return run_trial(alg, cfg, timing), None
    except Exception as exc:  # a failed trial is reported, the batch continues
        return None, f"{alg} n={cfg.n} seed={cfg.seed}: {type(exc).__name__}: {exc}"


def run_trials(spec: SweepSpec) -> tuple[list[ResultRow], list[str]]:
    spec.check()
    tasks = [
        (spec.algorithm, spec.trial_config(n, spec.base_seed + i), spec.timing)
        for n in spec.n_values
        for i in range(spec.trials)
    ]
    if spec.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as ex:
            results = list(ex.map(_job, tasks))
    else:
        results = [_job(t) for t in tasks]
    rows = [r for r, _ in results if r is not None]
    errors = [e for _, e in results if e is not None]
    return rows, errors


# -- files ------------------------------------------------------------------


def _columns(timing: bool) -> list[str]:
    return ROW_FIELDS if timing else [c for c in ROW_FIELDS if c != "wall_time"]


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_rows(path, rows: Sequence[ResultRow], timing: bool = False) -> None:
    cols = _columns(timing)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["schema_version"] + cols) + "\n")
        for r in rows:
            d = asdict(r)
            fh.write(",".join([str(SCHEMA_VERSION)] + [_fmt(d[c]) for c in cols]) + "\n")


def read_rows(path) -> list[ResultRow]:
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            if int(rec.get("schema_version") or 0) != SCHEMA_VERSION:
                raise ValueError(f"{path}: unsupported result schema {rec.get('schema_version')!r}")
            out.append(ResultRow(
                algorithm=rec["algorithm"], n=int(rec["n"]), seed=int(rec["seed"]),
                success=rec["success"] == "1", rounds=int(rec["rounds"]),
                messages_total=int(rec["messages_total"]), avg_msgs_per_node=float(rec["avg_msgs_per_node"]),
                bits_total=int(rec["bits_total"]), max_fanin=int(rec["max_fanin"]),
                uninformed_survivors=int(rec["uninformed_survivors"]),
                wall_time=float(rec["wall_time"]) if rec.get("wall_time") not in (None, "") else None,
            ))
    return out


def summary_path(out) -> Path:
    return Path(out).with_suffix(".summary.json")


# -- statistics -------------------------------------------------------------


@dataclass
class LoglogFit:
    slope: float
    intercept: float
    residuals: list
    max_residual: float
    max_relative_residual: float


def fit_loglog(rows: Sequence[ResultRow] | Sequence[tuple[int, float]]) -> LoglogFit:
    """Least squares of median rounds against ``log2 log2 n``.

    Accepts result rows (medians are taken per n) or ``(n, rounds)`` pairs.
    """
    by_n: dict[int, list[float]] = {}
    for r in rows:
        n, v = (r.n, r.rounds) if isinstance(r, ResultRow) else r
        by_n.setdefault(int(n), []).append(float(v))
    if len(by_n) < 3:
        raise ValueError(f"fit_loglog needs at least 3 distinct n, got {len(by_n)}")
    ns = sorted(by_n)
    x = np.array([math.log2(math.log2(n)) for n in ns])
    y = np.array([statistics.median(by_n[n]) for n in ns])
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - (slope * x + intercept)
    # exact fits come back with rounding noise around 1e-13
    res = np.where(np.abs(res) < 1e-9 * max(1.0, np.abs(y).max()), 0.0, res)
    rel = np.abs(res) / np.where(y != 0, np.abs(y), 1.0)
    return LoglogFit(float(slope), float(intercept), [float(v) for v in res], float(np.abs(res).max()), float(rel.max()))


def summarize(rows: Sequence[ResultRow], algorithm: str) -> dict:
    by_n: dict[int, list[ResultRow]] = {}
    for r in rows:
        by_n.setdefault(r.n, []).append(r)
    points = []
    for n in sorted(by_n):
        rs = by_n[n]
        points.append({
            "n": n,
            "trials": len(rs),
            "success_rate": sum(r.success for r in rs) / len(rs),
            "median_rounds": statistics.median(r.rounds for r in rs),
            "median_avg_msgs_per_node": statistics.median(r.avg_msgs_per_node for r in rs),
            "median_bits_total": statistics.median(r.bits_total for r in rs),
            "median_max_fanin": statistics.median(r.max_fanin for r in rs),
            "median_uninformed_survivors": statistics.median(r.uninformed_survivors for r in rs),
        })
    fit = None
    if len(by_n) >= 3:
        f = fit_loglog(rows)
        fit = {"slope": f.slope, "intercept": f.intercept, "max_residual": f.max_residual,
               "max_relative_residual": f.max_relative_residual}
    return {"schema_version": SCHEMA_VERSION, "algorithm": algorithm, "points": points, "loglog_fit": fit}


def write_summary(path, summary: dict) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_sweep(spec: SweepSpec) -> tuple[list[ResultRow], dict, list[str]]:
    """Run every trial of ``spec``; write rows and summary when ``spec.out`` is set."""
    if spec.algorithm == "lb":
        return run_lowerbound(spec)
    rows, errors = run_trials(spec)
    summary = summarize(rows, spec.algorithm)
    if spec.out:
        write_rows(spec.out, rows, spec.timing)
        write_summary(summary_path(spec.out), summary)
    return rows, summary, errors


def run_lowerbound(spec: SweepSpec):
    rows: list[lb.FeasibilityRow] = []
    for n in spec.n_values:
        for i in range(spec.trials):
            rows.extend(lb.feasibility_trace(n, spec.base_seed + i, spec.max_t))
    per_seed = {}
    for r in rows:
        if r.feasible:
            per_seed.setdefault(r.n, {})[r.seed] = r.T
    summary = {
        "schema_version": SCHEMA_VERSION,
        "algorithm": "lb",
        "points": [
            {"n": n, "trials": spec.trials, "min_feasible_T": sorted(per_seed.get(n, {}).values()),
             "median_feasible_T": statistics.median(per_seed[n].values()) if per_seed.get(n) else None}
            for n in spec.n_values
        ],
    }
    if spec.out:
        lb.write_lb_csv(spec.out, rows)
        write_summary(summary_path(spec.out), summary)
    return rows, summary, []


# -- config files -----------------------------------------------------------

_KEYS = {
    "alg": "algorithm", "n": "n_values", "trials": "trials", "seed": "base_seed", "delta": "delta",
    "fail-f": "fail_f", "adversary-seed": "adversary_seed", "rumor-bits": "rumor_bits",
    "validate": "validate", "jobs": "jobs", "timing": "timing", "max-t": "max_t", "out": "out",
}


def parse_config_text(text: str) -> SweepSpec:
    """Flat ``key = value`` lines; keys are the CLI flag names, ``n`` may list
    several values and ``const.NAME`` overrides a schedule constant."""
    kw: dict = {"constants": {}}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (p.strip() for p in line.split("=", 1))
        key = key.lstrip("-")
        if key.startswith("const."):
            kw["constants"][key[6:]] = _number(val)
            continue
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        name = _KEYS[key]
        if name == "n_values":
            kw[name] = [int(_number(v)) for v in val.replace(",", " ").split()]
        elif name in ("validate", "timing"):
            kw[name] = val.lower() in ("1", "true", "yes", "on")
        elif name in ("algorithm", "out"):
            kw[name] = val
        else:
            kw[name] = int(_number(val))
    if "algorithm" not in kw or "n_values" not in kw:
        raise ConfigError("config needs at least 'alg' and 'n'")
    spec = SweepSpec(**kw)
    spec.check()
    return spec


def _number(val: str):
    v = val.strip()
    if "^" in v:
        base, exp = v.split("^")
        return int(base) ** int(exp)
    try:
        return int(v)
    except ValueError:
        return float(v)
