"""The clustering and broadcast algorithms, composed from cluster primitives.

The broadcast algorithms pick one random alive node as the rumor source before
round 1 (the delta-clustering alone carries no rumor).  Every algorithm returns
an :class:`AlgorithmOutcome` whose phase log records the rounds and messages
each phase used.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import ConfigError, ScheduleConstants, TrialConfig, loglog
from .engine import IntentBatch, Kind, Metrics, Network, ResponseBatch, new_network
from .primitives import (
    adopt_received,
    cluster_activate,
    cluster_dissolve,
    cluster_merge,
    cluster_push,
    cluster_resize,
    cluster_share,
    cluster_size,
    unclustered_pull,
)


@dataclass
class AlgorithmOutcome:
    final_follow: np.ndarray
    informed: np.ndarray
    alive: np.ndarray
    metrics: Metrics
    phase_log: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)
    network: Optional[Network] = None

    @property
    def rounds(self) -> int:
        return self.metrics.rounds

    @property
    def success(self) -> bool:
        return broadcast_success(self)[0]


def broadcast_success(outcome: AlgorithmOutcome) -> tuple[bool, int]:
    """``(all alive informed, number of alive uninformed nodes)``."""
    u = int(np.count_nonzero(outcome.alive & ~outcome.informed))
    return u == 0, u


class _Run:
    def __init__(self, net: Network):
        self.net = net
        self.log: list[tuple[str, int, int]] = []
        self.extras: dict = {}

    @contextmanager
    def phase(self, name: str):
        m = self.net.metrics
        r0, k0 = m.rounds, m.messages_total
        yield
        self.log.append((name, m.rounds - r0, m.messages_total - k0))

    def outcome(self) -> AlgorithmOutcome:
        net = self.net
        return AlgorithmOutcome(
            final_follow=net.follow.copy(),
            informed=net.informed & net.alive,
            alive=net.alive.copy(),
            metrics=net.snapshot_metrics(),
            phase_log=list(self.log),
            extras=dict(self.extras),
            network=net,
        )


def _seed_rumor(net: Network) -> int:
    alive = np.flatnonzero(net.alive)
    if alive.size == 0:
        return -1
    src = int(alive[net.rng.integers(0, alive.size)])
    net.informed[src] = True
    return src


def _sample_leaders(net: Network, p: float) -> None:
    lead = net.alive & (net.rng.random(net.n) < p)
    net.follow[lead] = net.index[lead]


def _check_only_clustered(net: Network, pushers: np.ndarray) -> None:
    if net.validation and not net.clustered()[pushers].all():
        raise AssertionError("an unclustered node transmitted in a cluster push")


# -- round budgets ----------------------------------------------------------
# Per-phase round costs follow from the primitive costs; square-loop
# iterations are bounded by 2 loglog n (clustering 1) and 4 loglog n (2 and 3).

SQUARE_ITER = 2 + 1 + 2 * (2 + 1)  # resize, activate, twice {push, merge}


def round_budget(alg: str, c: ScheduleConstants) -> int:
    """The constant B with ``rounds <= B * loglog(n)`` for every run."""
    if alg == "gc1":
        return 2 * c.L_init + c.L_pull + 2 * SQUARE_ITER + (2 + 7 + 2)
    if alg == "gc2":
        return 6 * c.L_init + 4 * c.L_bpush + c.L_pull + 4 * SQUARE_ITER + (1 + 2 + 7 + 1 + 2)
    if alg == "gc3":
        return 6 * c.L_init + 6 * c.L_bpush + c.L_pull + 4 * SQUARE_ITER + (1 + 2 + 4 + 1 + 2)
    raise ValueError(alg)


def _assert_budget(net: Network, alg: str) -> None:
    limit = round_budget(alg, net.config.constants) * loglog(net.n)
    if net.metrics.rounds > limit:
        raise AssertionError(f"{alg} used {net.metrics.rounds} rounds, budget {limit}")


# -- shared phases ----------------------------------------------------------


def _square(run: _Run, s: int, target: float, merge_rule: str, update, *, check_first: bool = False) -> int:
    """Dissolve small clusters, then repeatedly resize to ``s`` and merge inactive clusters into active ones."""
    net = run.net
    cluster_dissolve(net, s)
    iters = 0
    while not (check_first and s >= target):
        cluster_resize(net, s)
        cluster_activate(net, 1.0 / s)
        for _ in range(2):
            res = cluster_push(net, Kind.LEADER_ID, net.follow, instruct=net.active, directive=False,
                               relay="min" if merge_rule == "min" else "first", collect=merge_rule)
            _check_only_clustered(net, res.pushers)
            tgt = res.leader_min if merge_rule == "min" else res.leader_pick
            cluster_merge(net, tgt, scope=~net.active)
        iters += 1
        s = update(s)
        if not check_first and s > target:
            break
    run.extras["square_iterations"] = iters
    run.extras["square_s"] = s
    return s


def _merge_all(run: _Run) -> None:
    net = run.net
    for _ in range(2):
        res = cluster_push(net, Kind.LEADER_ID, net.follow, directive=False)
        lead = net.index[res.leader_min >= 0]
        smaller = net.id_rank[res.leader_min[lead]] < net.id_rank[lead]
        tgt = np.full(net.n, -1, dtype=np.int64)
        tgt[lead[smaller]] = res.leader_min[lead[smaller]]
        cluster_merge(net, tgt)
    # merges do not chain within a round; one more pass points everyone at a current leader
    cluster_merge(net, np.full(net.n, -1, dtype=np.int64))
    sizes = net.cluster_sizes()
    run.extras["largest_cluster"] = int(sizes.max()) if sizes.size else 0


def _grow_monitored(run: _Run, thr: float, deficit: float) -> None:
    net = run.net
    c = net.config.constants
    cluster_activate(net, 1.0)
    thr_i = max(1, math.ceil(thr))

    def stop(size, last):
        return (size >= thr) & (last > 0) & (size < (2 - deficit) * last)

    for _ in range(c.L_init * loglog(net.n)):
        res = cluster_push(net, Kind.LEADER_ID, net.follow, instruct=net.active, directive=False, relay="first", collect=None)
        _check_only_clustered(net, res.pushers)
        joined = adopt_received(net, res.received)
        net.active[joined] = True
        net.last_size[joined] = 0
        cluster_size(net, scope=net.active, stop_rule=stop)
        cluster_resize(net, thr_i, scope=net.active & (net.size_view >= thr))
    run.extras["clustered_after_grow"] = int(net.clustered().sum())


def _bounded_push(run: _Run, resize_to: Optional[int] = None) -> None:
    net = run.net
    c = net.config.constants
    cluster_activate(net, 1.0)
    net.last_size[:] = 0

    def stop(size, last):
        return (last > 0) & (size < c.bpush_growth * last)

    for _ in range(c.L_bpush * loglog(net.n)):
        res = cluster_push(net, Kind.LEADER_ID, net.follow, instruct=net.active, directive=False, relay="first", collect=None)
        joined = adopt_received(net, res.received)
        net.active[joined] = True
        net.last_size[joined] = 0
        cluster_size(net, scope=net.active, stop_rule=stop)
        if resize_to is not None:
            cluster_resize(net, resize_to, scope=net.active)


def _pull_phase(run: _Run) -> None:
    net = run.net
    for _ in range(net.config.constants.L_pull * loglog(net.n)):
        unclustered_pull(net)


# -- the algorithms ---------------------------------------------------------


def gossip_clustering_1(config: TrialConfig, net: Optional[Network] = None) -> AlgorithmOutcome:
    net = net or new_network(config)
    c = config.constants
    n, lg = net.n, math.log2(net.n)
    run = _Run(net)
    run.extras["source"] = _seed_rumor(net)

    with run.phase("grow"):
        _sample_leaders(net, 1.0 / (c.C * lg))
        for _ in range(c.L_init * loglog(n)):
            res = cluster_push(net, Kind.LEADER_ID, net.follow, directive=False, relay="first", collect=None)
            adopt_received(net, res.received)
        run.extras["clustered_after_grow"] = int(net.clustered().sum())
    with run.phase("square"):
        s0 = max(1, math.ceil(c.C_prime * lg))
        _square(run, s0, math.sqrt(n) / lg, "min", lambda s: max(s + 1, math.floor(c.c_sq * s * s)))
    with run.phase("merge_all"):
        _merge_all(run)
    with run.phase("pull"):
        _pull_phase(run)
    with run.phase("share"):
        cluster_share(net)
    _assert_budget(net, "gc1")
    return run.outcome()


def gossip_clustering_2(config: TrialConfig, net: Optional[Network] = None) -> AlgorithmOutcome:
    net = net or new_network(config)
    c = config.constants
    n, lg = net.n, math.log2(net.n)
    run = _Run(net)
    run.extras["source"] = _seed_rumor(net)
    thr = c.C2_prime * lg**3

    with run.phase("grow"):
        _sample_leaders(net, 1.0 / (c.C2 * lg**4))
        _grow_monitored(run, thr, c.grow_deficit2)
    with run.phase("square"):
        _square(
            run, max(1, math.ceil(thr)), c.square_target2 * math.sqrt(n) / lg**2, "pick",
            lambda s: max(s + 1, math.floor(c.c_sq2 * s * s / lg)),
        )
    with run.phase("merge_all"):
        _merge_all(run)
    with run.phase("bounded_push"):
        _bounded_push(run)
    with run.phase("pull"):
        _pull_phase(run)
    with run.phase("share"):
        cluster_share(net)
    _assert_budget(net, "gc2")
    return run.outcome()


def delta_range(n: int) -> tuple[float, float]:
    lg = math.log2(n)
    return lg * lg, n**0.9


def gossip_clustering_3(config: TrialConfig, delta: Optional[int] = None, net: Optional[Network] = None) -> AlgorithmOutcome:
    """Partition all nodes into clusters of size about ``delta / C''`` while
    keeping every node's per-round fan-in at most ``delta``."""
    delta = config.delta if delta is None else delta
    n, lg = config.n, math.log2(config.n)
    lo, hi = delta_range(n)
    if delta is None or not lo <= delta <= hi:
        raise ConfigError(f"delta must lie in [log^2 n, n^0.9] = [{lo:.0f}, {hi:.0f}], got {delta}")
    net = net or new_network(config)
    c = config.constants
    run = _Run(net)
    thr = c.C2_prime * lg**3
    deficit = c.grow_deficit3 if c.grow_deficit3 is not None else 1.0 / lg
    target = max(1, int(delta // c.C_dprime))

    with run.phase("grow"):
        _sample_leaders(net, 1.0 / (c.C2 * lg**4))
        _grow_monitored(run, thr, deficit)
    with run.phase("square"):
        s = _square(
            run, max(1, math.ceil(thr)), math.sqrt(delta * lg) / c.C_dprime, "pick",
            lambda s: max(s + 1, math.floor(c.c_sq2 * s * s / lg)), check_first=True,
        )
    with run.phase("merge_clusters"):
        cluster_activate(net, min(1.0, 10 * s * c.C_dprime / delta))
        res = cluster_push(net, Kind.LEADER_ID, net.follow, instruct=net.active, directive=False, relay="first", collect="pick")
        cluster_merge(net, res.leader_pick, scope=~net.active)
    with run.phase("bounded_push"):
        _bounded_push(run, resize_to=target)
    with run.phase("pull"):
        _pull_phase(run)
    with run.phase("resize"):
        cluster_resize(net, target)
    run.extras["delta"] = int(delta)
    _assert_budget(net, "gc3")
    return run.outcome()


def broadcast_iterations(n: int, delta: int, kappa: float) -> int:
    return math.ceil(kappa * math.log2(n) / math.log2(delta))


def cluster_push_pull(
    config: TrialConfig, delta: Optional[int] = None, clustering: Optional[AlgorithmOutcome] = None
) -> AlgorithmOutcome:
    """Broadcast over a delta-clustering (computed first unless ``clustering`` is given)."""
    delta = config.delta if delta is None else delta
    if clustering is None:
        clustering = gossip_clustering_3(config, delta)
    net = clustering.network
    if net is None or not net.clustered().any():
        raise ConfigError("cluster_push_pull needs a clustering")
    run = _Run(net)
    run.log = list(clustering.phase_log)
    run.extras.update(clustering.extras)
    c = config.constants
    r0, m0 = net.metrics.rounds, net.metrics.messages_total

    # iteration at which each node first held the rumor: -1 not yet, -2 already
    # informed on entry (such clusters saw no flip, so they stay quiet)
    got = np.where(net.informed, -2, -1)
    if not (net.informed & net.alive).any():
        src = _seed_rumor(net)
        run.extras["source"] = src
        got[src] = 0
    with run.phase("broadcast"):
        cluster_share(net)
        got[(got == -1) & net.informed] = 0
        counts = [int(net.informed.sum())]
        iters = broadcast_iterations(net.n, delta, c.kappa_delta)
        for i in range(1, iters + 1):
            fresh = net.clustered() & (got == i - 1)
            cluster_push(net, Kind.RUMOR, scope=fresh, directive=False, collect=None)
            got[(got == -1) & net.informed] = i
            # the push already relayed every new arrival to its leader
            cluster_share(net, holders=np.zeros(net.n, dtype=bool))
            got[(got == -1) & net.informed] = i
            counts.append(int(net.informed.sum()))
        resp = ResponseBatch(net.n).set(np.flatnonzero(net.informed), Kind.RUMOR)
        need = np.flatnonzero(net.alive & ~net.informed)
        net.run_round(IntentBatch.pull_random(need), resp)
        cluster_share(net)
    run.extras["informed_per_iteration"] = counts
    run.extras["broadcast_iterations"] = iters
    run.extras["broadcast_messages"] = net.metrics.messages_total - m0
    run.extras["broadcast_rounds"] = net.metrics.rounds - r0
    return run.outcome()


ALGORITHMS = {
    "gc1": gossip_clustering_1,
    "gc2": gossip_clustering_2,
    "gc3": gossip_clustering_3,
    "cpp": cluster_push_pull,
}


def run_algorithm(alg: str, config: TrialConfig) -> AlgorithmOutcome:
    if alg not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {alg!r}")
    return ALGORITHMS[alg](config)


def clustering_ok(outcome: AlgorithmOutcome, delta: int) -> bool:
    """Delta-clustering check: every alive node clustered, sizes in
    ``[delta / (2 C''), 2 delta / C'']``, per-round fan-in at most ``delta``."""
    net = outcome.network
    c = net.config.constants
    if not (net.clustered() | ~net.alive).all():
        return False
    sizes = net.cluster_sizes()
    lo, hi = delta / (2 * c.C_dprime), 2 * delta / c.C_dprime
    return bool(sizes.size and sizes.min() >= lo and sizes.max() <= hi and outcome.metrics.max_fanin <= delta)
