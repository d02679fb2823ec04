import math

import numpy as np
import pytest

from dagossip import ConfigError, FailureSpec, TrialConfig, loglog
from dagossip.algorithms import (
    SQUARE_ITER,
    broadcast_iterations,
    broadcast_success,
    cluster_push_pull,
    clustering_ok,
    delta_range,
    gossip_clustering_1,
    gossip_clustering_2,
    gossip_clustering_3,
    round_budget,
    run_algorithm,
)
from dagossip.calibration import KAPPA
from dagossip.config import ScheduleConstants


@pytest.fixture(scope="module")
def gc1_16():
    return gossip_clustering_1(TrialConfig(n=1 << 16, seed=0))


@pytest.fixture(scope="module")
def gc2_16():
    return gossip_clustering_2(TrialConfig(n=1 << 16, seed=0))


@pytest.fixture(scope="module")
def cpp_14():
    return cluster_push_pull(TrialConfig(n=1 << 14, seed=1, delta=256))


def test_gc1_informs_everyone(gc1_16):
    assert broadcast_success(gc1_16) == (True, 0)


def test_gc1_one_big_cluster_after_merge(gc1_16):
    assert gc1_16.extras["largest_cluster"] >= 0.9 * (1 << 16)


def test_phase_rounds_add_up(gc1_16, gc2_16, cpp_14):
    for out in (gc1_16, gc2_16, cpp_14):
        assert sum(r for _, r, _ in out.phase_log) == out.metrics.rounds
        assert sum(m for _, _, m in out.phase_log) == out.metrics.messages_total


@pytest.mark.parametrize("alg", ["gc1", "gc2"])
def test_rounds_within_budget(alg, gc1_16, gc2_16):
    out = gc1_16 if alg == "gc1" else gc2_16
    c = ScheduleConstants()
    assert out.metrics.rounds <= round_budget(alg, c) * loglog(1 << 16)


def test_square_iteration_bounds(gc1_16, gc2_16):
    ll = math.log2(math.log2(1 << 16))
    assert gc1_16.extras["square_iterations"] <= 2 * ll
    assert gc2_16.extras["square_iterations"] <= 4 * ll


def test_budget_formula():
    c = ScheduleConstants()
    assert SQUARE_ITER == 9
    assert round_budget("gc1", c) == 2 * c.L_init + c.L_pull + 18 + 11
    with pytest.raises(ValueError):
        round_budget("nope", c)


def test_gc1_degenerate_n4():
    cfg = TrialConfig(n=4).with_constants(C=0.01, C_prime=0.0001)
    out = gossip_clustering_1(cfg)
    assert out.metrics.rounds <= round_budget("gc1", cfg.constants) * loglog(4)
    assert out.alive.all()


def test_gc2_informs_and_keeps_payloads_small(gc2_16):
    assert gc2_16.success
    net = gc2_16.network
    assert gc2_16.metrics.max_control_bits <= 3 * net.id_bits


def test_gc2_grow_fraction(gc2_16):
    n = 1 << 16
    lg = math.log2(n)
    got = gc2_16.extras["clustered_after_grow"]
    assert n / (KAPPA * lg) <= got <= KAPPA * n / lg


def test_gc2_small_n():
    out = gossip_clustering_2(TrialConfig(n=1 << 12, seed=3))
    assert out.success


def test_determinism():
    cfg = TrialConfig(n=1 << 12, seed=7)
    a, b = gossip_clustering_2(cfg), gossip_clustering_2(cfg)
    assert np.array_equal(a.final_follow, b.final_follow)
    assert np.array_equal(a.informed, b.informed)
    assert a.metrics.bits_total == b.metrics.bits_total
    assert a.metrics.max_fanin_per_round == b.metrics.max_fanin_per_round
    assert np.array_equal(a.metrics.per_node_messages, b.metrics.per_node_messages)


@pytest.mark.parametrize("alg", ["gc1", "gc2", "gc3"])
def test_validation_mode_runs_clean(alg):
    # direct-addressing and only-clustered-transmit checks raise on violation
    cfg = TrialConfig(n=1 << 10, seed=2, validation=True, delta=128 if alg == "gc3" else None)
    out = run_algorithm(alg, cfg)
    assert out.metrics.rounds > 0


def test_failures_leave_informed_inside_alive():
    cfg = TrialConfig(n=1 << 12, seed=4, failure=FailureSpec.uniform(400, 1))
    out = gossip_clustering_2(cfg)
    assert not (out.informed & ~out.alive).any()
    ok, u = broadcast_success(out)
    assert u == int((out.alive & ~out.informed).sum())


def test_delta_range_checks():
    n = 1 << 14
    lo, hi = delta_range(n)
    with pytest.raises(ConfigError):
        gossip_clustering_3(TrialConfig(n=n, delta=int(lo) - 1))
    with pytest.raises(ConfigError):
        gossip_clustering_3(TrialConfig(n=n, delta=n))
    with pytest.raises(ConfigError):
        gossip_clustering_3(TrialConfig(n=n))


def test_gc3_clustering(cpp_14):
    assert clustering_ok(cpp_14, 256)
    assert cpp_14.metrics.max_fanin <= 256


def test_broadcast_iterations_arithmetic():
    assert broadcast_iterations(1 << 20, 1 << 10, 3) == 6


def test_cpp_informs_and_respects_growth_cap(cpp_14):
    assert cpp_14.success
    c = ScheduleConstants()
    delta = 256
    for r, k in enumerate(cpp_14.extras["informed_per_iteration"]):
        assert k <= 2 * delta / c.C_dprime * (delta + 1) ** r
    assert cpp_14.extras["broadcast_iterations"] <= broadcast_iterations(1 << 14, delta, c.kappa_delta)


def test_cpp_pre_informed_sends_no_pushes():
    cfg = TrialConfig(n=1 << 14, seed=5, delta=256)
    clus = gossip_clustering_3(cfg)
    net = clus.network
    net.informed[net.alive] = True
    members = int((net.clustered() & (net.follow != net.index)).sum())
    out = cluster_push_pull(cfg, clustering=clus)
    # only the two shares' holder pushes; no cluster pushes the rumor again
    assert out.extras["broadcast_messages"] == 2 * members
    assert len(set(out.extras["informed_per_iteration"])) == 1


def test_cpp_needs_clustering():
    cfg = TrialConfig(n=1 << 12, seed=0, delta=256)
    clus = gossip_clustering_3(cfg)
    clus.network.follow[:] = -1
    with pytest.raises(ConfigError):
        cluster_push_pull(cfg, clustering=clus)


def test_unknown_algorithm():
    with pytest.raises(ValueError):
        run_algorithm("gc9", TrialConfig(n=16))
