import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dagossip import (
    Action,
    ConfigError,
    ContractError,
    FailureSpec,
    IntentBatch,
    Kind,
    ModelViolation,
    Payload,
    ResponseBatch,
    ResponsePlan,
    RoundIntent,
    TrialConfig,
    UnsupportedMode,
    new_network,
)
from dagossip.engine import KIND_TAG_BITS, NO_PAYLOAD, BitSizes, failed_nodes, first_arrival

from conftest import make_net


def test_fresh_network_n4():
    net = make_net(4)
    assert net.alive.sum() == 4
    assert net.clustered().sum() == 0
    assert net.informed.sum() == 0
    assert len(set(net.ids.tolist())) == 4
    assert (net.ids < 16).all()  # ID space n^2


def test_uniform_failures_remove_exactly_f():
    net = new_network(TrialConfig(n=100, failure=FailureSpec.uniform(10, 7)))
    assert net.alive.sum() == 90


def test_same_seed_same_ids_and_failures():
    cfg = TrialConfig(n=100, seed=5, failure=FailureSpec.uniform(10, 7))
    a, b = new_network(cfg), new_network(cfg)
    assert np.array_equal(a.ids, b.ids)
    assert np.array_equal(a.alive, b.alive)


def test_failures_ignore_trial_seed():
    spec = FailureSpec.uniform(25, 3)
    a = new_network(TrialConfig(n=200, seed=1, failure=spec))
    b = new_network(TrialConfig(n=200, seed=99, failure=spec))
    assert np.array_equal(a.alive, b.alive)
    assert not np.array_equal(a.ids, b.ids)


@pytest.mark.parametrize("cfg", [
    TrialConfig(n=3),
    TrialConfig(n=10, failure=FailureSpec.uniform(11)),
    TrialConfig(n=10, delta=11),
    TrialConfig(n=10, rumor_bits=0),
])
def test_invalid_configs_rejected(cfg):
    with pytest.raises(ConfigError):
        new_network(cfg)


def test_idle_round():
    net = make_net(8)
    rep = net.run_round(IntentBatch.build(np.arange(8), Action.IDLE))
    assert net.metrics.messages_total == 0
    assert net.metrics.rounds == 1
    assert rep.messages == 0


def test_push_to_failed_node_counts_but_is_not_delivered():
    net = new_network(TrialConfig(n=8, failure=FailureSpec.explicit([5])))
    rep = net.run_round(IntentBatch.push_direct([0], [5], Kind.LEADER_ID, [0]))
    assert net.metrics.messages_total == 1
    assert rep.push_dst.size == 0
    assert rep.payloads_received_by(5) == []


def test_pull_replay_n4():
    # oracle: the round engine draws random targets from default_rng([seed, 2])
    seed = 11
    net = make_net(4, seed=seed)
    expected = np.random.default_rng([seed, 2]).integers(0, 4, 4)
    resp = ResponseBatch(4).set(np.arange(4), Kind.FOLLOW_VALUE, np.arange(4))
    rep = net.run_round(IntentBatch.pull_random(np.arange(4)), resp)
    assert rep.pull_dst.tolist() == expected.tolist()
    assert rep.pull_value.tolist() == expected.tolist()
    assert net.metrics.messages_total == 4 + 4


def test_pull_replay_n4_with_a_failed_responder():
    seed = 2
    net = new_network(TrialConfig(n=4, seed=seed, failure=FailureSpec.explicit([1])))
    expected = np.random.default_rng([seed, 2]).integers(0, 4, 3)
    pullers = np.array([0, 2, 3])
    resp = ResponseBatch(4).set(np.arange(4), Kind.FOLLOW_VALUE, np.arange(4))
    rep = net.run_round(IntentBatch.pull_random(pullers), resp)
    assert rep.pull_dst.tolist() == expected.tolist()
    landed = int(np.count_nonzero(expected != 1))
    assert net.metrics.messages_total == 3 + landed
    assert ((rep.pull_kind == NO_PAYLOAD) == (expected == 1)).all()


def test_two_intents_from_one_node_rejected():
    net = make_net(8)
    with pytest.raises(ContractError):
        net.run_round(IntentBatch.push_random([1, 1], Kind.FLAG, [1, 1]))
    with pytest.raises(ContractError):
        IntentBatch.from_intents([RoundIntent.pull_random(2), RoundIntent.push_random(2, Payload(Kind.FLAG, 1))])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 15), min_size=1, max_size=40))
def test_one_intent_rule(srcs):
    net = make_net(16)
    batch = IntentBatch.push_random(np.array(srcs), Kind.FLAG, 1)
    if len(set(srcs)) < len(srcs):
        with pytest.raises(ContractError):
            net.run_round(batch)
        assert net.metrics.rounds == 0
    else:
        net.run_round(batch)
        assert net.metrics.messages_total == len(srcs)


def test_failed_node_cannot_initiate():
    net = new_network(TrialConfig(n=8, failure=FailureSpec.explicit([3])))
    with pytest.raises(ContractError):
        net.run_round(IntentBatch.pull_random([3]))


def test_learned_ids():
    net = make_net(8, validation=True)
    assert net.learned_ids(4) == {4}
    # node 0 has never heard of node 4
    with pytest.raises(ModelViolation):
        net.run_round(IntentBatch.push_direct([0], [4], Kind.LEADER_ID, [0]))


def test_learned_ids_from_payload_and_pull():
    net = make_net(8, validation=True)
    # a random push reveals sender and carried ID to whoever receives it
    rep = net.run_round(IntentBatch.push_random([2], Kind.LEADER_ID, [2]))
    v = int(rep.push_dst[0])
    assert 2 in net.learned_ids(v)
    # v now pulls 2 directly; 2 learns v and v learns what 2 answered
    resp = ResponseBatch(8).set([2], Kind.LEADER_ID, [6])
    if v != 2:
        net.run_round(IntentBatch.pull_direct([v], [2]), resp)
        assert v in net.learned_ids(2)
        assert 6 in net.learned_ids(v)


def test_learned_ids_needs_validation_mode():
    with pytest.raises(UnsupportedMode):
        make_net(8).learned_ids(0)
    with pytest.raises(UnsupportedMode):
        make_net(8).delivery_log()


def test_snapshot_metrics():
    net = make_net(32)
    m = net.snapshot_metrics()
    assert (m.rounds, m.messages_total, m.bits_total, m.max_fanin) == (0, 0, 0, 0)
    net.run_round(IntentBatch.push_random(np.arange(32), Kind.FLAG, 1))
    m2 = net.snapshot_metrics()
    assert m2.messages_total == 32
    assert m2.avg_messages_per_node == 1.0
    assert m.messages_total == 0  # the old snapshot is a copy


def test_bit_sizes():
    s = BitSizes.for_n(1 << 10, 40)
    assert s.id_bits == 20
    assert s.count_bits == 11
    assert s.payload_bits(Kind.LEADER_LIST, 3) == 60
    assert s.payload_bits(Kind.RUMOR) == 40
    assert s.payload_bits(Kind.EMPTY) == 1
    assert Payload(Kind.LEADER_ID, 5).bits(s) == 20
    with pytest.raises(ValueError):
        Payload(Kind.LEADER_LIST, ids=())


def test_rumor_default_bits():
    assert TrialConfig(n=1000).b == 40
    assert TrialConfig(n=1000, rumor_bits=7).b == 7


def test_pullers_of_one_responder_see_equal_payloads():
    net = make_net(64, seed=4)
    resp = ResponseBatch(64).set(np.arange(64), Kind.COUNT, count=np.arange(64) * 3)
    rep = net.run_round(IntentBatch.pull_direct(np.arange(1, 64), np.zeros(63, int)), resp)
    assert (rep.pull_count == 0).all()
    assert len({rep.responses.payload_of(int(d)) for d in rep.pull_dst}) == 1


def test_response_plans_from_scalar_api():
    rb = ResponseBatch.from_plans([
        ResponsePlan(0, Payload(Kind.LEADER_ID, 3)),
        ResponsePlan(1, Payload(Kind.LEADER_LIST, ids=(2, 5))),
        ResponsePlan(2, None),
    ], 6)
    assert rb.payload_of(0) == Payload(Kind.LEADER_ID, 3)
    assert rb.payload_of(1).ids == (2, 5)
    assert rb.payload_of(2) is None
    with pytest.raises(ContractError):
        ResponseBatch.from_plans([ResponsePlan(0), ResponsePlan(0)], 4)


def test_fanin_recorded_per_round():
    net = make_net(16)
    net.run_round(IntentBatch.push_direct(np.arange(1, 9), np.zeros(8, int), Kind.FLAG, 1))
    net.run_round(IntentBatch.push_direct(np.arange(1, 4), np.full(3, 5), Kind.FLAG, 1))
    assert net.metrics.max_fanin_per_round == [8, 3]


def test_first_arrival_picks_earliest():
    out = first_arrival(4, np.array([1, 1, 2, 1]), np.array([0.5, 0.2, 0.9, 0.7]), np.array([10, 20, 30, 40]))
    assert out.tolist() == [-1, 20, 30, -1]


def _random_round(net, rng):
    n = net.n
    src = np.flatnonzero(net.alive & (rng.random(n) < 0.7))
    act = rng.choice([Action.PUSH_RANDOM, Action.PULL_RANDOM, Action.IDLE], src.size)
    kind = rng.choice([Kind.FLAG, Kind.LEADER_ID, Kind.RUMOR, Kind.COUNT], src.size)
    batch = IntentBatch.build(src, act, None, kind, src)
    resp = ResponseBatch(n)
    who = np.flatnonzero(rng.random(n) < 0.6)
    resp.set(who, Kind.FOLLOW_VALUE, who)
    lists = np.flatnonzero(rng.random(n) < 0.1)
    lens = rng.integers(1, 3, lists.size)
    starts = np.concatenate([[0], np.cumsum(lens)[:-1]]).astype(np.int64)
    resp.set_lists(lists, starts, lens, rng.integers(0, n, int(lens.sum())))
    net.run_round(batch, resp)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 6))
def test_accounting_identity_from_delivery_log(seed, n_fail):
    net = new_network(TrialConfig(n=40, seed=seed, validation=True,
                                  failure=FailureSpec.uniform(n_fail, seed)))
    rng = np.random.default_rng(seed)
    for _ in range(4):
        _random_round(net, rng)
    log = net.delivery_log()
    m = net.metrics
    assert int(log["bits"].sum()) == m.bits_total
    assert log["src"].size == m.messages_total == int(m.per_node_messages.sum())
    # failed nodes neither initiate nor answer
    assert net.alive[log["src"]].all()
    sizes = net.sizes
    tagged = log["kind"] >= 0
    assert (log["bits"][~tagged] == sizes.id_bits).all()
    assert (log["bits"][tagged] > KIND_TAG_BITS).all()


def test_delivery_log_text():
    net = make_net(8, validation=True)
    net.run_round(IntentBatch.push_random([0], Kind.LEADER_ID, [0]))
    buf = io.StringIO()
    net.write_delivery_log(buf)
    line = buf.getvalue().strip().split(",")
    assert line[0] == "1" and int(line[1]) == net.ids[0]
    assert line[3:] == ["LEADER_ID", str(net.id_bits + KIND_TAG_BITS), "push"]


def test_counters_monotone():
    net = make_net(64, seed=9)
    rng = np.random.default_rng(1)
    prev = (0, 0, 0)
    for _ in range(6):
        _random_round(net, rng)
        cur = (net.metrics.rounds, net.metrics.messages_total, net.metrics.bits_total)
        assert all(a <= b for a, b in zip(prev, cur))
        prev = cur


def test_failed_nodes_modes():
    assert failed_nodes(50, FailureSpec()).size == 0
    assert failed_nodes(50, FailureSpec.explicit([3, 3, 9])).tolist() == [3, 9]
    assert np.array_equal(failed_nodes(50, FailureSpec.uniform(5, 1)), failed_nodes(50, FailureSpec.uniform(5, 1)))
