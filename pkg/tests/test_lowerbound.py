import math
import statistics

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import sparse

from dagossip import lowerbound as lb


def _nx(g):
    return nx.from_scipy_sparse_array(sparse.csr_matrix(g))


def _path(n):
    a = np.arange(n - 1)
    return lb._graph(n, a, a + 1)


def test_n2_single_edge():
    s = lb.build_schedule(2, 1, 0)
    g = s.contact_graph(1).toarray()
    assert g.tolist() == [[False, True], [True, False]]


def test_no_self_samples_and_degree():
    s = lb.build_schedule(300, 5, 3)
    assert (s.samples != np.arange(300)).all()
    for t in range(1, 6):
        assert (np.diff(s.contact_graph(t).indptr) >= 1).all()
    assert s.union_graph().nnz // 2 <= 300 * 5


def test_schedule_deterministic_and_prefix_consistent():
    a = lb.build_schedule(500, 3, 9)
    b = lb.build_schedule(500, 3, 9)
    c = lb.build_schedule(500, 6, 9)
    assert np.array_equal(a.samples, b.samples)
    assert np.array_equal(a.samples, c.samples[:3])


def test_average_degree_n1000_t3():
    degs = [lb.build_schedule(1000, 3, s).union_graph().nnz / 1000 for s in range(100)]
    mean = statistics.mean(degs)
    assert 4.5 <= mean <= 6
    # each pair is hit by one of 2T independent 1/(n-1) events
    assert mean == pytest.approx(lb.expected_average_degree(1000, 3), rel=0.01)


def test_k0_empty():
    s = lb.build_schedule(50, 2, 0)
    assert not lb.omniscient_knowledge(s, 0).any()


def test_k1_is_two_hop_closure_n4():
    s = lb.build_schedule(4, 1, 5)
    edges = {frozenset((v, int(u))) for v, u in enumerate(s.samples[0])}
    # hand expansion: u knows w after one round iff they are within 2 hops of G_1
    adj = {v: {w for e in edges if v in e for w in e if w != v} for v in range(4)}
    want = np.zeros((4, 4), bool)
    for v in range(4):
        reach = set(adj[v])
        for w in adj[v]:
            reach |= adj[w]
        reach.discard(v)
        want[v, list(reach)] = True
    assert np.array_equal(lb.omniscient_knowledge(s, 1), want)


def test_oracle_rejects_large_n():
    s = lb.build_schedule(lb.ORACLE_MAX_N + 1, 1, 0)
    with pytest.raises(ValueError):
        lb.omniscient_knowledge(s, 1)


@settings(max_examples=60, deadline=None)
@given(st.integers(4, 256), st.integers(1, 4), st.integers(0, 2**31))
def test_containment_property(n, t, seed):
    s = lb.build_schedule(n, t, seed)
    K = lb.omniscient_knowledge(s, t)
    R = lb.power_reachable(s.union_graph(t), 2**t)
    assert not (K & ~R).any()


def test_knowledge_monotone():
    s = lb.build_schedule(120, 4, 1)
    prev = lb.omniscient_knowledge(s, 0)
    for t in range(1, 5):
        cur = lb.omniscient_knowledge(s, t)
        assert not (prev & ~cur).any()
        assert (cur == cur.T).all()
        prev = cur
        u0, u1 = s.union_graph(t - 1).toarray(), s.union_graph(t).toarray()
        assert not (u0 & ~u1).any()


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 64), st.integers(1, 3), st.integers(1, 3), st.integers(0, 10_000))
def test_graph_power_algebra(n, j, k, seed):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, n, n)
    b = rng.integers(0, n, n)
    g = lb._graph(n, a, b)
    d = lb.distances(g)
    gj = sparse.csr_matrix((d <= j) & (d > 0))
    lhs = lb.power_reachable(gj, k)
    assert np.array_equal(lhs, d <= j * k)


def test_diameter_basics():
    assert lb.diameter(_path(5)).value == 4
    full = sparse.csr_matrix(~np.eye(6, dtype=bool))
    assert lb.diameter(full).value == 1
    two = lb._graph(4, np.array([0, 2]), np.array([1, 3]))
    assert math.isinf(lb.diameter(two).value)
    assert str(lb.diameter(two)) == "inf"


@pytest.mark.parametrize("seed", range(5))
def test_diameter_matches_networkx(seed):
    g = lb.build_schedule(400, 2, seed).union_graph()
    G = _nx(g)
    want = nx.diameter(G) if nx.is_connected(G) else math.inf
    assert lb.diameter(g).value == want
    if nx.is_connected(G):
        sampled = lb.diameter(g, exact=False)
        assert not sampled.exact and sampled.value <= want
        assert str(sampled).startswith(">=")


def test_bfs_levels_match_networkx():
    g = lb.build_schedule(300, 3, 4).union_graph()
    d = lb.bfs_levels(g, 7)
    ref = nx.single_source_shortest_path_length(_nx(g), 7)
    assert all(d[v] == ref[v] for v in ref)
    assert ((d >= 0) == np.isin(np.arange(300), list(ref))).all()


def test_min_feasible_needs_n16():
    with pytest.raises(ValueError):
        lb.min_feasible_rounds(8, [0])


def test_complete_schedule_feasible():
    # with n T >= n^2 samples the union is (nearly) complete and T = 1 or 2 suffices
    n = 16
    rows = lb.feasibility_trace(n, 0, max_t=n)
    assert rows[-1].feasible
    assert rows[-1].T <= 4


def test_trace_rows_and_csv(tmp_path):
    rows = lb.feasibility_trace(1 << 10, 2, max_t=8)
    assert [r.T for r in rows] == list(range(1, len(rows) + 1))
    assert rows[-1].feasible and not any(r.feasible for r in rows[:-1])
    p = tmp_path / "lb.csv"
    lb.write_lb_csv(p, rows)
    lines = p.read_text().splitlines()
    assert lines[0] == "n,seed,T,diameter_or_lb,feasible"
    assert len(lines) == len(rows) + 1


def test_max_degree_large_n():
    n, T = 1 << 20, 3
    g = lb.build_schedule(n, T, 0).union_graph()
    # in-degree is Poisson(T); the maximum is O(T + log n)
    assert lb.max_degree(g) <= 2 * T + 2 * math.log2(n)


@pytest.mark.slow
def test_large_n_t3_diameter_witness():
    g = lb.build_schedule(1 << 20, 3, 0).union_graph()
    d = lb.diameter(g)
    assert not d.exact
    assert d.value >= 5


@pytest.mark.slow
def test_feasible_t_grows_with_n():
    small = lb.min_feasible_rounds(1 << 10, range(5))
    big = lb.min_feasible_rounds(1 << 20, range(3))
    assert statistics.median(big.values()) >= statistics.median(small.values())
