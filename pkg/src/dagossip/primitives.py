"""Cluster coordination primitives as fixed multi-round programs over :class:`Network`.

Every primitive takes an optional ``scope`` (a per-node mask, expected to be
constant within a cluster) and always spends its full round cost, even when
nobody participates.

Coordination rounds share one response convention: a leader answers with the
primitive's payload, a clustered non-leader answers ``FOLLOW_VALUE(follow)`` and an
unclustered node stays silent.  A member that pulls and gets a follow value back
was pointing at a merged-away leader; it adopts the value and sits this primitive
out.  A member that meets silence unclusters itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .engine import (
    ID_KINDS,
    IntentBatch,
    Kind,
    NO_PAYLOAD,
    Network,
    ResponseBatch,
    first_arrival,
)

ROUND_COST = {
    "activate": 1,
    "size": 2,
    "dissolve": 2,
    "resize": 2,
    "push": 3,
    "pull": 3,
    "merge": 1,
    "share": 2,
}

StopRule = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class ClusterView:
    leader: int
    members: np.ndarray

    @property
    def size(self) -> int:
        return int(self.members.size)


def cluster_views(net: Network) -> list[ClusterView]:
    return [ClusterView(k, v) for k, v in net.cluster_views().items()]


def check_partition(net: Network) -> None:
    """Raise AssertionError unless the follow values form a valid clustering.

    Every clustered alive node must reach, through follow values, an alive node
    that follows itself; clusters are then disjoint by construction.
    """
    r = net.roots()
    cl = net.clustered()
    assert (r[cl] >= 0).all()
    assert (net.follow[r[cl]] == r[cl]).all(), "a chain ends at a non-leader"
    assert net.alive[r[cl]].all(), "a cluster is rooted at a failed node"
    assert (r[~cl] == -1).all()


# -- shared plumbing --------------------------------------------------------


def _in_scope(net: Network, scope) -> np.ndarray:
    m = net.clustered()
    return m if scope is None else m & scope


def base_responses(net: Network) -> ResponseBatch:
    rb = ResponseBatch(net.n)
    cl = np.flatnonzero(net.clustered())
    rb.set(cl, Kind.FOLLOW_VALUE, net.follow[cl])
    return rb


def _members(net: Network, part: np.ndarray) -> np.ndarray:
    return np.flatnonzero(part & (net.follow != net.index))


def _leaders(net: Network, part: np.ndarray) -> np.ndarray:
    return np.flatnonzero(part & (net.follow == net.index))


def _orphan(net: Network, nodes: np.ndarray) -> None:
    net.follow[nodes] = -1
    net.active[nodes] = False


def pull_from_leaders(net: Network, pullers: np.ndarray, resp: ResponseBatch):
    """One round of ``pullers`` pulling their leader.

    Returns ``(ok, kind, value, count, report)`` for pullers that reached a live
    leader; redirects and silences are handled here.
    """
    rep = net.run_round(IntentBatch.pull_direct(pullers, net.follow[pullers]), resp)
    k = rep.pull_kind
    redirect = k == Kind.FOLLOW_VALUE
    silent = k == NO_PAYLOAD
    src = rep.pull_src
    net.follow[src[redirect]] = rep.pull_value[redirect]
    _orphan(net, src[silent])
    ok = ~(redirect | silent)
    return src[ok], k[ok], rep.pull_value[ok], rep.pull_count[ok], rep


def _count_round(net: Network, part: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Members push their own ID to the leader; returns (per-node count at leaders, report)."""
    mem = _members(net, part)
    rep = net.run_round(IntentBatch.push_direct(mem, net.follow[mem], Kind.FOLLOW_VALUE, mem))
    at_leader = net.follow[rep.push_dst] == rep.push_dst
    counts = np.bincount(rep.push_dst[at_leader], minlength=net.n)
    counts[_leaders(net, part)] += 1
    return counts, rep


# -- the seven primitives ---------------------------------------------------


def cluster_activate(net: Network, p: float, scope=None) -> None:
    """Leaders flip a ``p``-coin; members pull the outcome.  1 round."""
    part = _in_scope(net, scope)
    lead = _leaders(net, part)
    coin = net.rng.random(lead.size) < p
    net.active[lead] = coin
    resp = base_responses(net)
    resp.set(lead, Kind.FLAG, coin.astype(np.int64))
    mem = _members(net, part)
    net.active[mem] = False
    ok, _, val, _, _ = pull_from_leaders(net, mem, resp)
    net.active[ok] = val == 1


def cluster_size(net: Network, scope=None, stop_rule: Optional[StopRule] = None) -> np.ndarray:
    """Leaders count their members and tell them.  2 rounds.

    ``stop_rule(size, last_size)`` evaluated at leaders decides which clusters
    deactivate.  Returns the per-node measured size (0 where unknown).
    """
    part = _in_scope(net, scope)
    counts, _ = _count_round(net, part)
    lead = _leaders(net, part)
    size = counts[lead]
    stop = np.zeros(lead.size, dtype=bool) if stop_rule is None else np.asarray(stop_rule(size, net.last_size[lead]), bool)
    resp = base_responses(net)
    resp.set(lead, np.where(stop, Kind.COUNT_STOP, Kind.COUNT).astype(np.int8), count=size)
    out = np.zeros(net.n, dtype=np.int64)
    out[lead] = size
    net.last_size[lead] = size
    net.size_view[lead] = size
    net.active[lead[stop]] = False
    ok, kind, _, cnt, _ = pull_from_leaders(net, _members(net, part), resp)
    out[ok] = cnt
    net.last_size[ok] = cnt
    net.size_view[ok] = cnt
    net.active[ok[kind == Kind.COUNT_STOP]] = False
    return out


def cluster_dissolve(net: Network, s: int, scope=None) -> None:
    """Clusters smaller than ``s`` fall apart.  2 rounds."""
    part = _in_scope(net, scope)
    counts, _ = _count_round(net, part)
    lead = _leaders(net, part)
    keep = counts[lead] >= s
    pullers = _members(net, part)
    # a member still pointing at a former leader was not counted anywhere, so it
    # leaves too rather than being redirected to a cluster that may just have dissolved
    resp = ResponseBatch(net.n).set(pullers, Kind.EMPTY)
    resp.set(lead, np.where(keep, Kind.LEADER_ID, Kind.EMPTY).astype(np.int8), lead)
    _orphan(net, lead[~keep])
    ok, kind, _, _, _ = pull_from_leaders(net, pullers, resp)
    _orphan(net, ok[kind == Kind.EMPTY])


def cluster_resize(net: Network, s: int, scope=None) -> None:
    """Split each cluster of size ``s'`` into ``s' // s`` blocks of equal size up to one.  2 rounds.

    Blocks are contiguous in ID order and led by their largest ID.  The old
    leader answers with the ascending list of new leaders; a member joins the
    smallest listed ID at least its own.  Members that measured ``s'`` just
    before (a preceding :func:`cluster_size`) also know their block's size and
    keep it as the new growth baseline.
    """
    if s < 1:
        raise ValueError("resize target must be >= 1")
    n = net.n
    part = _in_scope(net, scope)
    lead = _leaders(net, part)
    mem = _members(net, part)
    rep = net.run_round(IntentBatch.push_direct(mem, net.follow[mem], Kind.FOLLOW_VALUE, mem))
    at_leader = net.follow[rep.push_dst] == rep.push_dst
    seg_of = np.concatenate([lead, rep.push_dst[at_leader]])
    node = np.concatenate([lead, rep.push_src[at_leader]])
    sizes = np.bincount(seg_of, minlength=n)
    k = sizes // s

    split = k[seg_of] >= 2
    rank = net.id_rank
    # sorting (leader, rank) keys orders every cluster by ID
    sh = int(n).bit_length()
    key = np.sort((seg_of[split] << sh) | rank[node[split]])
    seg_of, node = key >> sh, net.by_rank[key & ((1 << sh) - 1)]
    first = np.ones(seg_of.size, dtype=bool)
    first[1:] = seg_of[1:] != seg_of[:-1]
    seg_start = np.flatnonzero(first)
    pos = np.arange(seg_of.size) - np.repeat(seg_start, np.diff(np.append(seg_start, seg_of.size)))
    q, r = _blocks(sizes[seg_of], k[seg_of])
    edge = r * (q + 1)
    last = np.where(pos < edge, (pos + 1) % (q + 1) == 0, (pos - edge + 1) % q == 0)
    flat = node[last]
    flat_seg = seg_of[last]

    splitters = lead[k[lead] >= 2]
    starts = np.searchsorted(flat_seg, splitters, side="left")
    resp = base_responses(net)
    resp.set(lead, Kind.LEADER_ID, lead)
    resp.set_lists(splitters, starts, k[splitters], flat)

    rep = net.run_round(IntentBatch.pull_direct(mem, net.follow[mem]), resp)
    kind = rep.pull_kind
    src = rep.pull_src
    redirect = kind == Kind.FOLLOW_VALUE
    net.follow[src[redirect]] = rep.pull_value[redirect]
    _orphan(net, src[kind == NO_PAYLOAD])
    got = kind == Kind.LEADER_LIST
    start_of = np.full(n, -1, dtype=np.int64)
    start_of[splitters] = starts
    # the old leader counted s' itself; members go by the size they last measured
    if not got.any() and splitters.size == 0:
        return
    # every answered member was counted at a splitting leader in the first round,
    # so its block is read off the sorted order: the next block end at or after it
    listed = np.zeros(n, dtype=bool)
    listed[src[got]] = True
    listed[splitters] = True
    blk = np.cumsum(last) - last
    sel = listed[node]
    who, old, blk = node[sel], seg_of[sel], blk[sel]
    known = np.where(who == old, sizes[old], net.size_view[who])
    new_leader = flat[blk]
    kk = k[old]
    q, r = _blocks(np.maximum(known, kk), kk)
    bsize = np.where(blk - start_of[old] < r, q + 1, q)
    net.follow[who] = new_leader
    net.last_size[who] = bsize
    net.size_view[who] = bsize


def _blocks(size: np.ndarray, k: np.ndarray):
    return size // k, size % k


@dataclass
class PushResult:
    """Per-node outcome of a cluster push.

    ``received`` is each node's first direct arrival (``-1`` if none);
    ``leader_min`` / ``leader_pick`` aggregate what reached each leader directly
    or by relay (smallest ID, and first arrival).
    """

    received: np.ndarray
    leader_min: np.ndarray
    leader_pick: np.ndarray
    pushers: np.ndarray


def cluster_push(
    net: Network,
    kind: int,
    value: Optional[np.ndarray] = None,
    instruct=None,
    scope=None,
    directive: bool = True,
    relay: str = "min",
    collect: Optional[str] = "min",
) -> PushResult:
    """Members of instructed clusters push their leader's payload to a random node.

    ``value`` is indexed by leader (e.g. ``net.follow`` for the cluster ID);
    ``instruct`` marks leaders whose cluster pushes.  With ``directive=False``
    the members already know instruction and payload and the first round is
    skipped.  Recipients relay their smallest (``relay="min"``) or first
    arrival; ``collect`` names the leader aggregates to compute ("min",
    "pick", "both" or None).
    """
    n = net.n
    part = _in_scope(net, scope)
    instruct = None if instruct is None else np.asarray(instruct, bool)
    lead = _leaders(net, part)
    if value is None:
        value = np.full(n, NO_PAYLOAD, dtype=np.int64)
    if directive:
        told = lead if instruct is None else lead[instruct[lead]]
        resp = base_responses(net)
        resp.set(lead, Kind.EMPTY)
        resp.set(told, kind, value[told])
        ok, k, v, _, _ = pull_from_leaders(net, _members(net, part), resp)
        go = k == kind
        pushers = np.concatenate([ok[go], told])
        pval = np.concatenate([v[go], value[told]])
        order = np.argsort(pushers, kind="stable")
        pushers, pval = pushers[order], pval[order]
    else:
        go = part if instruct is None else part & instruct[np.maximum(net.follow, 0)]
        pushers = np.flatnonzero(go)
        pval = value[net.follow[pushers]]
    rep = net.run_round(IntentBatch.push_random(pushers, kind, pval))
    carries_id = kind in ID_KINDS
    if not carries_id:
        # payload-less kinds (the rumor): a placeholder value marks "got one"
        rep.push_value = np.zeros_like(rep.push_value)
    received = first_arrival(n, rep.push_dst, rep.push_arrival, rep.push_value)
    agg = _min_by_rank(net, rep.push_dst, rep.push_value) if carries_id and relay == "min" else received

    # relay: clustered non-leaders forward one aggregate to their leader
    hold = (agg >= 0) & net.clustered() & (net.follow != net.index)
    if carries_id:
        hold &= agg != net.follow
    hold = np.flatnonzero(hold)
    rep2 = net.run_round(IntentBatch.push_direct(hold, net.follow[hold], kind, agg[hold] if carries_id else None))
    leader_min = leader_pick = None
    if collect:
        if not carries_id:
            rep2.push_value = np.zeros_like(rep2.push_value)
        direct = net.follow[rep.push_dst] == rep.push_dst
        at_leader = net.follow[rep2.push_dst] == rep2.push_dst
        dst = np.concatenate([rep.push_dst[direct], rep2.push_dst[at_leader]])
        val = np.concatenate([rep.push_value[direct], rep2.push_value[at_leader]])
        if collect in ("min", "both"):
            leader_min = _min_by_rank(net, dst, val) if carries_id else first_arrival(n, dst, np.zeros(dst.size), val)
        if collect in ("pick", "both"):
            # a leader picks uniformly among everything it got
            leader_pick = first_arrival(n, dst, net.rng.random(dst.size), val)
    return PushResult(received, leader_min, leader_pick, pushers)


def cluster_pull(net: Network, instruct=None, scope=None, directive: bool = True) -> np.ndarray:
    """Members of instructed clusters pull a random node; responders answer their follow value.

    Returns, per leader, the smallest ID gathered (``-1`` if none).  3 rounds
    (2 without the directive round).
    """
    n = net.n
    part = _in_scope(net, scope)
    instruct = np.ones(n, bool) if instruct is None else np.asarray(instruct, bool)
    lead = _leaders(net, part)
    if directive:
        resp = base_responses(net)
        resp.set(lead, np.where(instruct[lead], Kind.FLAG, Kind.EMPTY).astype(np.int8), 1)
        ok, k, _, _, _ = pull_from_leaders(net, _members(net, part), resp)
        pullers = np.concatenate([ok[k == Kind.FLAG], lead[instruct[lead]]])
    else:
        pullers = np.flatnonzero(part & instruct[np.maximum(net.follow, 0)])
    rep = net.run_round(IntentBatch.pull_random(pullers), base_responses(net))
    got = rep.pull_kind == Kind.FOLLOW_VALUE
    got_val = np.full(n, -1, dtype=np.int64)
    got_val[rep.pull_src[got]] = rep.pull_value[got]
    hold = np.flatnonzero((got_val >= 0) & (net.follow != net.index) & net.clustered() & (got_val != net.follow))
    rep2 = net.run_round(IntentBatch.push_direct(hold, net.follow[hold], Kind.LEADER_ID, got_val[hold]))
    at_leader = net.follow[rep2.push_dst] == rep2.push_dst
    own = np.flatnonzero((got_val >= 0) & (net.follow == net.index))
    return _min_by_rank(
        net,
        np.concatenate([own, rep2.push_dst[at_leader]]),
        np.concatenate([got_val[own], rep2.push_value[at_leader]]),
    )


def cluster_merge(net: Network, target: np.ndarray, scope=None) -> None:
    """Each leader with ``target[leader] >= 0`` moves its whole cluster under that ID.  1 round.

    Followers adopt exactly what their leader announced, so merges do not chain
    within the round.  Targets must not form a cycle among leaders.
    """
    part = _in_scope(net, scope)
    lead = _leaders(net, part)
    new = np.where(target[lead] >= 0, target[lead], lead)
    resp = base_responses(net)
    resp.set(lead, Kind.LEADER_ID, new)
    pullers = _members(net, part)
    net.follow[lead] = new
    ok, _, val, _, _ = pull_from_leaders(net, pullers, resp)
    net.follow[ok] = val


def cluster_share(net: Network, scope=None, holders=None) -> None:
    """Spread the rumor inside clusters: holders push to the leader, the rest pull.  2 rounds.

    ``holders`` narrows who pushes (default: every informed member); members
    whose leader is known to have the rumor already need not push.
    """
    part = _in_scope(net, scope)
    mem = _members(net, part)
    push = net.informed[mem] if holders is None else net.informed[mem] & holders[mem]
    src = mem[push]
    net.run_round(IntentBatch.push_direct(src, net.follow[src], Kind.RUMOR))
    lead = _leaders(net, part)
    resp = base_responses(net)
    resp.set(lead, np.where(net.informed[lead], Kind.RUMOR, Kind.EMPTY).astype(np.int8))
    mem = _members(net, part)
    pull_from_leaders(net, mem[~net.informed[mem]], resp)


def unclustered_pull(net: Network) -> int:
    """Unclustered nodes pull a random node and join its cluster if it has one.  1 round."""
    pullers = np.flatnonzero(net.unclustered())
    rep = net.run_round(IntentBatch.pull_random(pullers), base_responses(net))
    got = rep.pull_kind == Kind.FOLLOW_VALUE
    net.follow[rep.pull_src[got]] = rep.pull_value[got]
    return int(got.sum())


def adopt_received(net: Network, received: np.ndarray) -> np.ndarray:
    """Unclustered nodes that got an ID join that cluster; returns who joined."""
    joiners = np.flatnonzero(net.unclustered() & (received >= 0))
    net.follow[joiners] = received[joiners]
    return joiners


def _min_by_rank(net: Network, dst: np.ndarray, value: np.ndarray) -> np.ndarray:
    n = net.n
    out = np.full(n, -1, dtype=np.int64)
    if dst.size == 0:
        return out
    best = np.full(n, n, dtype=np.int64)
    np.minimum.at(best, dst, net.id_rank[value])
    has = best < n
    out[has] = net.by_rank[best[has]]
    return out
