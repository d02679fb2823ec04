"""Synchronous-round network for the random phone call model with direct addressing.

Nodes are addressed by their index ``0..n-1`` inside the simulator; ``Network.ids``
maps an index to its wire ID (a random injection into ``[n^2)``), which is what
every ID comparison and every bit charge refers to.

A round is one call to :meth:`Network.run_round` with a batch of intents (at most
one per node) and a dense table of pull responses (exactly one entry per node,
fixed before any pull target is drawn).  The responder table is indexed by
responder only, so a response cannot depend on who pulls.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Optional, Sequence

import numpy as np

from .config import TrialConfig

KIND_TAG_BITS = 3
NO_PAYLOAD = -1


class Kind(IntEnum):
    EMPTY = 0
    FLAG = 1
    LEADER_ID = 2
    FOLLOW_VALUE = 3
    COUNT = 4
    COUNT_STOP = 5
    LEADER_LIST = 6
    RUMOR = 7


ID_KINDS = (Kind.LEADER_ID, Kind.FOLLOW_VALUE)


class Action(IntEnum):
    IDLE = 0
    PUSH_RANDOM = 1
    PUSH_DIRECT = 2
    PULL_RANDOM = 3
    PULL_DIRECT = 4


MSG_PUSH, MSG_PULL_REQ, MSG_PULL_RESP = 0, 1, 2
_MSG_NAMES = ("push", "pull_req", "pull_resp")


class ContractError(RuntimeError):
    """A protocol program broke the engine contract (e.g. two intents from one node)."""


class ModelViolation(RuntimeError):
    """A communication the model forbids, detected in validation mode."""


class UnsupportedMode(RuntimeError):
    pass


@dataclass(frozen=True)
class Payload:
    kind: Kind
    value: int = NO_PAYLOAD
    count: int = 0
    ids: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind == Kind.LEADER_LIST and len(self.ids) < 1:
            raise ValueError("a leader list carries at least one ID")

    def bits(self, sizes: "BitSizes") -> int:
        return sizes.payload_bits(self.kind, len(self.ids))

    def carried_ids(self) -> tuple[int, ...]:
        if self.kind in ID_KINDS and self.value >= 0:
            return (self.value,)
        if self.kind == Kind.LEADER_LIST:
            return self.ids
        return ()


@dataclass(frozen=True)
class BitSizes:
    id_bits: int
    count_bits: int
    rumor_bits: int

    @classmethod
    def for_n(cls, n: int, rumor_bits: int) -> "BitSizes":
        return cls(math.ceil(2 * math.log2(n)), math.ceil(math.log2(n + 1)), rumor_bits)

    def payload_bits(self, kind: int, length: int = 0) -> int:
        if kind == Kind.LEADER_LIST:
            return length * self.id_bits
        return int(self.table()[kind])

    def table(self) -> np.ndarray:
        t = np.zeros(len(Kind), dtype=np.int64)
        t[Kind.EMPTY] = 1
        t[Kind.FLAG] = 1
        t[Kind.LEADER_ID] = self.id_bits
        t[Kind.FOLLOW_VALUE] = self.id_bits
        t[Kind.COUNT] = self.count_bits
        t[Kind.COUNT_STOP] = self.count_bits
        t[Kind.LEADER_LIST] = 0  # length * id_bits
        t[Kind.RUMOR] = self.rumor_bits
        return t


@dataclass(frozen=True)
class RoundIntent:
    initiator: int
    action: Action
    target: Optional[int] = None
    payload: Optional[Payload] = None

    @classmethod
    def push_random(cls, u, payload):
        return cls(u, Action.PUSH_RANDOM, None, payload)

    @classmethod
    def push_direct(cls, u, v, payload):
        return cls(u, Action.PUSH_DIRECT, v, payload)

    @classmethod
    def pull_random(cls, u):
        return cls(u, Action.PULL_RANDOM)

    @classmethod
    def pull_direct(cls, u, v):
        return cls(u, Action.PULL_DIRECT, v)

    @classmethod
    def idle(cls, u):
        return cls(u, Action.IDLE)


@dataclass(frozen=True)
class ResponsePlan:
    responder: int
    payload: Optional[Payload] = None


class IntentBatch:
    """Column-wise intents: ``src[i]`` performs ``action[i]`` on ``target[i]``."""

    __slots__ = ("src", "action", "target", "kind", "value")

    def __init__(self, src, action, target, kind, value):
        self.src = src
        self.action = action
        self.target = target
        self.kind = kind
        self.value = value

    @classmethod
    def empty(cls) -> "IntentBatch":
        z = np.zeros(0, dtype=np.int64)
        return cls(z, np.zeros(0, dtype=np.int8), z, np.zeros(0, dtype=np.int8), z)

    @classmethod
    def build(cls, src, action, target=None, kind=None, value=None) -> "IntentBatch":
        src = np.asarray(src, dtype=np.int64)
        m = src.size
        act = np.broadcast_to(np.asarray(action, dtype=np.int8), (m,))
        tgt = np.full(m, -1, np.int64) if target is None else np.broadcast_to(np.asarray(target, np.int64), (m,))
        knd = np.full(m, NO_PAYLOAD, np.int8) if kind is None else np.broadcast_to(np.asarray(kind, np.int8), (m,))
        val = np.full(m, NO_PAYLOAD, np.int64) if value is None else np.broadcast_to(np.asarray(value, np.int64), (m,))
        return cls(src, act, tgt, knd, val)

    @classmethod
    def push_random(cls, src, kind, value=None):
        return cls.build(src, Action.PUSH_RANDOM, None, kind, value)

    @classmethod
    def push_direct(cls, src, target, kind, value=None):
        return cls.build(src, Action.PUSH_DIRECT, target, kind, value)

    @classmethod
    def pull_random(cls, src):
        return cls.build(src, Action.PULL_RANDOM)

    @classmethod
    def pull_direct(cls, src, target):
        return cls.build(src, Action.PULL_DIRECT, target)

    @classmethod
    def from_intents(cls, intents: Iterable[RoundIntent]) -> "IntentBatch":
        intents = list(intents)
        seen = set()
        for it in intents:
            if it.initiator in seen:
                raise ContractError(f"node {it.initiator} submitted two intents in one round")
            seen.add(it.initiator)
            if it.action in (Action.PUSH_RANDOM, Action.PUSH_DIRECT):
                if it.payload is None or it.payload.kind == Kind.LEADER_LIST:
                    raise ContractError("a push carries a single non-list payload")
            if it.action in (Action.PUSH_DIRECT, Action.PULL_DIRECT) and it.target is None:
                raise ContractError("direct contact without a target")
        return cls(
            np.array([it.initiator for it in intents], dtype=np.int64),
            np.array([int(it.action) for it in intents], dtype=np.int8),
            np.array([-1 if it.target is None else it.target for it in intents], dtype=np.int64),
            np.array([NO_PAYLOAD if it.payload is None else int(it.payload.kind) for it in intents], dtype=np.int8),
            np.array([NO_PAYLOAD if it.payload is None else it.payload.value for it in intents], dtype=np.int64),
        )

    @classmethod
    def concat(cls, *batches: "IntentBatch") -> "IntentBatch":
        batches = [b for b in batches if b is not None and b.src.size]
        if not batches:
            return cls.empty()
        if len(batches) == 1:
            return batches[0]
        return cls(*(np.concatenate([getattr(b, a) for b in batches]) for a in cls.__slots__))

    def __len__(self):
        return int(self.src.size)


class ResponseBatch:
    """One registered pull response per node; ``kind == NO_PAYLOAD`` means silence.

    Count payloads keep their number in ``count``.  A leader list keeps its
    members in ``flat[value : value + length]`` (ascending wire ID).
    """

    __slots__ = ("kind", "value", "count", "length", "flat", "has_count")

    def __init__(self, n: int):
        self.kind = np.full(n, NO_PAYLOAD, dtype=np.int8)
        self.value = np.full(n, NO_PAYLOAD, dtype=np.int64)
        self.count = np.zeros(n, dtype=np.int64)
        self.length = np.zeros(n, dtype=np.int64)
        self.flat = np.zeros(0, dtype=np.int64)
        self.has_count = False

    def set(self, nodes, kind, value=None, count=None) -> "ResponseBatch":
        self.kind[nodes] = kind
        if value is not None:
            self.value[nodes] = value
        if count is not None:
            self.count[nodes] = count
            self.has_count = True
        return self

    def set_lists(self, responders, starts, lengths, flat) -> "ResponseBatch":
        if self.flat.size:
            raise ContractError("leader lists may be registered once per round")
        self.kind[responders] = Kind.LEADER_LIST
        self.value[responders] = starts
        self.length[responders] = lengths
        self.flat = np.asarray(flat, dtype=np.int64)
        return self

    @classmethod
    def from_plans(cls, plans: Iterable[ResponsePlan], n: int, ids: Optional[np.ndarray] = None) -> "ResponseBatch":
        rb = cls(n)
        seen = set()
        flat: list[int] = []
        rows = []
        for pl in plans:
            if pl.responder in seen:
                raise ContractError(f"node {pl.responder} registered two responses in one round")
            seen.add(pl.responder)
            if pl.payload is None:
                continue
            p = pl.payload
            if p.kind == Kind.LEADER_LIST:
                members = sorted(p.ids, key=(lambda v: ids[v]) if ids is not None else None)
                rows.append((pl.responder, len(flat), len(members)))
                flat.extend(members)
            else:
                rb.set(pl.responder, int(p.kind), p.value, p.count)
        if rows:
            r = np.array(rows, dtype=np.int64)
            rb.set_lists(r[:, 0], r[:, 1], r[:, 2], np.array(flat, dtype=np.int64))
        return rb

    def payload_of(self, v: int) -> Optional[Payload]:
        k = int(self.kind[v])
        if k == NO_PAYLOAD:
            return None
        if k == Kind.LEADER_LIST:
            s, ln = int(self.value[v]), int(self.length[v])
            return Payload(Kind.LEADER_LIST, ids=tuple(int(x) for x in self.flat[s : s + ln]))
        return Payload(Kind(k), int(self.value[v]), int(self.count[v]))


@dataclass
class Metrics:
    n: int
    rounds: int = 0
    messages_total: int = 0
    bits_total: int = 0
    max_fanin_per_round: list = field(default_factory=list)
    per_node_messages: np.ndarray = None
    informed_count: int = 0
    clustered_count: int = 0
    max_control_bits: int = 0  # largest non-rumor payload, tag excluded

    def __post_init__(self):
        if self.per_node_messages is None:
            self.per_node_messages = np.zeros(self.n, dtype=np.int64)

    @property
    def avg_messages_per_node(self) -> float:
        return self.messages_total / self.n

    @property
    def max_fanin(self) -> int:
        return max(self.max_fanin_per_round, default=0)

    def copy(self) -> "Metrics":
        return Metrics(
            self.n, self.rounds, self.messages_total, self.bits_total, list(self.max_fanin_per_round),
            self.per_node_messages.copy(), self.informed_count, self.clustered_count, self.max_control_bits,
        )


@dataclass
class DeliveryReport:
    """What arrived in one round.

    Push arrays hold delivered pushes only; ``push_arrival`` orders arrivals
    (smaller is earlier).  Pull arrays hold one row per pull; ``pull_kind ==
    NO_PAYLOAD`` is observed silence.
    """

    round: int
    push_src: np.ndarray
    push_dst: np.ndarray
    push_kind: np.ndarray
    push_value: np.ndarray
    push_arrival: np.ndarray
    pull_src: np.ndarray
    pull_dst: np.ndarray
    pull_kind: np.ndarray
    pull_value: np.ndarray
    pull_count: np.ndarray
    pull_length: np.ndarray
    responses: Optional[ResponseBatch] = None
    messages: int = 0
    bits: int = 0

    def payloads_received_by(self, v: int) -> list[Payload]:
        """Scalar view, for tests and small networks."""
        out = []
        for i in np.flatnonzero(self.push_dst == v):
            out.append(Payload(Kind(int(self.push_kind[i])), int(self.push_value[i])))
        for i in np.flatnonzero(self.pull_src == v):
            if self.pull_kind[i] != NO_PAYLOAD:
                out.append(self.responses.payload_of(int(self.pull_dst[i])))
        return out


def first_arrival(n: int, dst: np.ndarray, arrival: np.ndarray, value: np.ndarray) -> np.ndarray:
    """Per node, the value of its earliest arrival (``-1`` if none)."""
    out = np.full(n, -1, dtype=np.int64)
    m = dst.size
    if m == 0:
        return out
    # pack (arrival, index) into one sortable integer so one scatter-min finds the winner
    shift = max(1, int(m).bit_length())
    key = (np.asarray(arrival) * float(1 << (62 - shift))).astype(np.int64) << shift
    key |= np.arange(m, dtype=np.int64)
    best = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
    np.minimum.at(best, dst, key)
    if 4 * m < n:
        # sparse rounds: find the winners among the m arrivals, not over all n nodes
        win = best[dst] == key
        out[dst[win]] = np.asarray(value)[win]
    else:
        has = best != np.iinfo(np.int64).max
        out[has] = np.asarray(value)[best[has] & ((1 << shift) - 1)]
    return out


class Network:
    """State of one trial: node state arrays, RNG streams, metrics, and the round engine."""

    def __init__(self, config: TrialConfig):
        config.validate()
        self.config = config
        n = self.n = config.n
        self.index = np.arange(n, dtype=np.int64)
        self.ids = _assign_ids(n, config.seed)
        self.id_rank = np.empty(n, dtype=np.int64)
        self.by_rank = np.argsort(self.ids, kind="stable")
        self.id_rank[self.by_rank] = self.index
        self.rng = np.random.default_rng([config.seed, 2])

        self.alive = np.ones(n, dtype=bool)
        self.alive[failed_nodes(n, config.failure)] = False
        self._all_alive = bool(self.alive.all())
        self.follow = np.full(n, -1, dtype=np.int64)
        self.active = np.zeros(n, dtype=bool)
        self.informed = np.zeros(n, dtype=bool)
        self.last_size = np.zeros(n, dtype=np.int64)
        self.size_view = np.zeros(n, dtype=np.int64)

        self.sizes = BitSizes.for_n(n, config.b)
        self.id_bits = self.sizes.id_bits
        self._bits = self.sizes.table()
        self.metrics = Metrics(n)
        self._mark = np.zeros(n, dtype=bool)

        self.validation = config.validation
        self._learned: set[int] = set()
        self._log: list[tuple] = []

    # -- derived views ------------------------------------------------------

    def is_leader(self) -> np.ndarray:
        return (self.follow == self.index) & self.alive

    def clustered(self) -> np.ndarray:
        return (self.follow >= 0) & self.alive

    def unclustered(self) -> np.ndarray:
        return (self.follow < 0) & self.alive

    def roots(self) -> np.ndarray:
        """Follow values with merge chains resolved (``-1`` for unclustered nodes).

        A merge is not transitive within its round, so a node may briefly point
        at a leader that has itself moved on; such pointers are repaired the next
        time the node contacts its leader.
        """
        r = np.where(self.clustered(), self.follow, -1)
        for _ in range(64):
            nxt = np.where(r >= 0, self.follow[np.maximum(r, 0)], -1)
            if np.array_equal(nxt, r):
                return r
            r = nxt
        raise RuntimeError("follow values contain a cycle")

    def cluster_views(self) -> dict[int, np.ndarray]:
        """Root leader index -> member indices, derived from the follow variables."""
        r = self.roots()
        members = np.flatnonzero(r >= 0)
        order = np.argsort(r[members], kind="stable")
        members = members[order]
        keys, starts = np.unique(r[members], return_index=True)
        return {int(k): grp for k, grp in zip(keys, np.split(members, starts[1:]))}

    def cluster_sizes(self) -> np.ndarray:
        """Sizes of all clusters (alive members, chains resolved)."""
        r = self.roots()
        counts = np.bincount(r[r >= 0], minlength=self.n)
        return counts[counts > 0]

    # -- the round engine ---------------------------------------------------

    def run_round(self, intents: Optional[IntentBatch] = None, responses: Optional[ResponseBatch] = None) -> DeliveryReport:
        n = self.n
        if intents is None:
            intents = IntentBatch.empty()
        act = intents.action
        if act.size and (act == Action.IDLE).any():
            keep = act != Action.IDLE
            intents = IntentBatch(*(getattr(intents, a)[keep] for a in IntentBatch.__slots__))
            act = intents.action
        src = intents.src
        m = src.size
        if m:
            self._check_sources(src)

        # split pushes from pulls; batches are usually all one action
        is_push = act <= Action.PUSH_DIRECT
        n_push = int(np.count_nonzero(is_push))
        if n_push == m:
            ps, pact, ptgt, pk, pv = src, act, intents.target, intents.kind, intents.value
            qs = qact = qtgt = src[:0]
        elif n_push == 0:
            qs, qact, qtgt = src, act, intents.target
            ps = pact = ptgt = pk = pv = src[:0]
        else:
            ps, pact, ptgt = src[is_push], act[is_push], intents.target[is_push]
            pk, pv = intents.kind[is_push], intents.value[is_push]
            qs, qact, qtgt = src[~is_push], act[~is_push], intents.target[~is_push]
        pd = self._targets(pact, ptgt, Action.PUSH_RANDOM)
        qd = self._targets(qact, qtgt, Action.PULL_RANDOM)
        if self.validation and m:
            dr = pact == Action.PUSH_DIRECT
            dq = qact == Action.PULL_DIRECT
            self._check_direct(np.concatenate([ps[dr], qs[dq]]), np.concatenate([pd[dr], qd[dq]]))

        pk = np.asarray(pk)
        if pk.size and pk.min() < 0:
            raise ContractError("a push must carry a payload")
        push_kinds = np.bincount(pk, minlength=len(Kind)) if pk.size else np.zeros(len(Kind), np.int64)
        if push_kinds[Kind.LEADER_LIST]:
            raise ContractError("a push must carry one non-list payload")
        pd_sent = pd
        if not self._all_alive and n_push:
            ok = self.alive[pd]
            ps, pd, pk, pv = ps[ok], pd[ok], pk[ok], pv[ok]
        else:
            pv = np.asarray(pv)

        nq = qs.size
        if nq and responses is not None:
            q_kind = responses.kind[qd]
            if not self._all_alive:
                q_kind[~self.alive[qd]] = NO_PAYLOAD
            q_val = responses.value[qd]
            q_cnt = responses.count[qd] if responses.has_count else np.zeros(nq, np.int64)
            q_len = responses.length[qd] if responses.flat.size else np.zeros(nq, np.int64)
        else:
            q_kind = np.full(nq, NO_PAYLOAD, dtype=np.int8)
            q_val = np.full(nq, NO_PAYLOAD, dtype=np.int64)
            q_cnt = np.zeros(nq, np.int64)
            q_len = np.zeros(nq, np.int64)
        resp_kinds = np.bincount(q_kind.astype(np.int64) + 1, minlength=len(Kind) + 1)[1:] if nq else np.zeros(len(Kind), np.int64)
        if resp_kinds[Kind.LEADER_LIST]:
            # only answered lists count; silent or overwritten responders keep a stale length
            q_len = np.where(q_kind == Kind.LEADER_LIST, q_len, 0)
            list_ids = int(q_len.sum())
        else:
            list_ids = 0

        # accounting
        met = self.metrics
        n_ans = int(resp_kinds.sum())
        n_msgs = m + n_ans
        charge = self._bits + KIND_TAG_BITS
        n_bits = int(push_kinds @ charge) + nq * self.id_bits + int(resp_kinds @ charge) + list_ids * self.id_bits
        met.messages_total += n_msgs
        met.bits_total += n_bits
        answered = q_kind != NO_PAYLOAD
        resp_by = qd if n_ans == nq else qd[answered]
        # initiators are distinct (checked above), so a plain scatter counts them
        met.per_node_messages[src] += 1
        fanin = 0
        if n_ans * 16 < n:
            np.add.at(met.per_node_messages, resp_by, 1)
        else:
            answers = np.bincount(resp_by, minlength=n)
            met.per_node_messages += answers
            if pd.size:
                answers += np.bincount(pd, minlength=n)
            fanin = int(answers.max())
        used = (push_kinds + resp_kinds) > 0
        used[Kind.RUMOR] = False
        ctrl = int(self._bits[used].max()) if used.any() else 0
        if list_ids:
            ctrl = max(ctrl, int(q_len.max()) * self.id_bits)
        met.max_control_bits = max(met.max_control_bits, ctrl)
        if not fanin:
            fanin = _max_count(np.concatenate([pd, resp_by]) if n_ans else pd, n)
        met.max_fanin_per_round.append(fanin)
        met.rounds += 1

        rep = DeliveryReport(
            round=met.rounds,
            push_src=ps, push_dst=pd, push_kind=pk, push_value=pv,
            push_arrival=self.rng.random(pd.size),
            pull_src=qs, pull_dst=qd, pull_kind=q_kind, pull_value=q_val, pull_count=q_cnt, pull_length=q_len,
            responses=responses, messages=n_msgs, bits=n_bits,
        )
        # holding the rumor is a property of having received it
        if push_kinds[Kind.RUMOR]:
            self.informed[pd[pk == Kind.RUMOR]] = True
        if resp_kinds[Kind.RUMOR]:
            self.informed[qs[q_kind == Kind.RUMOR]] = True

        if self.validation:
            self._record(rep, src, act, intents, qd, answered, pd_sent)
        return rep

    def _check_sources(self, src: np.ndarray) -> None:
        n = self.n
        if src.size > 1 and (src[1:] > src[:-1]).all():
            lo, hi = src[0], src[-1]
        else:
            lo, hi = src.min(), src.max()
            if lo >= 0 and hi < n:
                self._mark[src] = True
                distinct = int(np.count_nonzero(self._mark))
                self._mark[src] = False
                if distinct != src.size:
                    raise ContractError("a node submitted two intents in one round")
        if lo < 0 or hi >= n:
            raise ContractError("intent from a node outside the network")
        if not self._all_alive and not self.alive[src].all():
            raise ContractError("a failed node cannot initiate communication")

    def _targets(self, act: np.ndarray, target: np.ndarray, random_action: int) -> np.ndarray:
        if act.size == 0:
            return np.zeros(0, dtype=np.int64)
        rand = act == random_action
        k = int(np.count_nonzero(rand))
        if k == act.size:
            return self.rng.integers(0, self.n, k)
        dst = np.array(target, dtype=np.int64)
        if k:
            dst[rand] = self.rng.integers(0, self.n, k)
        if dst.min() < 0 or dst.max() >= self.n:
            raise ContractError("direct contact to a node outside the network")
        return dst

    # -- validation mode ----------------------------------------------------

    def _check_direct(self, src, dst):
        known = self._learned
        n = self.n
        for u, v in zip(src.tolist(), dst.tolist()):
            if u != v and (u * n + v) not in known:
                raise ModelViolation(f"node {u} addressed node {v} whose ID it never learned")

    def _record(self, rep: DeliveryReport, src, act, intents, qd, answered, pd_all):
        n = self.n
        learned = self._learned
        # a delivered push discloses the sender and any IDs it carries
        learned.update((rep.push_dst * n + rep.push_src).tolist())
        carries = np.isin(rep.push_kind, ID_KINDS) & (rep.push_value >= 0)
        learned.update((rep.push_dst[carries] * n + rep.push_value[carries]).tolist())
        # a pull request discloses the puller to an alive responder
        reached = self.alive[rep.pull_dst]
        learned.update((rep.pull_dst[reached] * n + rep.pull_src[reached]).tolist())
        carries = np.isin(rep.pull_kind, ID_KINDS) & (rep.pull_value >= 0)
        learned.update((rep.pull_src[carries] * n + rep.pull_value[carries]).tolist())
        for i in np.flatnonzero(rep.pull_kind == Kind.LEADER_LIST):
            s, ln = rep.pull_value[i], rep.pull_length[i]
            learned.update((rep.pull_src[i] * n + rep.responses.flat[s : s + ln]).tolist())

        # every sent push is logged, delivered or not
        is_push = act <= Action.PUSH_DIRECT
        ps = src[is_push]
        pk = np.asarray(intents.kind)[is_push].astype(np.int64)
        qs = rep.pull_src
        ak = rep.pull_kind[answered].astype(np.int64)
        p_bits = self._bits[pk] + KIND_TAG_BITS
        r_bits = self._bits[ak] + KIND_TAG_BITS + np.where(ak == Kind.LEADER_LIST, rep.pull_length[answered] * self.id_bits, 0)
        n_ans = int(answered.sum())
        self._log.append((
            np.full(ps.size + qs.size + n_ans, rep.round, dtype=np.int64),
            np.concatenate([ps, qs, qd[answered]]),
            np.concatenate([pd_all, qd, qs[answered]]),
            np.concatenate([pk, np.full(qs.size, NO_PAYLOAD), ak]),
            np.concatenate([p_bits, np.full(qs.size, self.id_bits, np.int64), r_bits]),
            np.concatenate([np.full(ps.size, MSG_PUSH), np.full(qs.size, MSG_PULL_REQ), np.full(n_ans, MSG_PULL_RESP)]),
            np.concatenate([np.asarray(intents.value)[is_push], np.full(qs.size, NO_PAYLOAD), rep.pull_value[answered]]),
        ))

    def learned_ids(self, v: int) -> set[int]:
        """Node indices ``v`` may address directly (itself plus everything disclosed to it)."""
        if not self.validation:
            raise UnsupportedMode("learned-ID tracking exists only in validation mode")
        n = self.n
        lo, hi = v * n, (v + 1) * n
        return {v} | {k - lo for k in self._learned if lo <= k < hi}

    def delivery_log(self) -> dict[str, np.ndarray]:
        """Column arrays, one entry per message; ``value`` is the payload's value field
        (the list offset for leader lists, ``-1`` for requests)."""
        if not self.validation:
            raise UnsupportedMode("the delivery log exists only in validation mode")
        cols = ("round", "src", "dst", "kind", "bits", "type", "value")
        if not self._log:
            return {c: np.zeros(0, dtype=np.int64) for c in cols}
        return {c: np.concatenate([rec[i] for rec in self._log]) for i, c in enumerate(cols)}

    def write_delivery_log(self, fp) -> None:
        """Lines ``round,src,dst,kind,bits,push|pull_req|pull_resp`` with wire IDs."""
        log = self.delivery_log()
        names = {int(k): k.name for k in Kind}
        names[NO_PAYLOAD] = "REQUEST"
        out = fp if hasattr(fp, "write") else open(fp, "w")
        try:
            cols = ("round", "src", "dst", "kind", "bits", "type")
            for r, s, d, k, b, t in zip(*(log[c].tolist() for c in cols)):
                out.write(f"{r},{self.ids[s]},{self.ids[d]},{names[k]},{b},{_MSG_NAMES[t]}\n")
        finally:
            if out is not fp:
                out.close()

    # -- metrics ------------------------------------------------------------

    def snapshot_metrics(self) -> Metrics:
        met = self.metrics.copy()
        met.informed_count = int(np.count_nonzero(self.informed & self.alive))
        met.clustered_count = int(np.count_nonzero(self.clustered()))
        return met


def new_network(config: TrialConfig) -> Network:
    return Network(config)


def _assign_ids(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng([seed, 1])
    space = n * n
    ids = rng.integers(0, space, n)
    while True:
        uniq, first = np.unique(ids, return_index=True)
        if uniq.size == n:
            return ids
        dup = np.ones(n, dtype=bool)
        dup[first] = False
        ids[dup] = rng.integers(0, space, int(dup.sum()))


def failed_nodes(n: int, spec) -> np.ndarray:
    """Failed node indices; depends on ``(n, spec)`` only, never on the trial seed."""
    if spec.mode == "uniform":
        rng = np.random.default_rng([n, spec.adversary_seed, 3])
        return np.sort(rng.choice(n, size=spec.count, replace=False))
    if spec.mode == "explicit":
        return np.unique(np.asarray(spec.nodes, dtype=np.int64))
    return np.zeros(0, dtype=np.int64)


def _max_count(idx: np.ndarray, n: int) -> int:
    if idx.size == 0:
        return 0
    if idx.size * 16 < n:
        return int(np.unique(idx, return_counts=True)[1].max())
    return int(np.bincount(idx, minlength=n).max())
