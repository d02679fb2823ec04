"""Knowledge-graph experiments behind the log log n round lower bound.

Each node samples one uniformly random *other* node per round (a self-sample is
redrawn).  ``G_t`` joins every node to its round-``t`` sample.  If a node could
exchange everything it knows with every contact, its knowledge after ``t``
rounds is still confined to the ``2^t``-hop neighbourhood in the union of the
``G_i``; so whenever that union has diameter above ``2^T`` no algorithm can have
informed everyone after ``T`` rounds.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

ORACLE_MAX_N = 1 << 12
EXACT_DIAMETER_MAX_N = 1 << 16
LB_COLUMNS = ("n", "seed", "T", "diameter_or_lb", "feasible")


@dataclass(frozen=True)
class ContactSchedule:
    n: int
    T: int
    seed: int
    samples: np.ndarray  # (T, n): samples[t-1, v] = u_{v,t}

    def contact_graph(self, t: int) -> sparse.csr_matrix:
        """``G_t`` for ``1 <= t <= T``."""
        if not 1 <= t <= self.T:
            raise ValueError(f"round {t} outside 1..{self.T}")
        return _graph(self.n, np.arange(self.n), self.samples[t - 1])

    def union_graph(self, t: Optional[int] = None) -> sparse.csr_matrix:
        """``G_1 ∪ ... ∪ G_t`` (all rounds by default)."""
        t = self.T if t is None else t
        if t == 0:
            return sparse.csr_matrix((self.n, self.n), dtype=bool)
        src = np.tile(np.arange(self.n), t)
        return _graph(self.n, src, self.samples[:t].ravel())


def _graph(n: int, a: np.ndarray, b: np.ndarray) -> sparse.csr_matrix:
    m = sparse.coo_matrix((np.ones(a.size, dtype=bool), (a, b)), shape=(n, n)).tocsr()
    m = (m + m.T).tocsr()
    m.setdiag(False)
    m.eliminate_zeros()
    m.data[:] = True
    return m.astype(bool)


def build_schedule(n: int, T: int, seed: int) -> ContactSchedule:
    """Samples are drawn round by round, so the schedule for ``T`` is a prefix of the one for ``T+1``."""
    if n < 2 or T < 1:
        raise ValueError("need n >= 2 and T >= 1")
    rng = np.random.default_rng([seed, n, 6])
    v = np.arange(n)
    rows = np.empty((T, n), dtype=np.int64)
    for t in range(T):
        r = rng.integers(0, n - 1, n)
        rows[t] = r + (r >= v)
    return ContactSchedule(n, T, seed, rows)


def omniscient_knowledge(schedule: ContactSchedule, t: int) -> np.ndarray:
    """Dense symmetric ``K_t``: ``K[u, w]`` iff ``u`` can know ``w`` after ``t`` rounds.

    In every round each node talks to everyone it knows and to its sample, and
    both sides hand over their full knowledge.
    """
    n = schedule.n
    if n > ORACLE_MAX_N:
        raise ValueError(f"the knowledge oracle is quadratic; n={n} exceeds {ORACLE_MAX_N}")
    if not 0 <= t <= schedule.T:
        raise ValueError(f"t={t} outside 0..{schedule.T}")
    K = np.zeros((n, n), dtype=bool)
    for i in range(1, t + 1):
        M = K | schedule.contact_graph(i).toarray()
        Mf = M.astype(np.float32)
        K = M | ((Mf @ Mf) > 0)
        np.fill_diagonal(K, False)
    return K


def power_reachable(graph, hops: int) -> np.ndarray:
    """Dense boolean matrix of pairs at hop distance ``<= hops`` (diagonal included)."""
    return distances(graph) <= hops


def distances(graph) -> np.ndarray:
    g = sparse.csr_matrix(graph)
    return csgraph.shortest_path(g, method="D", unweighted=True, directed=True)


@dataclass(frozen=True)
class Diameter:
    value: float  # math.inf when disconnected
    exact: bool

    def __str__(self):
        if math.isinf(self.value):
            return "inf"
        return f"{int(self.value)}" if self.exact else f">={int(self.value)}"


def bfs_levels(graph, source: int) -> np.ndarray:
    """Hop distance from ``source`` to every node (-1 if unreachable), by frontier expansion."""
    g = sparse.csr_matrix(graph)
    indptr, indices = g.indptr, g.indices
    dist = np.full(g.shape[0], -1, dtype=np.int64)
    dist[source] = 0
    frontier = np.array([source])
    level = 0
    while frontier.size:
        level += 1
        starts, ends = indptr[frontier], indptr[frontier + 1]
        lens = ends - starts
        idx = np.repeat(starts - np.concatenate([[0], np.cumsum(lens)[:-1]]), lens) + np.arange(lens.sum())
        nb = indices[idx]
        nb = np.unique(nb[dist[nb] < 0])
        dist[nb] = level
        frontier = nb
    return dist


def diameter(graph, exact: Optional[bool] = None, sweeps: int = 2, seed: int = 0, chunk: int = 128) -> Diameter:
    """Exact diameter by all-sources BFS, or a double-sweep lower bound.

    ``exact=None`` picks exact search for ``n <= 2^16``.
    """
    g = sparse.csr_matrix(graph)
    n = g.shape[0]
    if n <= 1:
        return Diameter(0, True)
    d0 = bfs_levels(g, 0)
    if (d0 < 0).any():
        return Diameter(math.inf, True)
    if exact is None:
        exact = n <= EXACT_DIAMETER_MAX_N
    if exact:
        best = 0.0
        for lo in range(0, n, chunk):
            d = csgraph.shortest_path(g, method="D", unweighted=True, directed=True, indices=np.arange(lo, min(n, lo + chunk)))
            best = max(best, float(d.max()))
        return Diameter(best, True)
    rng = np.random.default_rng(seed)
    best = int(d0.max())
    for i in range(sweeps):
        d = d0 if i == 0 else bfs_levels(g, int(rng.integers(0, n)))
        far = int(np.argmax(d))
        best = max(best, int(bfs_levels(g, far).max()))
    return Diameter(float(best), False)


def max_degree(graph) -> int:
    g = sparse.csr_matrix(graph)
    return int(np.diff(g.indptr).max()) if g.shape[0] else 0


def expected_average_degree(n: int, T: int) -> float:
    """Mean degree of the union of ``T`` sampled rounds: each pair is joined by one
    of ``2T`` independent ``1/(n-1)`` events."""
    return (n - 1) * (1.0 - (1.0 - 1.0 / (n - 1)) ** (2 * T))


@dataclass(frozen=True)
class FeasibilityRow:
    n: int
    seed: int
    T: int
    diameter: Diameter
    feasible: bool

    def csv_row(self) -> list:
        return [self.n, self.seed, self.T, str(self.diameter), int(self.feasible)]


def feasibility_trace(n: int, seed: int, max_t: int = 12, exact: Optional[bool] = None) -> list[FeasibilityRow]:
    """Rows for ``T = 1, 2, ...`` until ``diameter(union of G_1..G_T) <= 2^T`` or ``max_t``."""
    sched = build_schedule(n, max_t, seed)
    rows = []
    for T in range(1, max_t + 1):
        d = diameter(sched.union_graph(T), exact=exact, seed=seed)
        ok = d.value <= 2**T
        rows.append(FeasibilityRow(n, seed, T, d, ok))
        if ok:
            break
    return rows


def min_feasible_rounds(n: int, seeds: Iterable[int], max_t: int = 12, exact: Optional[bool] = None) -> dict[int, Optional[int]]:
    """Per seed, the smallest ``T`` whose union graph has diameter ``<= 2^T`` (``None`` if beyond ``max_t``).

    With a sampled diameter the reported ``T`` can only be too small, never too
    large, so it remains a valid lower bound on the rounds any algorithm needs.
    """
    if n < 16:
        raise ValueError("min_feasible_rounds needs n >= 16")
    out = {}
    for s in seeds:
        rows = feasibility_trace(n, s, max_t, exact)
        out[s] = rows[-1].T if rows[-1].feasible else None
    return out


def write_lb_csv(path, rows: Sequence[FeasibilityRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LB_COLUMNS)
        for r in rows:
            w.writerow(r.csv_row())
