"""Undirected simple graphs in compressed sparse row form."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .exceptions import GraphInputError


@dataclass(frozen=True)
class Graph:
    """Immutable undirected graph without self-loops.

    Each undirected edge is stored in both directions. Adjacency lists are
    sorted ascending and duplicate-free, so ``neighbors[offsets[i]:offsets[i+1]]``
    is the neighbor list of node ``i``.
    """

    n: int
    offsets: np.ndarray
    neighbors: np.ndarray

    def __post_init__(self):
        self.offsets.setflags(write=False)
        self.neighbors.setflags(write=False)

    @property
    def m(self) -> int:
        """Undirected edge count."""
        return len(self.neighbors) // 2

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.offsets)

    def adj(self, i: int) -> np.ndarray:
        return self.neighbors[self.offsets[i] : self.offsets[i + 1]]

    def edges(self) -> np.ndarray:
        """(m, 2) array of undirected edges with ``u < v``, lexicographically sorted."""
        src = np.repeat(np.arange(self.n), self.degrees)
        keep = src < self.neighbors
        return np.column_stack([src[keep], self.neighbors[keep]])

    def to_scipy(self) -> sparse.csr_matrix:
        data = np.ones(len(self.neighbors), dtype=np.float64)
        return sparse.csr_matrix((data, self.neighbors, self.offsets), shape=(self.n, self.n))


def build_graph(edges, n: int) -> Graph:
    """Build a :class:`Graph` from an arbitrary list of node pairs.

    Self-loops are dropped; duplicate and one-directional entries are
    symmetrized and deduplicated.

    Raises
    ------
    GraphInputError
        If an endpoint falls outside ``[0, n)``. The error carries the
        index of the offending pair in ``line``.
    """
    if n < 0:
        raise GraphInputError(f"node count must be non-negative, got {n}")
    e = np.asarray(edges, dtype=np.int64)
    if e.size == 0:
        e = e.reshape(0, 2)
    if e.ndim != 2 or e.shape[1] != 2:
        raise GraphInputError(f"edges must be pairs, got array of shape {e.shape}")
    bad = np.flatnonzero((e < 0).any(axis=1) | (e >= n).any(axis=1))
    if len(bad):
        k = int(bad[0])
        raise GraphInputError(
            f"edge ({e[k, 0]}, {e[k, 1]}) has an endpoint outside [0, {n})", line=k
        )
    e = e[e[:, 0] != e[:, 1]]
    src = np.concatenate([e[:, 0], e[:, 1]])
    dst = np.concatenate([e[:, 1], e[:, 0]])
    # unique over the flattened key sorts by (src, dst) and removes duplicates
    key = np.unique(src * max(n, 1) + dst)
    src, dst = np.divmod(key, max(n, 1))
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=offsets[1:])
    return Graph(n=n, offsets=offsets, neighbors=dst.astype(np.int64))


def _expand(g: Graph, frontier: np.ndarray) -> np.ndarray:
    """Concatenated neighbor lists of all nodes in ``frontier``."""
    starts = g.offsets[frontier]
    counts = g.offsets[frontier + 1] - starts
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    # index of every neighbor slot: start of its block plus position within it
    block_start = np.repeat(starts - np.cumsum(counts) + counts, counts)
    return g.neighbors[block_start + np.arange(total)]


def bfs_distances(g: Graph, source: int, ell: int) -> np.ndarray:
    """Hop distances from ``source`` as a dense array, ``-1`` beyond ``ell``."""
    if ell < 0:
        raise ValueError(f"hop limit must be non-negative, got {ell}")
    dist = np.full(g.n, -1, dtype=np.int64)
    dist[source] = 0
    frontier = np.array([source], dtype=np.int64)
    for depth in range(1, ell + 1):
        cand = _expand(g, frontier)
        cand = cand[dist[cand] < 0]
        if len(cand) == 0:
            break
        frontier = np.unique(cand)
        dist[frontier] = depth
    return dist


def bounded_bfs(g: Graph, source: int, ell: int) -> dict[int, int]:
    """Map every node within ``ell`` hops of ``source`` to its hop distance."""
    dist = bfs_distances(g, source, ell)
    reached = np.flatnonzero(dist >= 0)
    return {int(v): int(dist[v]) for v in reached}


def row_normalize(g: Graph) -> sparse.csr_matrix:
    """Row-stochastic adjacency: entry (i, j) is ``1/deg(i)`` for every edge.

    Rows of isolated nodes are all zero. Multiplying by a prediction matrix
    gives each node the mean of its neighbors' rows.
    """
    deg = g.degrees
    data = np.repeat(1.0 / np.maximum(deg, 1), deg)
    return sparse.csr_matrix((data, g.neighbors, g.offsets), shape=(g.n, g.n))


def induced_subgraph(g: Graph, keep) -> tuple[Graph, np.ndarray]:
    """Subgraph on the nodes where ``keep`` is true.

    Returns the subgraph and ``kept``, the original id of every new node
    (new id ``k`` corresponds to original id ``kept[k]``).
    """
    keep = np.asarray(keep, dtype=bool)
    if keep.shape != (g.n,):
        raise ValueError(f"mask must have length {g.n}, got shape {keep.shape}")
    if not keep.any():
        raise ValueError("cannot induce a subgraph on an empty node set")
    kept = np.flatnonzero(keep)
    new_id = np.full(g.n, -1, dtype=np.int64)
    new_id[kept] = np.arange(len(kept))
    e = g.edges()
    e = e[keep[e[:, 0]] & keep[e[:, 1]]]
    return build_graph(new_id[e], len(kept)), kept
