"""Undirected simple graphs in compressed adjacency form.

Nodes are dense integers ``0..n-1``. Adjacency is stored CSR-style
(``indptr``/``indices``) with every neighbor list sorted, which keeps the
hot loops in :mod:`tsawnet.dynamics` vectorizable.
"""

from __future__ import annotations

import logging
import os
from collections import deque
from typing import Iterable, Iterator

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

log = logging.getLogger(__name__)

#: Marker used in distance fields for nodes outside the source's component.
UNREACHABLE = -1


class GraphError(ValueError):
    """Raised for malformed graph input (bad node ids, unparsable files)."""


class Graph:
    """Immutable undirected simple graph.

    Build instances with :func:`build_graph` (or the generators); the
    constructor trusts its arguments.
    """

    __slots__ = ("n", "indptr", "indices", "degree", "dropped_edges")

    def __init__(self, n: int, indptr: np.ndarray, indices: np.ndarray, dropped_edges: int = 0):
        self.n = int(n)
        self.indptr = indptr
        self.indices = indices
        self.degree = np.diff(indptr)
        self.dropped_edges = dropped_edges
        for arr in (self.indptr, self.indices, self.degree):
            arr.setflags(write=False)

    @property
    def num_edges(self) -> int:
        return int(self.indices.size // 2)

    @property
    def mean_degree(self) -> float:
        return 2.0 * self.num_edges / self.n if self.n else 0.0

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    @property
    def adjacency(self) -> list[list[int]]:
        return [self.neighbors(v).tolist() for v in range(self.n)]

    def edges(self) -> Iterator[tuple[int, int]]:
        """Yield each edge once as ``(u, v)`` with ``u < v``, in sorted order."""
        for u in range(self.n):
            for v in self.neighbors(u):
                if u < v:
                    yield u, int(v)

    def edge_array(self) -> np.ndarray:
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.degree)
        mask = src < self.indices
        return np.column_stack([src[mask], self.indices[mask].astype(np.int64)])

    def to_scipy(self) -> csr_matrix:
        data = np.ones(self.indices.size, dtype=np.float64)
        return csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )

    def __hash__(self):
        return hash((self.n, self.indices.tobytes()))

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, edges={self.num_edges})"


def build_graph(n: int, edges: Iterable[tuple[int, int]] | np.ndarray) -> Graph:
    """Build a simple undirected graph on ``n`` nodes.

    Self-loops and repeated pairs (in either orientation) are dropped; the
    number dropped is logged and kept on ``Graph.dropped_edges``.
    """
    if n < 0:
        raise GraphError(f"node count must be non-negative, got {n}")
    arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
    if arr.size == 0:
        arr = arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise GraphError("edges must be a sequence of node pairs")
    bad = (arr < 0) | (arr >= n)
    if bad.any():
        i = int(np.flatnonzero(bad.any(axis=1))[0])
        raise GraphError(f"edge {tuple(arr[i].tolist())} has a node outside [0, {n})")

    total = arr.shape[0]
    lo = np.minimum(arr[:, 0], arr[:, 1])
    hi = np.maximum(arr[:, 0], arr[:, 1])
    keep = lo != hi
    keys = np.unique(lo[keep] * n + hi[keep]) if n else np.empty(0, dtype=np.int64)
    lo, hi = keys // max(n, 1), keys % max(n, 1)
    dropped = total - keys.size
    if dropped:
        log.info("build_graph: dropped %d self-loop/duplicate edge(s)", dropped)

    src = np.concatenate([lo, hi])
    dst = np.concatenate([hi, lo])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return Graph(n, indptr, dst.astype(np.int32), dropped_edges=int(dropped))


def bfs_distances(g: Graph, source: int) -> np.ndarray:
    """Hop distances from ``source``; :data:`UNREACHABLE` marks other components.

    Level-synchronous BFS over the CSR arrays, one numpy pass per level.
    """
    if not 0 <= source < g.n:
        raise GraphError(f"source {source} outside [0, {g.n})")
    dist = np.full(g.n, UNREACHABLE, dtype=np.int32)
    dist[source] = 0
    frontier = np.array([source], dtype=np.int64)
    level = 0
    indptr, indices = g.indptr, g.indices
    while frontier.size:
        level += 1
        starts = indptr[frontier]
        counts = indptr[frontier + 1] - starts
        total = int(counts.sum())
        if total == 0:
            break
        offs = np.repeat(starts - np.cumsum(counts) + counts, counts) + np.arange(total)
        nbrs = indices[offs]
        nbrs = nbrs[dist[nbrs] == UNREACHABLE]
        frontier = np.unique(nbrs).astype(np.int64)
        dist[frontier] = level
    return dist


def bfs_distances_simple(g: Graph, source: int) -> list[int]:
    """Queue-based BFS; the slow reference for :func:`bfs_distances`."""
    dist = [UNREACHABLE] * g.n
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in g.neighbors(u):
            if dist[v] == UNREACHABLE:
                dist[v] = dist[u] + 1
                queue.append(int(v))
    return dist


def induced_subgraph(g: Graph, nodes: np.ndarray) -> tuple[Graph, dict[int, int]]:
    nodes = np.sort(np.asarray(nodes, dtype=np.int64))
    remap = np.full(g.n, -1, dtype=np.int64)
    remap[nodes] = np.arange(nodes.size)
    e = g.edge_array()
    if e.size:
        e = e[(remap[e[:, 0]] >= 0) & (remap[e[:, 1]] >= 0)]
        e = remap[e]
    sub = build_graph(int(nodes.size), e)
    return sub, {int(old): i for i, old in enumerate(nodes)}


def largest_component(g: Graph) -> tuple[Graph, dict[int, int]]:
    """Induced subgraph on the largest connected component, densely re-indexed.

    Ties between equally large components go to the one holding the smallest
    original node id. Returns the subgraph and the old->new node map.
    """
    if g.n == 0:
        return g, {}
    ncomp, labels = connected_components(g.to_scipy(), directed=False)
    if ncomp == 1:
        return g, {i: i for i in range(g.n)}
    sizes = np.bincount(labels, minlength=ncomp)
    # labels are assigned in order of first appearance, so the lowest label
    # among the largest components holds the smallest node id
    best = int(np.flatnonzero(sizes == sizes.max())[0])
    return induced_subgraph(g, np.flatnonzero(labels == best))


def is_connected(g: Graph) -> bool:
    return g.n == 0 or bool((bfs_distances(g, 0) != UNREACHABLE).all())


def load_edge_list(path: str | os.PathLike, n: int | None = None) -> Graph:
    """Read a whitespace-separated edge list.

    Lines starting with ``#`` and blank lines are skipped; extra columns
    (weights, timestamps) are ignored. Direction is discarded. The node
    count is ``max id + 1`` unless ``n`` is given.
    """
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) < 2:
                raise GraphError(f"{path}, line {lineno}: expected two node ids, got {s!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphError(f"{path}, line {lineno}: non-integer node id in {s!r}") from None
            if u < 0 or v < 0:
                raise GraphError(f"{path}, line {lineno}: negative node id in {s!r}")
            pairs.append((u, v))
    if n is None:
        n = 1 + max((max(p) for p in pairs), default=-1)
    g = build_graph(n, pairs)
    log.info("loaded %s: %d nodes, %d edges, %d dropped", path, g.n, g.num_edges, g.dropped_edges)
    return g


def save_edge_list(g: Graph, path: str | os.PathLike) -> None:
    """Write the canonical edge list: ``u v`` with ``u < v``, sorted.

    A header comment records the node count so isolated trailing nodes
    survive a round trip (see :func:`read_node_count`).
    """
    e = g.edge_array()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# nodes {g.n} edges {g.num_edges}\n")
        fh.write("".join(f"{u} {v}\n" for u, v in e.tolist()))


def read_node_count(path: str | os.PathLike) -> int | None:
    """Node count from a ``# nodes N`` header written by :func:`save_edge_list`."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().split()
    if len(first) >= 3 and first[0] == "#" and first[1] == "nodes":
        try:
            return int(first[2])
        except ValueError:
            return None
    return None


def load_graph(path: str | os.PathLike, lcc: bool = False) -> Graph:
    """Load an edge list, honouring a node-count header, optionally keeping only the LCC."""
    g = load_edge_list(path, n=read_node_count(path))
    if lcc:
        g, _ = largest_component(g)
    return g
