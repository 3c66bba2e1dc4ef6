"""Exploration and topology measurements: cumulative discoveries, walk
accessibility, lattice Chebyshev distance and quantile regions."""

from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .dynamics import ExplorationRecord
from .graph import Graph

log = logging.getLogger(__name__)


class MetricsError(ValueError):
    pass


def epsilon_total(record: ExplorationRecord, t_a: int) -> int:
    """Nodes newly explored during iterations ``1..t_a`` (start nodes excluded)."""
    if not 0 <= t_a <= record.num_iterations:
        raise MetricsError(f"t_a must lie in [0, {record.num_iterations}], got {t_a}")
    return int(record.epsilon[:t_a].sum())


# --- accessibility ----------------------------------------------------------

def walk_probabilities(g: Graph, source: int, h: int) -> np.ndarray:
    """Distribution of a uniform random walk from ``source`` after ``h`` steps."""
    if h < 1:
        raise MetricsError(f"h must be >= 1, got {h}")
    if g.degree[source] == 0:
        raise MetricsError(f"source {source} is isolated")
    p = np.zeros(g.n)
    p[source] = 1.0
    inv_deg = np.divide(1.0, g.degree, out=np.zeros(g.n), where=g.degree > 0)
    src = np.repeat(np.arange(g.n), g.degree)
    for _ in range(h):
        p = np.bincount(g.indices, weights=(p * inv_deg)[src], minlength=g.n)
    return p


def transition_matrix(g: Graph) -> sparse.csr_matrix:
    inv_deg = np.divide(1.0, g.degree, out=np.zeros(g.n), where=g.degree > 0)
    data = np.repeat(inv_deg, g.degree)
    return sparse.csr_matrix((data, g.indices, g.indptr), shape=(g.n, g.n))


def _entropy_rows(m: sparse.csr_matrix) -> np.ndarray:
    m = m.tocsr()
    vals = m.data
    terms = np.zeros_like(vals)
    pos = vals > 0
    terms[pos] = -vals[pos] * np.log(vals[pos])
    rows = np.repeat(np.arange(m.shape[0]), np.diff(m.indptr))
    return np.bincount(rows, weights=terms, minlength=m.shape[0])


def accessibility(g: Graph, h: int = 3, block: int = 2048) -> np.ndarray:
    """``exp`` of the Shannon entropy of each node's ``h``-step walk distribution.

    Isolated nodes get 1. Rows of ``P**h`` are built in blocks of ``block``
    sources to bound memory on dense-ish graphs.
    """
    if h < 1:
        raise MetricsError(f"h must be >= 1, got {h}")
    P = transition_matrix(g)
    ent = np.zeros(g.n)
    for start in range(0, g.n, block):
        rows = P[start:start + block]
        for _ in range(h - 1):
            rows = rows @ P
        ent[start:start + block] = _entropy_rows(rows)
    acc = np.exp(ent)
    acc[g.degree == 0] = 1.0
    return acc


# --- regions ----------------------------------------------------------------

def lattice_side(n_nodes: int) -> int:
    side = math.isqrt(n_nodes)
    if n_nodes <= 0 or side * side != n_nodes:
        raise MetricsError(f"{n_nodes} nodes is not a square lattice")
    return side


def chebyshev_center_distance(side: int) -> np.ndarray:
    """Chebyshev distance of each row-major lattice node to the grid's mean position."""
    if side < 1:
        raise MetricsError(f"lattice side must be >= 1, got {side}")
    c = (side - 1) / 2.0
    y, x = np.divmod(np.arange(side * side), side)
    return np.maximum(np.abs(x - c), np.abs(y - c))


@dataclass
class RegionPartition:
    bins: list[np.ndarray]
    bin_stat: np.ndarray

    @property
    def sizes(self) -> np.ndarray:
        return np.array([b.size for b in self.bins], dtype=np.int64)

    def labels(self, n: int) -> np.ndarray:
        out = np.full(n, -1, dtype=np.int64)
        for i, b in enumerate(self.bins):
            out[b] = i
        return out


def make_regions(values, num_bins: int = 10, nodes=None) -> RegionPartition:
    """Equal-count bins of ``values`` in ascending order (ties by node id).

    ``nodes`` restricts the partition to a subset. Constant values collapse
    to a single bin with a warning.
    """
    values = np.asarray(values, dtype=np.float64)
    nodes = np.arange(values.size) if nodes is None else np.asarray(nodes, dtype=np.int64)
    if not 1 <= num_bins <= nodes.size:
        raise MetricsError(f"num_bins must lie in [1, {nodes.size}], got {num_bins}")
    v = values[nodes]
    if num_bins > 1 and np.ptp(v) == 0:
        log.warning("make_regions: all values equal, using a single region")
        num_bins = 1
    order = nodes[np.lexsort((nodes, v))]
    bins = [np.sort(b) for b in np.array_split(order, num_bins)]
    stat = np.array([values[b].mean() for b in bins])
    return RegionPartition(bins, stat)


def region_exploration(record: ExplorationRecord, regions: RegionPartition, t_cut: int):
    """Per region: nodes first reached at or before ``t_cut`` and that count over the region size."""
    if not 0 <= t_cut <= record.num_iterations:
        raise MetricsError(f"t_cut must lie in [0, {record.num_iterations}], got {t_cut}")
    fv = record.first_visit
    found = (fv >= 0) & (fv <= t_cut)
    counts = np.array([int(found[b].sum()) for b in regions.bins], dtype=np.int64)
    return counts, counts / regions.sizes


# --- export -----------------------------------------------------------------

def write_node_values(path: str | os.PathLike, values, header=("node_id", "value")) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i, v in enumerate(np.asarray(values).tolist()):
            w.writerow([i, repr(float(v))])


def write_region_table(path: str | os.PathLike, regions: RegionPartition) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_index", "mean_value", "size"])
        for i, (m, s) in enumerate(zip(regions.bin_stat.tolist(), regions.sizes.tolist())):
            w.writerow([i, repr(float(m)), s])
