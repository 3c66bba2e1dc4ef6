"""Seeded network models: lattices, Watts-Strogatz, Barabasi-Albert, Waxman
and an LFR-style community benchmark.

Every generator takes an explicit integer seed and owns its RNG, so the same
arguments always yield the same edge set.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import integrate

from .graph import Graph, build_graph, largest_component

log = logging.getLogger(__name__)


class GeneratorError(ValueError):
    """Invalid or infeasible generator parameters."""


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


# --- lattices -------------------------------------------------------------

def gen_lattice(side: int) -> Graph:
    """Open-boundary ``side x side`` grid, row-major node ids, 4-neighbourhood."""
    if side < 2:
        raise GeneratorError(f"lattice side must be >= 2, got {side}")
    idx = np.arange(side * side).reshape(side, side)
    right = np.column_stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()])
    down = np.column_stack([idx[:-1, :].ravel(), idx[1:, :].ravel()])
    return build_graph(side * side, np.vstack([right, down]))


def gen_toroidal_lattice(side: int) -> Graph:
    """Periodic ``side x side`` grid; every node has degree 4."""
    if side < 3:
        raise GeneratorError(f"toroidal lattice side must be >= 3, got {side}")
    idx = np.arange(side * side).reshape(side, side)
    right = np.column_stack([idx.ravel(), np.roll(idx, -1, axis=1).ravel()])
    down = np.column_stack([idx.ravel(), np.roll(idx, -1, axis=0).ravel()])
    return build_graph(side * side, np.vstack([right, down]))


# --- small world / scale free ---------------------------------------------

def gen_watts_strogatz(n: int, k_ring: int, p_rewire: float, seed=None) -> Graph:
    """Watts-Strogatz ring rewiring.

    Each ring edge ``(u, u+j)`` keeps ``u`` and, with probability
    ``p_rewire``, moves its far end to a uniformly chosen node that is neither
    ``u`` nor already adjacent to it. The edge count stays ``n*k_ring/2``.
    """
    if k_ring % 2 or k_ring < 2:
        raise GeneratorError(f"k_ring must be a positive even integer, got {k_ring}")
    if k_ring >= n:
        raise GeneratorError(f"k_ring ({k_ring}) must be smaller than n ({n})")
    if not 0.0 <= p_rewire <= 1.0:
        raise GeneratorError(f"p_rewire must lie in [0, 1], got {p_rewire}")
    rng = _rng(seed)
    adj = [set() for _ in range(n)]
    for u in range(n):
        for j in range(1, k_ring // 2 + 1):
            v = (u + j) % n
            adj[u].add(v)
            adj[v].add(u)
    for j in range(1, k_ring // 2 + 1):
        flips = rng.random(n) < p_rewire
        for u in np.flatnonzero(flips):
            u = int(u)
            v = (u + j) % n
            if v not in adj[u] or len(adj[u]) >= n - 1:
                continue
            w = int(rng.integers(n))
            while w == u or w in adj[u]:
                w = int(rng.integers(n))
            adj[u].discard(v)
            adj[v].discard(u)
            adj[u].add(w)
            adj[w].add(u)
    edges = [(u, v) for u in range(n) for v in adj[u] if u < v]
    return build_graph(n, edges)


def gen_barabasi_albert(n: int, m: int, seed=None) -> Graph:
    """Preferential attachment grown from an ``(m+1)``-clique.

    Each new node links to ``m`` distinct existing nodes chosen with
    probability proportional to their current degree.
    """
    if not 1 <= m < n:
        raise GeneratorError(f"need 1 <= m < n, got m={m}, n={n}")
    rng = _rng(seed)
    edges = [(u, v) for u in range(m + 1) for v in range(u + 1, m + 1)]
    # each node appears once per incident edge end
    ends = np.empty(2 * (len(edges) + m * (n - m - 1)), dtype=np.int64)
    fill = 0
    for u, v in edges:
        ends[fill], ends[fill + 1] = u, v
        fill += 2
    for new in range(m + 1, n):
        targets: set[int] = set()
        while len(targets) < m:
            targets.add(int(ends[rng.integers(fill)]))
        for t in sorted(targets):
            edges.append((t, new))
            ends[fill], ends[fill + 1] = t, new
            fill += 2
    return build_graph(n, edges)


# --- Waxman ----------------------------------------------------------------

def _square_distance_pdf(d: float) -> float:
    """Density of the distance between two uniform points in the unit square."""
    if d <= 1.0:
        return 2 * d * (math.pi - 4 * d + d * d)
    if d <= math.sqrt(2.0):
        return 2 * d * (4 * math.sqrt(d * d - 1) - (d * d + 2 - math.pi) - 4 * math.acos(1 / d))
    return 0.0


def waxman_mean_kernel(alpha: float, L_scale: float = 1.0) -> float:
    """E[exp(-d / (alpha*L))] for ``d`` the distance of two uniform points in the unit square."""
    s = alpha * L_scale
    f = lambda d: _square_distance_pdf(d) * math.exp(-d / s)
    a, _ = integrate.quad(f, 0.0, 1.0)
    b, _ = integrate.quad(f, 1.0, math.sqrt(2.0))
    return a + b


def waxman_expected_degree(n: int, alpha: float, beta: float, L_scale: float = 1.0) -> float:
    return (n - 1) * beta * waxman_mean_kernel(alpha, L_scale)


def calibrate_waxman_beta(n: int, target_degree: float, alpha: float = 1.0, L_scale: float = 1.0) -> float:
    """Beta giving expected mean degree ``target_degree`` before LCC extraction.

    The expectation is linear in beta, so this is a closed-form solve.
    """
    beta = target_degree / ((n - 1) * waxman_mean_kernel(alpha, L_scale))
    if beta > 1.0:
        raise GeneratorError(
            f"target degree {target_degree} needs beta={beta:.3g} > 1 for n={n}, alpha={alpha}"
        )
    return beta


def _triu_unflatten(flat: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Map row-major indices of the strict upper triangle back to (i, j)."""
    # pairs before row i: i*n - i*(i+1)/2
    b = 2 * n - 1
    i = np.floor((b - np.sqrt(b * b - 8.0 * flat)) / 2).astype(np.int64)
    start = i * n - i * (i + 1) // 2
    # float rounding can land one row off
    over = flat < start
    i[over] -= 1
    start = i * n - i * (i + 1) // 2
    under = flat - start >= n - 1 - i
    i[under] += 1
    start = i * n - i * (i + 1) // 2
    j = flat - start + i + 1
    return i, j


def gen_waxman(
    n: int,
    alpha: float = 1.0,
    beta: float = 0.015,
    L_scale: float = 1.0,
    seed=None,
    target_degree: float | None = None,
    lcc: bool = True,
) -> Graph:
    """Waxman random geometric graph on the unit square.

    Pairs at Euclidean distance ``d`` connect with probability
    ``beta * exp(-d / (alpha * L_scale))``. With ``target_degree`` set, beta is
    recalibrated so the expected mean degree hits the target. The largest
    connected component is returned unless ``lcc=False``.
    """
    if n < 2:
        raise GeneratorError(f"Waxman needs n >= 2, got {n}")
    if alpha <= 0 or beta <= 0 or L_scale <= 0:
        raise GeneratorError("alpha, beta and L_scale must be positive")
    if target_degree is not None:
        beta = calibrate_waxman_beta(n, target_degree, alpha, L_scale)
    if beta > 1.0:
        raise GeneratorError(f"beta must be <= 1, got {beta}")
    rng = _rng(seed)
    pts = rng.random((n, 2))
    # Thinning: propose each of the M unordered pairs with probability beta,
    # then keep a proposal with probability exp(-d/(alpha*L)).
    npairs = n * (n - 1) // 2
    k = int(rng.binomial(npairs, beta))
    flat = np.sort(rng.choice(npairs, size=k, replace=False))
    i, j = _triu_unflatten(flat, n)
    d = np.hypot(*(pts[i] - pts[j]).T)
    keep = rng.random(k) < np.exp(-d / (alpha * L_scale))
    edges = np.column_stack([i[keep], j[keep]])
    g = build_graph(n, edges)
    if lcc:
        g, _ = largest_component(g)
    return g


# --- LFR-style community benchmark ----------------------------------------

def _rounded_powerlaw_mean(x_min: float, x_max: float, gamma: float) -> float:
    """Mean of round(X) for X ~ x^-gamma truncated to [x_min, x_max]."""
    a = 1.0 - gamma
    cdf = lambda x: (np.clip(x, x_min, x_max) ** a - x_min ** a) / (x_max ** a - x_min ** a)
    ks = np.arange(math.floor(x_min), math.ceil(x_max) + 1)
    mass = cdf(ks + 0.5) - cdf(ks - 0.5)
    return float((ks * mass).sum())


def _sample_powerlaw(rng, size: int, x_min: float, x_max: float, gamma: float) -> np.ndarray:
    a = 1.0 - gamma
    u = rng.random(size)
    x = (x_min ** a + u * (x_max ** a - x_min ** a)) ** (1.0 / a)
    return np.rint(x).astype(np.int64)


def solve_degree_floor(target: float, k_max: float, gamma: float) -> float:
    """Real lower cutoff whose rounded truncated power law has mean ``target``."""
    lo, hi = 0.5 + 1e-9, float(k_max)
    if not _rounded_powerlaw_mean(lo, k_max, gamma) <= target <= k_max:
        raise GeneratorError(f"mean degree {target} not reachable with k_max={k_max}, exponent {gamma}")
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if _rounded_powerlaw_mean(mid, k_max, gamma) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _community_sizes(rng, n, c, s_min, s_max, retries=1000):
    if c * s_min > n or c * s_max < n:
        raise GeneratorError(f"cannot split {n} nodes into {c} communities of size [{s_min}, {s_max}]")
    for _ in range(retries):
        sizes = rng.integers(s_min, s_max + 1, size=c - 1)
        last = n - int(sizes.sum())
        if s_min <= last <= s_max:
            return np.append(sizes, last)
    raise GeneratorError(f"no community size partition found after {retries} tries")


def _pair_stubs(rng, stubs, comm, external, existing, rounds=20, max_tries=100):
    """Random stub matching with bounded repair.

    Stubs from rejected pairs (self-loop, duplicate, or wrong side of the
    community boundary) are reshuffled for a few rounds. What is still
    unmatched after that is repaired by swapping endpoints with already
    accepted edges; anything left after ``max_tries`` swaps is dropped.
    """
    def ok(a, b):
        if a == b or (min(a, b), max(a, b)) in existing:
            return False
        return (comm[a] != comm[b]) if external else True

    edges: list[tuple[int, int]] = []
    pending = np.asarray(stubs, dtype=np.int64)
    for _ in range(rounds):
        if pending.size < 2:
            break
        pending = rng.permutation(pending)
        if pending.size % 2:
            pending = pending[:-1]
        rejected = []
        for a, b in pending.reshape(-1, 2).tolist():
            if ok(a, b):
                e = (min(a, b), max(a, b))
                existing.add(e)
                edges.append(e)
            else:
                rejected += (a, b)
        if len(rejected) == pending.size:
            pending = np.asarray(rejected, dtype=np.int64)
            break
        pending = np.asarray(rejected, dtype=np.int64)

    pending = pending.tolist()
    dropped = 0
    while len(pending) >= 2:
        a, b = pending.pop(), pending.pop()
        for _ in range(max_tries):
            if not edges:
                break
            j = int(rng.integers(len(edges)))
            c, d = edges[j]
            if rng.random() < 0.5:
                c, d = d, c
            existing.discard(edges[j])
            if ok(a, c) and ok(b, d) and (min(a, c), max(a, c)) != (min(b, d), max(b, d)):
                e1, e2 = (min(a, c), max(a, c)), (min(b, d), max(b, d))
                edges[j] = e1
                edges.append(e2)
                existing.update((e1, e2))
                break
            existing.add(edges[j])
        else:
            dropped += 1
    if dropped:
        log.debug("stub matching dropped %d pair(s)", dropped)
    return edges


@dataclass
class CommunityGraph:
    graph: Graph
    membership: np.ndarray

    def mixing(self) -> float:
        """Fraction of edges joining different communities."""
        e = self.graph.edge_array()
        if e.shape[0] == 0:
            return 0.0
        return float(np.mean(self.membership[e[:, 0]] != self.membership[e[:, 1]]))


def gen_community(
    n: int,
    n_communities: int = 2,
    mu: float = 0.2,
    gamma_deg: float = 2.5,
    k_min: float | None = 3,
    k_max: int = 100,
    s_min: int | None = None,
    s_max: int | None = None,
    seed=None,
    target_degree: float | None = None,
    return_membership: bool = False,
):
    """LFR-style benchmark with planted communities.

    Degrees follow a power law with exponent ``gamma_deg`` on
    ``[k_min, k_max]`` (``k_min`` is solved for when ``target_degree`` is
    given). Each node sends a fraction ``mu`` of its stubs outside its
    community, in expectation; internal and external stubs are matched
    separately.

    Community size bounds default to +-20% around ``n / n_communities``.
    """
    if not 0.0 <= mu < 1.0:
        raise GeneratorError(f"mu must lie in [0, 1), got {mu}")
    if n_communities < 1:
        raise GeneratorError("need at least one community")
    if target_degree is not None:
        k_min = solve_degree_floor(target_degree, k_max, gamma_deg)
    if k_min is None or k_min < 0.5 or k_min > k_max:
        raise GeneratorError(f"invalid degree range [{k_min}, {k_max}]")
    avg = n / n_communities
    s_min = int(math.floor(0.8 * avg)) if s_min is None else s_min
    s_max = int(math.ceil(1.2 * avg)) if s_max is None else s_max
    if not (s_min > k_min and s_max > k_max):
        raise GeneratorError(
            f"community sizes must exceed degrees: need s_min > k_min ({s_min} vs {k_min}) "
            f"and s_max > k_max ({s_max} vs {k_max})"
        )
    rng = _rng(seed)
    sizes = _community_sizes(rng, n, n_communities, s_min, s_max)
    comm = rng.permutation(np.repeat(np.arange(n_communities), sizes))
    deg = _sample_powerlaw(rng, n, k_min, k_max, gamma_deg)

    frac = mu * deg
    k_out = np.floor(frac).astype(np.int64)
    k_out += rng.random(n) < (frac - k_out)
    if n_communities == 1:
        k_out[:] = 0
    k_in = deg - k_out
    k_in = np.minimum(k_in, sizes[comm] - 1)

    # No community may hold more than half of all external stubs, or the
    # cross-community matching cannot close. Half of the excess moves inward
    # in the offending community and half moves outward elsewhere, which keeps
    # the overall external fraction unchanged.
    for _ in range(10 * n_communities):
        ext = np.bincount(comm, weights=k_out, minlength=n_communities)
        worst = int(np.argmax(ext))
        excess = int(ext[worst] - (ext.sum() - ext[worst]))
        if excess <= 0 or n_communities == 1:
            break
        inward = (excess + 1) // 2
        cand = np.repeat(np.flatnonzero((comm == worst) & (k_out > 0)), k_out[(comm == worst) & (k_out > 0)])
        pick = rng.choice(cand, size=min(inward, cand.size), replace=False)
        np.subtract.at(k_out, pick, 1)
        np.add.at(k_in, pick, 1)
        others = (comm != worst) & (k_in > 0)
        cand = np.repeat(np.flatnonzero(others), k_in[others])
        pick = rng.choice(cand, size=min(excess - inward, cand.size), replace=False)
        np.add.at(k_out, pick, 1)
        np.subtract.at(k_in, pick, 1)
    # internal stub sums must be even within each community
    for c in range(n_communities):
        members = np.flatnonzero(comm == c)
        if k_in[members].sum() % 2:
            v = members[np.argmax(k_in[members])]
            k_in[v] -= 1

    existing: set[tuple[int, int]] = set()
    edges = []
    for c in range(n_communities):
        members = np.flatnonzero(comm == c)
        stubs = np.repeat(members, k_in[members])
        edges += _pair_stubs(rng, stubs, comm, external=False, existing=existing)
    stubs = np.repeat(np.arange(n), k_out)
    edges += _pair_stubs(rng, stubs, comm, external=True, existing=existing)
    g = build_graph(n, edges)
    if return_membership:
        return CommunityGraph(g, comm)
    return g


# --- spec dispatch ---------------------------------------------------------

MODELS = ("la", "tla", "ws", "ba", "wax", "cn")

_DEFAULTS: dict[str, dict[str, Any]] = {
    "la": {"side": 100},
    "tla": {"side": 100},
    "ws": {"n": 10000, "k_ring": 4, "p_rewire": 0.001},
    "ba": {"n": 10000, "m": 3},
    "wax": {"n": 10000, "alpha": 1.0, "beta": 0.015, "L_scale": 1.0, "target_degree": 6.02},
    "cn": {
        "n": 10000, "n_communities": 2, "mu": 0.2, "gamma_deg": 2.5, "k_max": 100,
        "s_min": None, "s_max": None, "target_degree": 5.63,
    },
}


@dataclass
class GeneratorSpec:
    """Network model name, its parameters and the seed."""

    kind: str
    params: dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        self.kind = self.kind.lower()
        if self.kind not in MODELS:
            raise GeneratorError(f"unknown model {self.kind!r}; choose from {', '.join(MODELS)}")
        unknown = set(self.params) - set(_DEFAULTS[self.kind]) - {"k_min"}
        if unknown:
            raise GeneratorError(f"unknown parameter(s) for {self.kind}: {', '.join(sorted(unknown))}")

    def resolved(self) -> dict[str, Any]:
        out = dict(_DEFAULTS[self.kind])
        out.update(self.params)
        return out

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "params": self.resolved(), "seed": self.seed}

    def with_seed(self, seed: int) -> "GeneratorSpec":
        return GeneratorSpec(self.kind, dict(self.params), seed)


def generate(spec: GeneratorSpec) -> Graph:
    p = spec.resolved()
    kind = spec.kind
    if kind == "la":
        return gen_lattice(int(p["side"]))
    if kind == "tla":
        return gen_toroidal_lattice(int(p["side"]))
    if kind == "ws":
        return gen_watts_strogatz(int(p["n"]), int(p["k_ring"]), float(p["p_rewire"]), spec.seed)
    if kind == "ba":
        return gen_barabasi_albert(int(p["n"]), int(p["m"]), spec.seed)
    if kind == "wax":
        return gen_waxman(
            int(p["n"]), float(p["alpha"]), float(p["beta"]), float(p["L_scale"]),
            seed=spec.seed, target_degree=p.get("target_degree"),
        )
    return gen_community(
        int(p["n"]), int(p["n_communities"]), float(p["mu"]), float(p["gamma_deg"]),
        k_min=p.get("k_min", 3), k_max=int(p["k_max"]), s_min=p["s_min"], s_max=p["s_max"],
        seed=spec.seed, target_degree=p.get("target_degree"),
    )
