"""Multi-agent true self-avoiding walk with field-biased jumps.

Each agent keeps its own visit counts ``f`` and, at every iteration, either

* takes a TSAW step: neighbour ``v`` is chosen with probability proportional
  to ``alpha ** -f(v)``, or
* with probability ``gamma`` jumps to a node drawn from the influence field of
  the other agents, ``E(i) = sum_a eta_a * exp(-tau * d(i, pos_a))``.

The per-agent primitives (:func:`tsaw_weights`, :func:`tsaw_step`,
:func:`compute_field`, :func:`jump_destination`) follow the definitions
literally. :func:`simulate` runs all agents of an iteration at once with
numpy; its default jump sampler draws from the same distribution as
``jump_destination(compute_field(...))`` without materialising the field
(see :class:`DistanceShells`).
"""

from __future__ import annotations

import json
import math
from collections import OrderedDict
import dataclasses
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .graph import UNREACHABLE, Graph, bfs_distances

JUMP_SAMPLERS = ("shells", "field")


class DynamicsError(ValueError):
    pass


@dataclass(frozen=True)
class DynamicsParams:
    """Parameters of one simulation.

    ``eta_common``/``eta_influential`` have no published values; the
    defaults (1 and 10) are this package's choice.
    """

    alpha: float = 2.0
    gamma: float = 0.0
    tau: float = 1.0
    eta_common: float = 1.0
    eta_influential: float = 10.0
    d_eta: float = 0.1
    num_agents: int = 100
    iterations: int = 1000
    seed: int = 0
    exclude_self: bool = True

    def __post_init__(self):
        if not self.alpha > 0:
            raise DynamicsError(f"alpha must be > 0, got {self.alpha}")
        if not 0.0 <= self.gamma <= 1.0:
            raise DynamicsError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not self.tau >= 0:
            raise DynamicsError(f"tau must be >= 0, got {self.tau}")
        if self.eta_common < 0 or self.eta_influential < 0:
            raise DynamicsError("fitness values must be >= 0")
        if not 0.0 <= self.d_eta <= 1.0:
            raise DynamicsError(f"d_eta must lie in [0, 1], got {self.d_eta}")
        if self.num_agents < 1:
            raise DynamicsError(f"num_agents must be >= 1, got {self.num_agents}")
        if self.iterations < 1:
            raise DynamicsError(f"iterations must be >= 1, got {self.iterations}")

    def replace(self, **kw) -> "DynamicsParams":
        return dataclasses.replace(self, **kw)


@dataclass
class AgentState:
    position: int
    visits: dict[int, int]
    eta: float


@dataclass
class AgentPopulation:
    """All agents, with visit counts stored densely as an ``(agents, nodes)`` array."""

    positions: np.ndarray
    visits: np.ndarray
    eta: np.ndarray

    def __len__(self) -> int:
        return self.positions.size

    def agent(self, i: int) -> AgentState:
        row = self.visits[i]
        nz = np.flatnonzero(row)
        return AgentState(int(self.positions[i]), dict(zip(nz.tolist(), row[nz].tolist())), float(self.eta[i]))


def influential_count(d_eta: float, num_agents: int) -> int:
    """Number of influential agents: ``d_eta * num_agents`` rounded half up."""
    return int(math.floor(d_eta * num_agents + 0.5))


def init_agents(g: Graph, params: DynamicsParams, rng: np.random.Generator) -> AgentPopulation:
    """Place agents uniformly at random (collisions allowed) and assign fitness."""
    if g.n == 0:
        raise DynamicsError("cannot place agents on an empty graph")
    a = params.num_agents
    positions = rng.integers(g.n, size=a)
    eta = np.full(a, params.eta_common, dtype=np.float64)
    eta[rng.choice(a, size=influential_count(params.d_eta, a), replace=False)] = params.eta_influential
    visits = np.zeros((a, g.n), dtype=np.int32)
    visits[np.arange(a), positions] = 1
    return AgentPopulation(positions, visits, eta)


# --- TSAW -------------------------------------------------------------------

def _neighbor_visits(agent: AgentState, g: Graph) -> np.ndarray:
    return np.array([agent.visits.get(int(v), 0) for v in g.neighbors(agent.position)], dtype=np.float64)


def tsaw_weights(agent: AgentState, g: Graph, alpha: float = 2.0) -> np.ndarray:
    """``alpha ** -f(v)`` for each neighbour ``v`` of the agent's position."""
    return alpha ** -_neighbor_visits(agent, g)


def tsaw_probabilities(agent: AgentState, g: Graph, alpha: float = 2.0) -> np.ndarray:
    f = _neighbor_visits(agent, g)
    if f.size == 0:
        return f
    # rescale so the largest weight is 1; long memories cannot underflow
    w = alpha ** -(f - (f.min() if alpha >= 1 else f.max()))
    return w / w.sum()


def tsaw_step(agent: AgentState, g: Graph, rng: np.random.Generator, alpha: float = 2.0) -> int | None:
    """Move ``agent`` one TSAW step in place.

    Returns the new position, or ``None`` if the agent sits on an isolated
    node (nothing changes in that case).
    """
    p = tsaw_probabilities(agent, g, alpha)
    if p.size == 0:
        return None
    i = min(int(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right")), p.size - 1)
    nxt = int(g.neighbors(agent.position)[i])
    agent.position = nxt
    agent.visits[nxt] = agent.visits.get(nxt, 0) + 1
    return nxt


# --- influence field --------------------------------------------------------

@dataclass
class InfluenceField:
    values: np.ndarray
    total: float

    @property
    def probabilities(self) -> np.ndarray:
        if self.total > 0:
            return self.values / self.total
        return np.full(self.values.size, 1.0 / self.values.size)


def compute_field(
    g: Graph,
    positions,
    eta,
    tau: float,
    exclude: int | None = None,
    distances: Callable[[int], np.ndarray] | None = None,
) -> InfluenceField:
    """Superposed field ``sum_a eta_a * exp(-tau * d(i, pos_a))`` over agents ``a != exclude``.

    Nodes unreachable from an agent receive nothing from it. ``distances``
    maps a source node to its BFS distance array and defaults to a fresh BFS
    per distinct occupied node.
    """
    if tau < 0:
        raise DynamicsError(f"tau must be >= 0, got {tau}")
    positions = np.asarray(positions)
    eta = np.asarray(eta, dtype=np.float64)
    if distances is None:
        cache: dict[int, np.ndarray] = {}

        def distances(p):
            if p not in cache:
                cache[p] = bfs_distances(g, p)
            return cache[p]

    # agents sharing a node emit identical fields: group them first
    strength: dict[int, float] = {}
    for a, (p, e) in enumerate(zip(positions.tolist(), eta.tolist())):
        if a == exclude:
            continue
        strength[p] = strength.get(p, 0.0) + e
    values = np.zeros(g.n, dtype=np.float64)
    for p in sorted(strength):
        if strength[p] == 0.0:
            continue
        d = distances(p)
        reach = d != UNREACHABLE
        values[reach] += strength[p] * np.exp(-tau * d[reach])
    return InfluenceField(values, float(values.sum()))


def jump_destination(fld: InfluenceField, rng: np.random.Generator) -> int:
    """Node drawn with probability ``E(i) / sum E``; uniform if the field is zero."""
    return _draw(fld, rng.random())


def _draw(fld: InfluenceField, u: float) -> int:
    n = fld.values.size
    if fld.total <= 0:
        return min(int(u * n), n - 1)
    c = np.cumsum(fld.values)
    return min(int(np.searchsorted(c, u * c[-1], side="right")), n - 1)


class DistanceShells:
    """Per-source BFS layers, cached.

    For source ``p`` the reachable nodes are stored ordered by distance
    (``order``) with layer boundaries ``bounds`` so that nodes at distance
    ``d`` are ``order[bounds[d]:bounds[d+1]]``.

    Small graphs (``n*n <= dense_limit``) get every source precomputed into
    padded matrices and jumps are sampled in bulk; larger graphs compute
    sources on demand, keeping at most ``max_entries`` node ids (least
    recently used sources are evicted). Both modes return identical samples.
    Safe to share between simulations on the same graph.
    """

    def __init__(self, g: Graph, dense_limit: int = 16_000_000, max_entries: int | None = 50_000_000):
        self.g = g
        self.max_entries = max_entries
        self._cache: OrderedDict[int, tuple[np.ndarray, np.ndarray]] = OrderedDict()
        self._size = 0
        self._cum: dict[float, np.ndarray] = {}
        self._z: dict[float, np.ndarray] = {}
        self.dense = g.n * g.n <= dense_limit
        if self.dense:
            self._build_dense()

    def _bfs_layers(self, p: int) -> tuple[np.ndarray, np.ndarray]:
        d = bfs_distances(self.g, p)
        reach = np.flatnonzero(d != UNREACHABLE)
        dr = d[reach]
        order = reach[np.argsort(dr, kind="stable")].astype(np.int32)
        bounds = np.concatenate([[0], np.cumsum(np.bincount(dr))])
        return order, bounds

    def _build_dense(self):
        n = self.g.n
        layers = [self._bfs_layers(p) for p in range(n)]
        width = max(b.size for _, b in layers)
        self._order = np.zeros((n, n), dtype=np.int32)
        self._bounds = np.empty((n, width), dtype=np.int64)
        for p, (o, b) in enumerate(layers):
            self._order[p, :o.size] = o
            self._bounds[p, :b.size] = b
            self._bounds[p, b.size:] = b[-1]
        self._counts = np.diff(self._bounds, axis=1)

    def get(self, p: int) -> tuple[np.ndarray, np.ndarray]:
        if self.dense:
            b = self._bounds[p]
            b = b[:int(np.searchsorted(b, b[-1])) + 1]
            return self._order[p, :b[-1]], b
        hit = self._cache.get(p)
        if hit is not None:
            self._cache.move_to_end(p)
            return hit
        hit = self._cache[p] = self._bfs_layers(p)
        self._size += hit[0].size
        if self.max_entries is not None:
            while self._size > self.max_entries and len(self._cache) > 1:
                _, (o, _) = self._cache.popitem(last=False)
                self._size -= o.size
        return hit

    def distances(self, p: int) -> np.ndarray:
        order, bounds = self.get(p)
        d = np.full(self.g.n, UNREACHABLE, dtype=np.int32)
        d[order] = np.repeat(np.arange(bounds.size - 1, dtype=np.int32), np.diff(bounds))
        return d

    def layer_weights(self, p: int, tau: float) -> np.ndarray:
        """Total kernel weight of each BFS layer around ``p``."""
        _, bounds = self.get(p)
        return np.diff(bounds) * np.exp(-tau * np.arange(bounds.size - 1))

    def _dense_cum(self, tau: float) -> np.ndarray:
        c = self._cum.get(tau)
        if c is None:
            decay = np.exp(-tau * np.arange(self._counts.shape[1]))
            c = self._cum[tau] = np.cumsum(self._counts * decay, axis=1)
        return c

    def kernel_mass(self, nodes: np.ndarray, tau: float) -> np.ndarray:
        """``Z(p) = sum_i exp(-tau * d(i, p))`` for each ``p`` in ``nodes``."""
        if self.dense:
            return self._dense_cum(tau)[nodes, -1]
        z = self._z.get(tau)
        if z is None:
            z = self._z[tau] = np.full(self.g.n, np.nan)
        vals = z[nodes]
        missing = np.isnan(vals)
        if missing.any():
            for p in np.unique(nodes[missing]).tolist():
                z[p] = np.cumsum(self.layer_weights(p, tau))[-1]
            vals = z[nodes]
        return vals

    def sample(self, p: int, tau: float, u_layer: float, u_node: float) -> int:
        """Node drawn with probability proportional to ``exp(-tau * d(i, p))``."""
        order, bounds = self.get(p)
        w = self.layer_weights(p, tau)
        c = np.cumsum(w)
        d = min(int(np.searchsorted(c, u_layer * c[-1], side="right")), c.size - 1)
        while w[d] == 0:  # rounding at the top end
            d -= 1
        lo, hi = int(bounds[d]), int(bounds[d + 1])
        return int(order[lo + min(int(u_node * (hi - lo)), hi - lo - 1)])

    def sample_many(self, sources: np.ndarray, tau: float, u_layer: np.ndarray, u_node: np.ndarray) -> np.ndarray:
        """Vectorised :meth:`sample` over several sources."""
        if not self.dense:
            return np.array(
                [self.sample(int(p), tau, a, b) for p, a, b in zip(sources, u_layer, u_node)],
                dtype=np.int64,
            )
        cum = self._dense_cum(tau)[sources]
        x = u_layer * cum[:, -1]
        d = np.minimum((cum <= x[:, None]).sum(axis=1), cum.shape[1] - 1)
        w = self._counts[sources] * np.exp(-tau * np.arange(cum.shape[1]))
        rows = np.arange(sources.size)
        for k in np.flatnonzero(w[rows, d] == 0):
            d[k] = np.flatnonzero(w[k, :d[k]] > 0)[-1]
        lo = self._bounds[sources, d]
        cnt = self._bounds[sources, d + 1] - lo
        idx = lo + np.minimum((u_node * cnt).astype(np.int64), cnt - 1)
        return self._order[sources, idx].astype(np.int64)


# --- records ----------------------------------------------------------------

@dataclass
class ExplorationRecord:
    """Outcome of one simulation.

    ``first_visit[v]`` is the iteration at which any agent first reached
    ``v`` (0 for start nodes, -1 if never). ``epsilon[t-1]`` counts nodes
    first reached at iteration ``t``; start nodes are not included.
    """

    first_visit: np.ndarray
    epsilon: np.ndarray
    jump_events: np.ndarray
    num_iterations: int
    seed: int | None = None

    @property
    def initial_discovered(self) -> int:
        return int((self.first_visit == 0).sum())

    @property
    def epsilon_total(self) -> np.ndarray:
        """Cumulative newly explored nodes, indexed by ``t - 1``."""
        return np.cumsum(self.epsilon)

    def to_dict(self) -> dict:
        return {
            "num_iterations": self.num_iterations,
            "seed": self.seed,
            "first_visit": self.first_visit.tolist(),
            "epsilon": self.epsilon.tolist(),
            "jump_events": self.jump_events.tolist(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExplorationRecord":
        return cls(
            first_visit=np.asarray(d["first_visit"], dtype=np.int32),
            epsilon=np.asarray(d["epsilon"], dtype=np.int64),
            jump_events=np.asarray(d["jump_events"], dtype=np.int64),
            num_iterations=int(d["num_iterations"]),
            seed=d.get("seed"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


# --- simulation -------------------------------------------------------------

def _tsaw_moves(g: Graph, visits, positions, agents, u, alpha):
    """Vectorised TSAW step for the given agents; returns their new nodes."""
    if agents.size == 1:
        # same arithmetic as the general path, without the segment bookkeeping
        p = positions[agents[0]]
        nbrs = g.indices[g.indptr[p]:g.indptr[p + 1]]
        f = visits[agents[0], nbrs]
        ref = f.min() if alpha >= 1 else f.max()
        cw = (alpha ** -(f - ref).astype(np.float64)).cumsum()
        pick = min(int(np.searchsorted(cw, u[0] * cw[-1], side="right")), nbrs.size - 1)
        return nbrs[pick:pick + 1]
    p = positions[agents]
    starts = g.indptr[p]
    cnt = g.degree[p]
    seg = np.cumsum(cnt) - cnt
    flat = np.repeat(starts - seg, cnt) + np.arange(int(cnt.sum()))
    nbrs = g.indices[flat]
    f = visits[np.repeat(agents, cnt), nbrs]
    ref = np.minimum.reduceat(f, seg) if alpha >= 1 else np.maximum.reduceat(f, seg)
    w = alpha ** -(f - np.repeat(ref, cnt)).astype(np.float64)
    cw = np.cumsum(w)
    before = cw[seg] - w[seg]
    target = before + u * (cw[seg + cnt - 1] - before)
    pick = np.searchsorted(cw, target, side="right")
    pick = np.clip(pick, seg, seg + cnt - 1)
    return nbrs[pick]


def _pick_sources(weights, jumpers, u, exclude_self):
    """For each jumper choose another agent with probability proportional to ``weights``.

    Returns -1 where every eligible weight is zero.
    """
    c = np.cumsum(weights)
    total = c[-1]
    own = weights[jumpers] if exclude_self else np.zeros(jumpers.size)
    avail = total - own
    x = u * avail
    if exclude_self:
        # skip over the jumper's own slice of the cumulative weights
        x = x + own * (x >= c[jumpers] - own)
    src = np.minimum(np.searchsorted(c, x, side="right"), weights.size - 1)
    src = np.where(avail > 0, src, -1)
    # rounding at the top end can land on a zero-weight agent or the jumper
    for k in np.flatnonzero((src >= 0) & ((weights[np.maximum(src, 0)] == 0) | (exclude_self & (src == jumpers)))):
        ok = (weights > 0).nonzero()[0]
        if exclude_self:
            ok = ok[ok != jumpers[k]]
        src[k] = ok[-1] if ok.size else -1
    return src


def simulate(
    g: Graph,
    params: DynamicsParams,
    jump_sampler: str = "shells",
    shells: DistanceShells | None = None,
) -> ExplorationRecord:
    """Run the multi-agent dynamics for ``params.iterations`` iterations.

    All agents act on the positions at the start of the iteration; the
    outcome depends only on ``(g, params, jump_sampler)``.

    ``jump_sampler="shells"`` samples jumps as a mixture: pick a source
    agent with probability proportional to ``eta_a * Z(pos_a)``, then a node
    around it by BFS layer. ``"field"`` builds the full field every iteration
    and samples it with :func:`jump_destination`; it is slow and kept as a
    cross-check.
    """
    if jump_sampler not in JUMP_SAMPLERS:
        raise DynamicsError(f"unknown jump sampler {jump_sampler!r}")
    if g.n == 0:
        raise DynamicsError("cannot simulate on an empty graph")
    rng = np.random.default_rng(params.seed)
    pop = init_agents(g, params, rng)
    if shells is None:
        shells = DistanceShells(g)
    n, a, T = g.n, params.num_agents, params.iterations
    pos, visits, eta = pop.positions, pop.visits, pop.eta

    first_visit = np.full(n, -1, dtype=np.int32)
    first_visit[pos] = 0
    discovered = first_visit == 0
    epsilon = np.zeros(T, dtype=np.int64)
    jumps = np.zeros(T, dtype=np.int64)
    has_nbrs = g.degree > 0

    for t in range(1, T + 1):
        # columns: jump decision, walk/source choice, layer choice, node choice
        r = rng.random((a, 4))
        jump = r[:, 0] < params.gamma
        jumpers = jump.nonzero()[0]
        moved = jump | has_nbrs[pos]
        new = pos.copy()

        walk = (moved & ~jump).nonzero()[0]
        if walk.size:
            new[walk] = _tsaw_moves(g, visits, pos, walk, r[walk, 1], params.alpha)

        if jumpers.size:
            if jump_sampler == "shells":
                w = eta * shells.kernel_mass(pos, params.tau)
                src = _pick_sources(w, jumpers, r[jumpers, 1], params.exclude_self)
                dest = np.minimum((r[jumpers, 2] * n).astype(np.int64), n - 1)
                ok = src >= 0
                dest[ok] = shells.sample_many(pos[src[ok]], params.tau, r[jumpers[ok], 2], r[jumpers[ok], 3])
                new[jumpers] = dest
            else:
                shared = None
                if not params.exclude_self:
                    shared = compute_field(g, pos, eta, params.tau, distances=shells.distances)
                for j in jumpers.tolist():
                    fld = shared
                    if fld is None:
                        fld = compute_field(g, pos, eta, params.tau, exclude=j, distances=shells.distances)
                    new[j] = _draw(fld, r[j, 1])

        mv = moved.nonzero()[0]
        dest = new[mv]
        visits[mv, dest] += 1
        pos = new
        cand = dest[~discovered[dest]]
        if cand.size:
            fresh = np.unique(cand)
            discovered[fresh] = True
            first_visit[fresh] = t
            epsilon[t - 1] = fresh.size
        jumps[t - 1] = jumpers.size

    return ExplorationRecord(first_visit, epsilon, jumps, T, seed=params.seed)

