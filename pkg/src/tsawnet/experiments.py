"""Monte-Carlo sweeps over dynamics parameters.

A sweep expands a parameter grid, runs independent realizations per grid
point (optionally on a process pool), and reduces them to the pointwise mean
and population standard deviation of the cumulative discovery curve, plus
optional per-region exploration at a cut-off iteration.

Realization seeds come from :func:`realization_seed`, which depends on the
base seed, the canonical grid-point key and the realization index only, so
results are independent of grid ordering and worker count.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
import yaml

from .dynamics import JUMP_SAMPLERS, DistanceShells, DynamicsError, DynamicsParams, simulate
from .generators import GeneratorError, GeneratorSpec, generate
from .graph import Graph, load_graph
from .metrics import (
    RegionPartition,
    accessibility,
    chebyshev_center_distance,
    lattice_side,
    make_regions,
    region_exploration,
)

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1

#: Parameters that may appear as grid axes, in output column order.
GRID_AXES = ("gamma", "tau", "d_eta", "eta_common", "eta_influential", "num_agents", "alpha")
REQUIRED_AXES = ("gamma", "tau", "d_eta")
REGION_KINDS = ("off", "lattice-chebyshev", "accessibility")

GLOBAL_COLUMNS = ["gamma", "tau", "d_eta", "t", "mean_epsilon_T", "std_epsilon_T"]
REGION_COLUMNS = [
    "gamma", "tau", "d_eta", "bin_index", "bin_mean_value", "mean_count", "std_count", "mean_fraction",
]


class ConfigError(ValueError):
    """Malformed sweep configuration; the message names the offending key."""


class SweepError(RuntimeError):
    """A grid point failed; carries the point's parameters in the message."""


# --- seeding ----------------------------------------------------------------

def splitmix64(x: int) -> int:
    """SplitMix64 finaliser: a bijective 64-bit mixing function."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def point_key(params: dict[str, Any]) -> str:
    """Canonical text key of a grid point (sorted ``name=value`` pairs)."""
    return ";".join(f"{k}={params[k]!r}" for k in sorted(params))


def key_hash(key: str) -> int:
    return int.from_bytes(hashlib.blake2b(key.encode(), digest_size=8).digest(), "little")


def realization_seed(base_seed: int, key: str, realization: int) -> int:
    """``mix(mix(mix(base) ^ hash(key)) ^ realization)`` with ``mix`` = SplitMix64."""
    h = splitmix64(base_seed & MASK64)
    h = splitmix64(h ^ key_hash(key))
    return splitmix64(h ^ (realization & MASK64))


# --- configuration ----------------------------------------------------------

@dataclass
class RegionSpec:
    kind: str = "off"
    h: int = 3
    bins: int = 10
    t_cut: int = 1000


@dataclass
class SweepConfig:
    network: GeneratorSpec | str
    grid: dict[str, list]
    realizations: int = 300
    iterations: int = 1000
    fixed: dict[str, Any] = field(default_factory=dict)
    regions: RegionSpec = field(default_factory=RegionSpec)
    base_seed: int = 0
    regenerate_network: bool = False
    lcc: bool = False
    jump_sampler: str = "shells"
    output: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for ax, vals in self.grid.items():
            if ax not in GRID_AXES:
                raise ConfigError(f"grid.{ax}: unknown axis (allowed: {', '.join(GRID_AXES)})")
            if not isinstance(vals, list) or not vals:
                raise ConfigError(f"grid.{ax}: expected a non-empty list")
        for k in self.fixed:
            if k not in GRID_AXES:
                raise ConfigError(f"dynamics.{k}: unknown parameter")
            if k in self.grid:
                raise ConfigError(f"dynamics.{k}: also given as a grid axis")
        for ax in REQUIRED_AXES:
            if ax not in self.grid:
                self.grid[ax] = [self.fixed.pop(ax, getattr(DynamicsParams, ax))]
        # 0 and 0.0 must name the same grid point (and seed)
        cast = lambda ax, v: int(v) if ax == "num_agents" else float(v)
        try:
            self.grid = {ax: sorted({cast(ax, v) for v in vals}) for ax, vals in self.grid.items()}
            self.fixed = {k: cast(k, v) for k, v in self.fixed.items()}
        except (TypeError, ValueError):
            raise ConfigError("grid/dynamics: values must be numbers") from None
        if self.jump_sampler not in JUMP_SAMPLERS:
            raise ConfigError(f"jump_sampler: expected one of {', '.join(JUMP_SAMPLERS)}")
        if not isinstance(self.realizations, int) or self.realizations < 1:
            raise ConfigError(f"realizations: must be an integer >= 1, got {self.realizations!r}")
        if not isinstance(self.iterations, int) or self.iterations < 1:
            raise ConfigError(f"iterations: must be an integer >= 1, got {self.iterations!r}")
        if self.regions.kind not in REGION_KINDS:
            raise ConfigError(f"regions.kind: expected one of {', '.join(REGION_KINDS)}")
        if self.regions.kind != "off" and not 0 <= self.regions.t_cut <= self.iterations:
            raise ConfigError(f"regions.t_cut: must lie in [0, iterations={self.iterations}]")
        if self.regenerate_network and not isinstance(self.network, GeneratorSpec):
            raise ConfigError("regenerate_network: only valid for model networks")
        # validate every grid point up front
        for p in self.points():
            try:
                self.dynamics_params(p, 0)
            except DynamicsError as e:
                raise ConfigError(f"grid: {e}") from None

    @property
    def varied_axes(self) -> list[str]:
        return [ax for ax in GRID_AXES if ax in self.grid]

    def points(self) -> list[dict[str, Any]]:
        """Grid points in canonical (sorted-axis, sorted-value) order."""
        axes = self.varied_axes
        values = [sorted(self.grid[ax]) for ax in axes]
        return [dict(zip(axes, combo)) for combo in itertools.product(*values)]

    def full_params(self, point: dict[str, Any]) -> dict[str, Any]:
        d = {ax: getattr(DynamicsParams, ax) for ax in GRID_AXES}
        d.update(self.fixed)
        d.update(point)
        return d

    def dynamics_params(self, point: dict[str, Any], seed: int) -> DynamicsParams:
        d = self.full_params(point)
        return DynamicsParams(
            alpha=float(d["alpha"]), gamma=float(d["gamma"]), tau=float(d["tau"]),
            eta_common=float(d["eta_common"]), eta_influential=float(d["eta_influential"]),
            d_eta=float(d["d_eta"]), num_agents=int(d["num_agents"]),
            iterations=self.iterations, seed=seed,
        )

    def to_dict(self) -> dict[str, Any]:
        net = self.network.to_dict() if isinstance(self.network, GeneratorSpec) else {"edge_list": self.network}
        return {
            "network": net,
            "lcc": self.lcc,
            "grid": {k: sorted(v) for k, v in sorted(self.grid.items())},
            "dynamics": dict(sorted(self.fixed.items())),
            "realizations": self.realizations,
            "iterations": self.iterations,
            "regions": vars(self.regions),
            "base_seed": self.base_seed,
            "regenerate_network": self.regenerate_network,
            "jump_sampler": self.jump_sampler,
        }

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


_TOP_KEYS = {
    "network", "grid", "dynamics", "realizations", "iterations", "regions",
    "base_seed", "regenerate_network", "jump_sampler", "output",
}


def config_from_dict(raw: dict[str, Any], base_dir: str = ".") -> SweepConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected a mapping")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"{sorted(unknown)[0]}: unknown key")
    if "network" not in raw:
        raise ConfigError("network: missing")
    net = raw["network"]
    if not isinstance(net, dict):
        raise ConfigError("network: expected a mapping")
    net = dict(net)
    lcc = bool(net.pop("lcc", False))
    if "edge_list" in net:
        if set(net) != {"edge_list"}:
            raise ConfigError(f"network.{sorted(set(net) - {'edge_list'})[0]}: not allowed with edge_list")
        path = str(net["edge_list"])
        network: GeneratorSpec | str = path if os.path.isabs(path) else os.path.join(base_dir, path)
    else:
        if "model" not in net:
            raise ConfigError("network.model: missing (or give network.edge_list)")
        model = net.pop("model")
        seed = net.pop("seed", 0)
        try:
            network = GeneratorSpec(str(model), net, int(seed))
        except GeneratorError as e:
            raise ConfigError(f"network: {e}") from None

    grid = raw.get("grid", {})
    if not isinstance(grid, dict):
        raise ConfigError("grid: expected a mapping of axis -> list")
    grid = {k: (v if isinstance(v, list) else [v]) for k, v in grid.items()}
    fixed = raw.get("dynamics", {}) or {}
    if not isinstance(fixed, dict):
        raise ConfigError("dynamics: expected a mapping")
    reg = raw.get("regions", {}) or {}
    if isinstance(reg, str):
        reg = {"kind": reg}
    if not isinstance(reg, dict):
        raise ConfigError("regions: expected a mapping")
    bad = set(reg) - {"kind", "h", "bins", "t_cut"}
    if bad:
        raise ConfigError(f"regions.{sorted(bad)[0]}: unknown key")
    iterations = raw.get("iterations", 1000)
    regions = RegionSpec(
        kind=str(reg.get("kind", "off")), h=int(reg.get("h", 3)), bins=int(reg.get("bins", 10)),
        t_cut=int(reg.get("t_cut", min(1000, iterations) if isinstance(iterations, int) else 1000)),
    )
    return SweepConfig(
        network=network,
        grid=grid,
        realizations=raw.get("realizations", 300),
        iterations=iterations,
        fixed=dict(fixed),
        regions=regions,
        base_seed=int(raw.get("base_seed", 0)),
        regenerate_network=bool(raw.get("regenerate_network", False)),
        lcc=lcc,
        jump_sampler=str(raw.get("jump_sampler", "shells")),
        output=dict(raw.get("output", {}) or {}),
    )


def load_config(path: str | os.PathLike) -> SweepConfig:
    """Read a YAML sweep configuration."""
    with open(path, encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as e:
            raise ConfigError(f"{path}: not valid YAML ({e})") from None
    return config_from_dict(raw or {}, base_dir=os.path.dirname(os.path.abspath(path)))


# --- results ----------------------------------------------------------------

@dataclass
class PointResult:
    params: dict[str, Any]
    seeds: list[int]
    mean: np.ndarray
    std: np.ndarray
    region_mean_count: np.ndarray | None = None
    region_std_count: np.ndarray | None = None
    region_mean_fraction: np.ndarray | None = None


@dataclass
class SweepResult:
    points: list[PointResult]
    axes: list[str]
    iterations: int
    region_stat: np.ndarray | None = None
    region_sizes: np.ndarray | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        pts = []
        for p in self.points:
            d = {
                "params": p.params,
                "seeds": p.seeds,
                "mean_epsilon_T": p.mean.tolist(),
                "std_epsilon_T": p.std.tolist(),
            }
            if p.region_mean_count is not None:
                d["regions"] = {
                    "mean_count": p.region_mean_count.tolist(),
                    "std_count": p.region_std_count.tolist(),
                    "mean_fraction": p.region_mean_fraction.tolist(),
                }
            pts.append(d)
        out = {"metadata": self.metadata, "axes": self.axes, "iterations": self.iterations, "points": pts}
        if self.region_stat is not None:
            out["region_bins"] = {"mean_value": self.region_stat.tolist(), "size": self.region_sizes.tolist()}
        return out

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SweepResult":
        pts = []
        for p in d.get("points", []):
            r = p.get("regions")
            pts.append(PointResult(
                params=p["params"], seeds=p.get("seeds", []),
                mean=np.asarray(p["mean_epsilon_T"], dtype=np.float64),
                std=np.asarray(p["std_epsilon_T"], dtype=np.float64),
                region_mean_count=None if r is None else np.asarray(r["mean_count"], dtype=np.float64),
                region_std_count=None if r is None else np.asarray(r["std_count"], dtype=np.float64),
                region_mean_fraction=None if r is None else np.asarray(r["mean_fraction"], dtype=np.float64),
            ))
        rb = d.get("region_bins")
        return cls(
            points=pts, axes=list(d.get("axes", REQUIRED_AXES)), iterations=int(d.get("iterations", 0)),
            region_stat=None if rb is None else np.asarray(rb["mean_value"], dtype=np.float64),
            region_sizes=None if rb is None else np.asarray(rb["size"], dtype=np.int64),
            metadata=d.get("metadata", {}),
        )


def aggregate(records) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise mean and population std of the cumulative discovery curves.

    Accepts :class:`ExplorationRecord` objects or already-cumulative arrays.
    """
    series = [r.epsilon_total if hasattr(r, "epsilon_total") else np.asarray(r) for r in records]
    if not series:
        raise ValueError("aggregate needs at least one record")
    if len({s.shape for s in series}) != 1:
        raise ValueError("records differ in length")
    arr = np.stack(series).astype(np.float64)
    return arr.mean(axis=0), arr.std(axis=0)


# --- running ----------------------------------------------------------------

def build_network(config: SweepConfig, seed: int | None = None) -> Graph:
    if isinstance(config.network, GeneratorSpec):
        spec = config.network if seed is None else config.network.with_seed(seed)
        g = generate(spec)
        if config.lcc:
            from .graph import largest_component
            g, _ = largest_component(g)
        return g
    return load_graph(config.network, lcc=config.lcc)


def build_regions(config: SweepConfig, g: Graph) -> RegionPartition | None:
    spec = config.regions
    if spec.kind == "off":
        return None
    if spec.kind == "lattice-chebyshev":
        values = chebyshev_center_distance(lattice_side(g.n))
    else:
        values = accessibility(g, spec.h)
    return make_regions(values, min(spec.bins, g.n))


class _Context:
    """Per-process shared state: graph, BFS layers and regions."""

    def __init__(self, config: SweepConfig):
        self.config = config
        self.graph: Graph | None = None
        self.shells: DistanceShells | None = None
        self.regions: RegionPartition | None = None
        if not config.regenerate_network:
            self._set_graph(build_network(config))

    def _set_graph(self, g: Graph):
        self.graph = g
        self.shells = DistanceShells(g)
        self.regions = build_regions(self.config, g)

    def run(self, point: dict[str, Any], seed: int):
        cfg = self.config
        if cfg.regenerate_network:
            self._set_graph(build_network(cfg, seed=splitmix64(seed ^ 0x6E6574)))
        rec = simulate(self.graph, cfg.dynamics_params(point, seed), cfg.jump_sampler, self.shells)
        regions = None
        if self.regions is not None:
            counts, _ = region_exploration(rec, self.regions, cfg.regions.t_cut)
            regions = (counts, self.regions.sizes, self.regions.bin_stat)
        return rec.epsilon_total, regions


_WORKER: _Context | None = None


def _init_worker(config: SweepConfig):
    global _WORKER
    _WORKER = _Context(config)


def _run_task(task):
    point, seed = task
    return _WORKER.run(point, seed)


def run_sweep(
    config: SweepConfig,
    threads: int | None = None,
    progress: Callable[[int, int], None] | None = None,
) -> SweepResult:
    """Run every realization of every grid point and aggregate.

    ``threads`` is the number of worker processes (default: CPU count);
    results do not depend on it.
    """
    t0 = time.perf_counter()
    threads = threads or os.cpu_count() or 1
    points = config.points()
    tasks = []
    for p in points:
        key = point_key(config.full_params(p))
        tasks += [(p, realization_seed(config.base_seed, key, r)) for r in range(config.realizations)]

    try:
        ctx = _Context(config)
    except (GeneratorError, OSError, ValueError) as e:
        raise SweepError(f"network construction failed: {e}") from e
    results: list = []
    if threads <= 1 or len(tasks) <= 1:
        for i, task in enumerate(tasks):
            try:
                results.append(ctx.run(*task))
            except Exception as e:
                raise SweepError(f"grid point {task[0]} (seed {task[1]}) failed: {e}") from e
            if progress:
                progress(i + 1, len(tasks))
    else:
        import multiprocessing as mp

        mpctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else None
        with ProcessPoolExecutor(threads, mp_context=mpctx, initializer=_init_worker, initargs=(config,)) as pool:
            chunk = max(1, len(tasks) // (threads * 8))
            try:
                for i, res in enumerate(pool.map(_run_task, tasks, chunksize=chunk)):
                    results.append(res)
                    if progress:
                        progress(i + 1, len(tasks))
            except Exception as e:
                failed = tasks[len(results)]
                raise SweepError(f"grid point {failed[0]} (seed {failed[1]}) failed: {e}") from e

    out = []
    R = config.realizations
    for k, p in enumerate(points):
        chunk = results[k * R:(k + 1) * R]
        mean, std = aggregate([c[0] for c in chunk])
        pr = PointResult(params=p, seeds=[s for _, s in tasks[k * R:(k + 1) * R]], mean=mean, std=std)
        if config.regions.kind != "off":
            counts = np.stack([c[1][0] for c in chunk]).astype(np.float64)
            sizes = np.stack([c[1][1] for c in chunk]).astype(np.float64)
            pr.region_mean_count = counts.mean(axis=0)
            pr.region_std_count = counts.std(axis=0)
            pr.region_mean_fraction = (counts / sizes).mean(axis=0)
        out.append(pr)

    g = ctx.graph
    meta = {
        "config_hash": config.digest(),
        "config": config.to_dict(),
        "base_seed": config.base_seed,
        "seed_mixing": "splitmix64(splitmix64(splitmix64(base) ^ blake2b64(point_key)) ^ realization)",
        "std": "population",
        "num_agents": sorted({int(config.full_params(p)["num_agents"]) for p in points}),
        "regenerate_network": config.regenerate_network,
        "network_nodes": None if g is None else g.n,
        "network_edges": None if g is None else g.num_edges,
        "wall_time_s": time.perf_counter() - t0,
    }
    region_stat = region_sizes = None
    if config.regions.kind != "off":
        if config.regenerate_network:
            # bins are re-derived on every regenerated network; report averages
            region_stat = np.stack([c[1][2] for c in results]).mean(axis=0)
            region_sizes = np.rint(np.stack([c[1][1] for c in results]).mean(axis=0)).astype(np.int64)
        else:
            region_stat, region_sizes = ctx.regions.bin_stat, ctx.regions.sizes
    return SweepResult(
        points=out,
        axes=config.varied_axes,
        iterations=config.iterations,
        region_stat=region_stat,
        region_sizes=region_sizes,
        metadata=meta,
    )


# --- export -----------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _leading(result: SweepResult) -> list[str]:
    return list(REQUIRED_AXES) + [a for a in result.axes if a not in REQUIRED_AXES]


def global_rows(result: SweepResult):
    lead = _leading(result)
    yield lead + GLOBAL_COLUMNS[3:]
    for p in result.points:
        head = [_fmt(p.params.get(a)) for a in lead]
        for t, (m, s) in enumerate(zip(p.mean.tolist(), p.std.tolist()), start=1):
            yield head + [str(t), _fmt(m), _fmt(s)]


def region_rows(result: SweepResult):
    lead = _leading(result)
    yield lead + REGION_COLUMNS[3:]
    if result.region_stat is None:
        return
    for p in result.points:
        head = [_fmt(p.params.get(a)) for a in lead]
        for b in range(result.region_stat.size):
            yield head + [
                str(b), _fmt(result.region_stat[b]), _fmt(p.region_mean_count[b]),
                _fmt(p.region_std_count[b]), _fmt(p.region_mean_fraction[b]),
            ]


def _write_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for r in rows:
            w.writerow(r)


def regions_path(path: str | os.PathLike) -> str:
    root, ext = os.path.splitext(os.fspath(path))
    return f"{root}_regions{ext or '.csv'}"


def export_results(result: SweepResult, fmt: str, path: str | os.PathLike) -> list[str]:
    """Write ``result`` as ``csv`` (long form, plus ``*_regions.csv``) or ``json``.

    Returns the paths written. I/O errors are re-raised with the path.
    """
    written = []
    try:
        if fmt == "csv":
            _write_csv(path, global_rows(result))
            written.append(os.fspath(path))
            if result.region_stat is not None:
                rp = regions_path(path)
                _write_csv(rp, region_rows(result))
                written.append(rp)
        elif fmt == "json":
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(result.to_dict(), fh, indent=1)
            written.append(os.fspath(path))
        else:
            raise ValueError(f"unknown format {fmt!r} (csv or json)")
    except OSError as e:
        raise OSError(f"cannot write {path}: {e.strerror or e}") from e
    return written


def load_result(path: str | os.PathLike) -> SweepResult:
    with open(path, encoding="utf-8") as fh:
        return SweepResult.from_dict(json.load(fh))
