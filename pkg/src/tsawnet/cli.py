"""Command-line entry point.

Exit codes: 0 success, 1 usage/config error, 2 I/O error, 3 infeasible or
numerically invalid parameters.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import os
import sys

from . import __version__
from .dynamics import JUMP_SAMPLERS, DistanceShells, DynamicsError, DynamicsParams, simulate
from .experiments import (
    ConfigError,
    SweepError,
    export_results,
    global_rows,
    load_config,
    load_result,
    region_rows,
    run_sweep,
)
from .generators import MODELS, GeneratorError, GeneratorSpec, generate
from .graph import GraphError, load_graph, save_edge_list
from .metrics import (
    MetricsError,
    accessibility,
    chebyshev_center_distance,
    lattice_side,
    make_regions,
)

log = logging.getLogger("tsawnet")

EXIT_USAGE, EXIT_IO, EXIT_INFEASIBLE = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# generator flag -> (parameter name, type)
_GEN_FLAGS = {
    "side": int, "n": int, "m": int, "k_ring": int, "p_rewire": float,
    "alpha_wax": float, "beta": float, "L_scale": float, "target_degree": float,
    "n_communities": int, "mu": float, "gamma_deg": float, "k_min": float, "k_max": int,
    "s_min": int, "s_max": int,
}


def _add_model_args(p: argparse.ArgumentParser, required: bool):
    g = p.add_argument_group("network model")
    g.add_argument("--model", choices=MODELS, required=required, help="network model")
    g.add_argument("--side", type=int, help="lattice side (la, tla)")
    g.add_argument("--n", type=int, help="node count (ws, ba, wax, cn)")
    g.add_argument("--m", type=int, help="edges per new node (ba)")
    g.add_argument("--k-ring", dest="k_ring", type=int, help="ring degree (ws)")
    g.add_argument("--p-rewire", dest="p_rewire", type=float, help="rewiring probability (ws)")
    g.add_argument("--wax-alpha", dest="alpha_wax", type=float, help="distance scale alpha (wax)")
    g.add_argument("--beta", type=float, help="link density beta (wax)")
    g.add_argument("--L-scale", dest="L_scale", type=float, help="length scale L (wax)")
    g.add_argument("--target-degree", dest="target_degree", type=float,
                   help="calibrate to this mean degree (wax, cn)")
    g.add_argument("--no-target-degree", dest="no_target", action="store_true",
                   help="use beta / k-min as given (wax, cn)")
    g.add_argument("--n-communities", dest="n_communities", type=int, help="communities (cn)")
    g.add_argument("--mu", type=float, help="mixing parameter (cn)")
    g.add_argument("--gamma-deg", dest="gamma_deg", type=float, help="degree exponent (cn)")
    g.add_argument("--k-min", dest="k_min", type=float, help="minimum degree (cn)")
    g.add_argument("--k-max", dest="k_max", type=int, help="maximum degree (cn)")
    g.add_argument("--s-min", dest="s_min", type=int, help="minimum community size (cn)")
    g.add_argument("--s-max", dest="s_max", type=int, help="maximum community size (cn)")
    g.add_argument("--graph-seed", dest="graph_seed", type=int, default=None,
                   help="generator seed (defaults to --seed)")


def _spec_from_args(args) -> GeneratorSpec:
    params = {}
    for flag in _GEN_FLAGS:
        v = getattr(args, flag, None)
        if v is not None:
            params["alpha" if flag == "alpha_wax" else flag] = v
    if getattr(args, "no_target", False):
        params["target_degree"] = None
    seed = args.graph_seed if getattr(args, "graph_seed", None) is not None else args.seed
    return GeneratorSpec(args.model, params, int(seed))


def _add_dynamics_args(p: argparse.ArgumentParser):
    d = DynamicsParams()
    g = p.add_argument_group("dynamics")
    g.add_argument("--alpha", type=float, default=d.alpha, help="TSAW base (default %(default)s)")
    g.add_argument("--gamma", type=float, default=d.gamma, help="jump probability (default %(default)s)")
    g.add_argument("--tau", type=float, default=d.tau, help="field decay (default %(default)s)")
    g.add_argument("--eta-common", type=float, default=d.eta_common, help="default %(default)s")
    g.add_argument("--eta-influential", type=float, default=d.eta_influential, help="default %(default)s")
    g.add_argument("--d-eta", type=float, default=d.d_eta, help="influential fraction (default %(default)s)")
    g.add_argument("--agents", type=int, default=d.num_agents, help="default %(default)s")
    g.add_argument("--iterations", type=int, default=d.iterations, help="default %(default)s")
    g.add_argument("--include-self", action="store_true", help="let a jumping agent feel its own field")
    g.add_argument("--jump-sampler", choices=JUMP_SAMPLERS, default="shells")


def _graph_arg(p, required=True):
    p.add_argument("--graph", required=required, help="edge-list file")
    p.add_argument("--lcc", action="store_true", help="keep only the largest connected component")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tsawnet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"tsawnet {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="progress on stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _add = sub.add_parser

    def add_parser(name, **kw):
        return _add(name, parents=[common], **kw)

    p = add_parser("generate", help="write a model network as an edge list")
    _add_model_args(p, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lcc", action="store_true", help="keep only the largest connected component")
    p.add_argument("--out", required=True, help="edge-list path; metadata goes to <out>.meta.json")

    p = add_parser("simulate", help="run one realization and write its record as JSON")
    _graph_arg(p, required=False)
    _add_model_args(p, required=False)
    _add_dynamics_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="JSON path (stdout if omitted)")

    p = add_parser("sweep", help="run a parameter sweep from a YAML config")
    p.add_argument("config")
    p.add_argument("--csv", help="long-form CSV output (overrides config output.csv)")
    p.add_argument("--json", help="JSON output (overrides config output.json)")
    p.add_argument("--threads", type=int, default=None, help="worker processes (default: all CPUs)")

    p = add_parser("accessibility", help="per-node accessibility CSV")
    _graph_arg(p)
    p.add_argument("--h", type=int, default=3)
    p.add_argument("--out", help="CSV path (stdout if omitted)")

    p = add_parser("regions", help="equal-count region table CSV")
    _graph_arg(p)
    p.add_argument("--measure", choices=("accessibility", "chebyshev"), default="accessibility")
    p.add_argument("--h", type=int, default=3)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--out", help="CSV path (stdout if omitted)")

    p = add_parser("report", help="plot-ready CSV tables from a sweep JSON")
    p.add_argument("result", help="sweep result JSON")
    p.add_argument("--out-dir", required=True)
    return parser


def _open_out(path):
    return open(path, "w", newline="", encoding="utf-8") if path else sys.stdout


def cmd_generate(args):
    spec = _spec_from_args(args)
    g = generate(spec)
    if args.lcc:
        from .graph import largest_component
        g, _ = largest_component(g)
    save_edge_list(g, args.out)
    meta = {
        "spec": spec.to_dict(),
        "seed": spec.seed,
        "lcc": args.lcc,
        "nodes": g.n,
        "edges": g.num_edges,
        "mean_degree": g.mean_degree,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    with open(args.out + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1)
    log.info("wrote %s: N=%d |E|=%d k=%.4f", args.out, g.n, g.num_edges, g.mean_degree)


def cmd_simulate(args):
    if bool(args.graph) == bool(args.model):
        raise UsageError("simulate needs exactly one of --graph or --model")
    params = DynamicsParams(
        alpha=args.alpha, gamma=args.gamma, tau=args.tau, eta_common=args.eta_common,
        eta_influential=args.eta_influential, d_eta=args.d_eta, num_agents=args.agents,
        iterations=args.iterations, seed=args.seed, exclude_self=not args.include_self,
    )
    g = load_graph(args.graph, lcc=args.lcc) if args.graph else generate(_spec_from_args(args))
    rec = simulate(g, params, args.jump_sampler, DistanceShells(g))
    out = rec.to_dict()
    out["params"] = {k: getattr(params, k) for k in params.__dataclass_fields__}
    fh = _open_out(args.out)
    try:
        json.dump(out, fh)
        fh.write("\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    log.info("epsilon_T(%d) = %d", params.iterations, int(rec.epsilon.sum()))


def cmd_sweep(args):
    cfg = load_config(args.config)
    csv_path = args.csv or cfg.output.get("csv")
    json_path = args.json or cfg.output.get("json")
    if not csv_path and not json_path:
        csv_path = os.path.splitext(args.config)[0] + ".csv"
    last = [-1]

    def progress(done, total):
        pct = 100 * done // total
        if pct != last[0] and pct % 10 == 0:
            last[0] = pct
            log.info("sweep: %d/%d realizations", done, total)

    result = run_sweep(cfg, threads=args.threads, progress=progress)
    for fmt, path in (("csv", csv_path), ("json", json_path)):
        if path:
            for w in export_results(result, fmt, path):
                log.info("wrote %s", w)


def cmd_accessibility(args):
    g = load_graph(args.graph, lcc=args.lcc)
    acc = accessibility(g, args.h)
    fh = _open_out(args.out)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "accessibility"])
        for i, v in enumerate(acc.tolist()):
            w.writerow([i, repr(v)])
    finally:
        if fh is not sys.stdout:
            fh.close()


def cmd_regions(args):
    g = load_graph(args.graph, lcc=args.lcc)
    if args.measure == "chebyshev":
        values = chebyshev_center_distance(lattice_side(g.n))
    else:
        values = accessibility(g, args.h)
    regions = make_regions(values, args.bins)
    fh = _open_out(args.out)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_index", "mean_value", "size"])
        for i, (m, s) in enumerate(zip(regions.bin_stat.tolist(), regions.sizes.tolist())):
            w.writerow([i, repr(m), s])
    finally:
        if fh is not sys.stdout:
            fh.close()


def cmd_report(args):
    result = load_result(args.result)
    os.makedirs(args.out_dir, exist_ok=True)
    for name, rows in (("global_curves.csv", global_rows(result)), ("region_curves.csv", region_rows(result))):
        path = os.path.join(args.out_dir, name)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for r in rows:
                w.writerow(r)
        log.info("wrote %s", path)


COMMANDS = {
    "generate": cmd_generate,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "accessibility": cmd_accessibility,
    "regions": cmd_regions,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        COMMANDS[args.command](args)
    except (UsageError, ConfigError) as e:
        print(f"tsawnet {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, GraphError) as e:
        print(f"tsawnet {args.command}: I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except (GeneratorError, DynamicsError, MetricsError, SweepError) as e:
        print(f"tsawnet {args.command}: error: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return 0


if __name__ == "__main__":
    sys.exit(main())
