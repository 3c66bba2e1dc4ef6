import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from tsawnet.cli import build_parser, main
from tsawnet.experiments import export_results, load_result, run_sweep, SweepResult
from tsawnet.generators import gen_toroidal_lattice
from tsawnet.graph import build_graph, load_graph, save_edge_list

from oracles import walk_distribution


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def _write_config(tmp_path, body):
    p = tmp_path / "c.yaml"
    p.write_text(body)
    return str(p)


MINIMAL = "network: {model: ba, n: 100, m: 2, seed: 1}\ngrid: {gamma: [0.5]}\ndynamics: {num_agents: 4}\nrealizations: 2\niterations: 10\n"


class TestGenerate:
    def test_tla_sidecar(self, tmp_path):
        out = tmp_path / "tla.txt"
        assert main(["generate", "--model", "tla", "--side", "100", "--seed", "1", "--out", str(out)]) == 0
        meta = json.loads((tmp_path / "tla.txt.meta.json").read_text())
        assert meta["nodes"] == 10000 and round(meta["mean_degree"], 2) == 4.00
        assert meta["spec"]["kind"] == "tla" and meta["seed"] == 1

    def test_la_side_2(self, tmp_path):
        out = tmp_path / "la.txt"
        assert main(["generate", "--model", "la", "--side", "2", "--out", str(out)]) == 0
        assert load_graph(out).n == 4

    def test_ba_deterministic(self, tmp_path):
        for name in ("a", "b"):
            main(["generate", "--model", "ba", "--n", "2000", "--m", "3", "--seed", "7", "--out", str(tmp_path / name)])
        assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()

    def test_wax_and_cn_flags(self, tmp_path):
        assert main(["generate", "--model", "wax", "--n", "500", "--target-degree", "5", "--out", str(tmp_path / "w")]) == 0
        assert main(["generate", "--model", "cn", "--n", "500", "--mu", "0.3", "--out", str(tmp_path / "c")]) == 0

    def test_infeasible_spec(self, tmp_path):
        assert main(["generate", "--model", "ba", "--n", "5", "--m", "10", "--out", str(tmp_path / "x")]) == 3

    def test_missing_model_usage(self, tmp_path):
        with pytest.raises(SystemExit) as e:
            main(["generate", "--out", str(tmp_path / "x")])
        assert e.value.code == 1

    def test_unwritable(self, tmp_path):
        assert main(["generate", "--model", "la", "--side", "3", "--out", str(tmp_path / "no" / "x")]) == 2


class TestSimulate:
    @pytest.fixture
    def graph(self, tmp_path):
        p = tmp_path / "g.txt"
        main(["generate", "--model", "ba", "--n", "300", "--m", "3", "--seed", "2", "--out", str(p)])
        return str(p)

    def test_gamma_zero(self, tmp_path, graph):
        out = tmp_path / "r.json"
        assert main(["simulate", "--graph", graph, "--gamma", "0", "--agents", "10", "--iterations", "30",
                     "--out", str(out)]) == 0
        rec = json.loads(out.read_text())
        assert sum(rec["jump_events"]) == 0 and len(rec["first_visit"]) == 300 and len(rec["epsilon"]) == 30

    def test_iterations_zero_rejected(self, graph):
        assert main(["simulate", "--graph", graph, "--iterations", "0"]) != 0

    def test_missing_graph_io(self, tmp_path):
        assert main(["simulate", "--graph", str(tmp_path / "none.txt")]) == 2

    def test_needs_graph_or_model(self):
        assert main(["simulate"]) == 1

    def test_golden(self, tmp_path):
        import os
        gold = json.load(open(os.path.join(os.path.dirname(__file__), "fixtures", "golden_record.json")))
        g, p = gold["graph"], gold["params"]
        out = tmp_path / "r.json"
        rc = main(["simulate", "--model", "ba", "--n", str(g["n"]), "--m", str(g["m"]), "--graph-seed", str(g["seed"]),
                   "--agents", str(p["num_agents"]), "--iterations", str(p["iterations"]), "--gamma", str(p["gamma"]),
                   "--tau", str(p["tau"]), "--d-eta", str(p["d_eta"]), "--seed", str(p["seed"]), "--out", str(out)])
        assert rc == 0
        rec = json.loads(out.read_text())
        rec.pop("params")
        assert rec == gold["record"]

    def test_stdout_clean(self, graph, capsys):
        assert main(["simulate", "--graph", graph, "--iterations", "5", "--agents", "2", "-v"]) == 0
        json.loads(capsys.readouterr().out)


class TestSweep:
    def test_minimal(self, tmp_path):
        cfg = _write_config(tmp_path, MINIMAL)
        out = tmp_path / "s.csv"
        assert main(["sweep", cfg, "--csv", str(out), "--threads", "1"]) == 0
        rows = _rows(out)
        assert rows[0][:3] == ["gamma", "tau", "d_eta"] and len(rows) == 11

    def test_malformed_names_key(self, tmp_path, capsys):
        cfg = _write_config(tmp_path, MINIMAL + "speed: 3\n")
        assert main(["sweep", cfg]) == 1
        assert "speed" in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        assert main(["sweep", str(tmp_path / "none.yaml")]) == 2

    def test_default_output_next_to_config(self, tmp_path):
        cfg = _write_config(tmp_path, MINIMAL)
        assert main(["sweep", cfg, "--threads", "1"]) == 0
        assert (tmp_path / "c.csv").exists()


class TestAccessibility:
    def test_tla_constant(self, tmp_path):
        g = tmp_path / "t.txt"
        save_edge_list(gen_toroidal_lattice(6), g)
        out = tmp_path / "a.csv"
        assert main(["accessibility", "--graph", str(g), "--out", str(out)]) == 0
        vals = [float(r[1]) for r in _rows(out)[1:]]
        assert len(vals) == 36 and max(vals) - min(vals) < 1e-9

    def test_star_h1(self, tmp_path):
        g = tmp_path / "s.txt"
        save_edge_list(build_graph(6, [(0, i) for i in range(1, 6)]), g)
        out = tmp_path / "a.csv"
        main(["accessibility", "--graph", str(g), "--h", "1", "--out", str(out)])
        assert float(_rows(out)[1][1]) == pytest.approx(5)

    def test_enumeration_20_nodes(self, tmp_path):
        rng = np.random.default_rng(1)
        edges = [(i, (i + 1) % 20) for i in range(20)] + [tuple(rng.choice(20, 2, replace=False)) for _ in range(15)]
        graph = build_graph(20, edges)
        p = tmp_path / "g.txt"
        save_edge_list(graph, p)
        out = tmp_path / "a.csv"
        main(["accessibility", "--graph", str(p), "--out", str(out)])
        vals = [float(r[1]) for r in _rows(out)[1:]]
        for v in range(20):
            d = np.array(list(walk_distribution(graph.adjacency, v, 3).values()))
            assert vals[v] == pytest.approx(np.exp(-(d * np.log(d)).sum()), abs=1e-12)


class TestRegions:
    def test_chebyshev(self, tmp_path):
        g = tmp_path / "la.txt"
        main(["generate", "--model", "la", "--side", "10", "--out", str(g)])
        out = tmp_path / "r.csv"
        assert main(["regions", "--graph", str(g), "--measure", "chebyshev", "--bins", "5", "--out", str(out)]) == 0
        rows = _rows(out)
        assert rows[0] == ["bin_index", "mean_value", "size"]
        assert [int(r[2]) for r in rows[1:]] == [20] * 5

    def test_accessibility_two_bins(self, tmp_path):
        g = tmp_path / "p.txt"
        save_edge_list(build_graph(4, [(0, 1), (1, 2), (2, 3)]), g)
        out = tmp_path / "r.csv"
        main(["regions", "--graph", str(g), "--bins", "2", "--h", "1", "--out", str(out)])
        rows = _rows(out)
        assert [r[2] for r in rows[1:]] == ["2", "2"]

    def test_non_square_chebyshev(self, tmp_path):
        g = tmp_path / "p.txt"
        save_edge_list(build_graph(3, [(0, 1), (1, 2)]), g)
        assert main(["regions", "--graph", str(g), "--measure", "chebyshev"]) == 3


class TestReport:
    def test_tables_match_sweep(self, tmp_path):
        cfg = _write_config(tmp_path, MINIMAL + "regions: {kind: accessibility, bins: 3, t_cut: 5}\n")
        js = tmp_path / "r.json"
        assert main(["sweep", cfg, "--json", str(js), "--csv", str(tmp_path / "s.csv"), "--threads", "1"]) == 0
        assert main(["report", str(js), "--out-dir", str(tmp_path / "rep")]) == 0
        assert _rows(tmp_path / "rep" / "global_curves.csv") == _rows(tmp_path / "s.csv")
        assert _rows(tmp_path / "rep" / "region_curves.csv") == _rows(tmp_path / "s_regions.csv")

    def test_empty_result(self, tmp_path):
        js = tmp_path / "e.json"
        export_results(SweepResult(points=[], axes=["gamma", "tau", "d_eta"], iterations=0), "json", js)
        assert main(["report", str(js), "--out-dir", str(tmp_path / "rep")]) == 0
        assert _rows(tmp_path / "rep" / "global_curves.csv") == [
            ["gamma", "tau", "d_eta", "t", "mean_epsilon_T", "std_epsilon_T"]]
        assert _rows(tmp_path / "rep" / "region_curves.csv") == [
            ["gamma", "tau", "d_eta", "bin_index", "bin_mean_value", "mean_count", "std_count", "mean_fraction"]]


class TestParser:
    def test_help_lists_every_flag(self):
        parser = build_parser()
        sub = next(a for a in parser._actions if a.choices and "generate" in a.choices)
        for name, p in sub.choices.items():
            text = p.format_help()
            for action in p._actions:
                for opt in action.option_strings:
                    assert opt in text, (name, opt)

    def test_unknown_flag(self):
        with pytest.raises(SystemExit) as e:
            main(["accessibility", "--graph", "x", "--frobnicate"])
        assert e.value.code == 1

    def test_no_subcommand(self):
        with pytest.raises(SystemExit) as e:
            main([])
        assert e.value.code == 1

    def test_module_entry(self):
        r = subprocess.run([sys.executable, "-m", "tsawnet", "--help"], capture_output=True, text=True)
        assert r.returncode == 0 and "sweep" in r.stdout
