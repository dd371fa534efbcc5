from __future__ import annotations

import json

import pytest

from tracegraph.cli import main

from conftest import FIXTURES


def run(*argv) -> int:
    return main(list(argv))


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """gen-trace + build-graphs once for the whole module."""
    root = tmp_path_factory.mktemp("cli")
    spec = FIXTURES / "stable_group.json"
    assert run("gen-trace", "--spec", str(spec), "--seed", "7",
               "--out-dir", str(root)) == 0
    rdf = root / "SG1.rdf"
    graphs = root / "graphs"
    assert run("build-graphs", "--rdf", str(rdf), "--out", str(graphs),
               "--max-graph", "2") == 0
    return root, rdf, graphs


class TestGenTrace:
    def test_deterministic_across_runs(self, tmp_path):
        spec = FIXTURES / "stable_group.json"
        for sub in ("a", "b"):
            assert run("gen-trace", "--spec", str(spec), "--seed", "7",
                       "--out-dir", str(tmp_path / sub)) == 0
        assert (tmp_path / "a" / "SG1.rdf").read_bytes() == (
            tmp_path / "b" / "SG1.rdf"
        ).read_bytes()
        assert (tmp_path / "a" / "SG1.gt.json").read_bytes() == (
            tmp_path / "b" / "SG1.gt.json"
        ).read_bytes()

    def test_missing_spec_is_io_or_usage_error(self, tmp_path, capsys):
        code = run("gen-trace", "--spec", str(tmp_path / "nope.json"), "--seed", "1")
        assert code == 1  # click validates the path up front
        assert "error" in capsys.readouterr().err


class TestErrors:
    def test_unknown_flag_exits_1_with_usage(self, capsys):
        assert run("gen-trace", "--frobnicate") == 1
        err = capsys.readouterr().err
        assert "error[usage]" in err
        assert "Usage" in err

    def test_unknown_subcommand(self, capsys):
        assert run("definitely-not-a-command") == 1

    def test_validation_error_exit_code(self, pipeline, tmp_path, capsys):
        _, _, graphs = pipeline
        code = run("detect-groups", "--graphs", str(graphs), "--model", "mgv",
                   "--algorithm", "ho", "--out", str(tmp_path / "x"))
        assert code == 1
        assert "error[config]" in capsys.readouterr().err

    def test_io_error_exit_code(self, tmp_path, capsys):
        spec = FIXTURES / "stable_group.json"
        blocker = tmp_path / "blocked"
        blocker.write_text("not a directory")
        code = run("gen-trace", "--spec", str(spec), "--seed", "1",
                   "--out-dir", str(tmp_path),
                   "--rdf", str(blocker / "trace.rdf"))  # parent is a file
        assert code == 2
        assert "error[io]" in capsys.readouterr().err


class TestDetectGroups:
    def test_vt_mgv_from_rdf_with_max_graph(self, pipeline, tmp_path):
        _, rdf, _ = pipeline
        out = tmp_path / "mg8"
        assert run(
            "detect-groups", "--rdf", str(rdf), "--max-graph", "8",
            "--model", "mgv", "--algorithm", "vt", "--p", "max",
            "--baseline", "sgv-vt", "--out", str(out),
        ) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["f1"] == 1.0

    def test_vt_mgv_with_baseline_report(self, pipeline, tmp_path):
        _, _, graphs = pipeline
        out = tmp_path / "vt"
        assert run(
            "detect-groups", "--graphs", str(graphs), "--model", "mgv",
            "--algorithm", "vt", "--p", "max", "--baseline", "sgv-vt",
            "--out", str(out),
        ) == 0
        clusters = json.loads((out / "clusters.json").read_text())
        assert clusters and clusters[0]["size"] == 4
        report = json.loads((out / "report.json").read_text())
        assert report["f1"] == 1.0
        for name in ("report.txt", "report.csv", "kmeans_invocations.png", "timings.png"):
            assert (out / name).exists()

    def test_gc_cs_against_sgf_baseline(self, pipeline, tmp_path):
        _, _, graphs = pipeline
        out = tmp_path / "gc"
        assert run(
            "detect-groups", "--graphs", str(graphs), "--model", "sgf",
            "--algorithm", "gc", "--heuristic", "CS", "--alpha", "1.0",
            "--p", "max", "--baseline", "sgf", "--out", str(out),
        ) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["f1"] == 1.0
        stats = json.loads((out / "stats.json").read_text())
        assert stats["kmeans_invocations"] >= 1

    def test_report_command_compares_two_runs(self, pipeline, tmp_path):
        _, _, graphs = pipeline
        cand = tmp_path / "cand"
        base = tmp_path / "base"
        assert run("detect-groups", "--graphs", str(graphs), "--model", "sgf",
                   "--algorithm", "ho", "--p", "max", "--out", str(cand)) == 0
        assert run("detect-groups", "--graphs", str(graphs), "--model", "sgf",
                   "--algorithm", "baseline", "--p", "max", "--out", str(base)) == 0
        out = tmp_path / "cmp"
        assert run("report", "--candidate", str(cand), "--baseline", str(base),
                   "--out", str(out)) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["f1"] == 1.0


class TestDetectApproach:
    def test_sgv_run_writes_artifacts(self, pipeline, tmp_path):
        _, _, graphs = pipeline
        out = tmp_path / "ap"
        assert run(
            "detect-approach", "--graphs", str(graphs), "--model", "sgv",
            "--direction", "moving-closer", "--epsilon", "5",
            "--k-mode", "adaptive-half", "--out", str(out),
        ) == 0
        payload = json.loads((out / "approach.json").read_text())
        assert "pairs" in payload
        assert (out / "timing_breakdown.png").exists()
        assert (out / "report.csv").exists()


class TestRpp:
    def test_bridge_group_join_pipeline(self, pipeline, tmp_path):
        root, rdf, _ = pipeline
        rel = tmp_path / "rel.json"
        arel = tmp_path / "arel.json"
        assert run("rpp", "from-rdf", "--rdf", str(rdf), "--out", str(rel)) == 0
        assert run("rpp", "r2a", "--input", str(rel), "--gba", "oid",
                   "--aoa", "fid", "--out", str(arel)) == 0
        joined = tmp_path / "join.json"
        assert run("rpp", "cjoin", "--left", str(arel), "--right", str(arel),
                   "--column", "fv", "--metric", "cosine", "--th", "0.01",
                   "--out", str(joined)) == 0
        payload = json.loads(joined.read_text())
        pairs = {(r[0], r[1]) for r in payload["rows"]}
        assert all(a == b for a, b in pairs)  # only self-similar objects match
        assert payload["comparisons"] > 0

    def test_cct_and_direction(self, pipeline, tmp_path):
        root, rdf, _ = pipeline
        rel = tmp_path / "rel.json"
        arel = tmp_path / "arel.json"
        run("rpp", "from-rdf", "--rdf", str(rdf), "--out", str(rel))
        run("rpp", "r2a", "--input", str(rel), "--gba", "oid", "--aoa", "fid",
            "--out", str(arel))
        compressed = tmp_path / "cct.json"
        assert run("rpp", "cct", "--input", str(arel), "--cct", "both",
                   "--out", str(compressed)) == 0
        payload = json.loads(compressed.read_text())
        fv_idx = [c["name"] for c in payload["schema"]].index("fv")
        assert all(len(row[fv_idx]) <= 2 for row in payload["rows"])
        directions = tmp_path / "dir.json"
        assert run("rpp", "direction", "--input", str(arel), "--column", "bb",
                   "--out", str(directions)) == 0
        rows = json.loads(directions.read_text())
        # the whole scene drifts right and slightly down in image coordinates
        assert {r["direction"] for r in rows} <= {"E", "SE", "S", "NE", "NW", "W", "SW", "N"}

    def test_smatch_prints_value(self, capsys):
        assert run("rpp", "smatch", "--a", "0,0", "--b", "3,4",
                   "--metric", "euclidean") == 0
        assert capsys.readouterr().out.strip() == repr(5 / 6)


class TestConfigFile:
    def test_config_supplies_defaults(self, tmp_path):
        spec = FIXTURES / "stable_group.json"
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "gen-trace": {"seed": 7, "out_dir": str(tmp_path / "out")}
        }))
        assert run("--config", str(cfg), "gen-trace", "--spec", str(spec)) == 0
        assert (tmp_path / "out" / "SG1.rdf").exists()
