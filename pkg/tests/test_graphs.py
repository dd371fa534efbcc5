from __future__ import annotations

import numpy as np
import pytest

from tracegraph.build import build_models
from tracegraph.errors import DataIntegrityError, UnsupportedFeatureError
from tracegraph.graphio import (
    IdfReader,
    read_idf_frames,
    read_sgf_bgf,
    read_sgv_bgf,
    write_idf,
    write_sgf_bgf,
    write_sgv_bgf,
)
from tracegraph.graphs import (
    FrameObject,
    MgvBuilder,
    SgvGraph,
    build_sgf_graph,
    update_nodes_and_edges,
)
from tracegraph.synth import synthesize
from tracegraph.trace import write_rdf

from conftest import GOLDEN, linear_script, random_scenario, stable_group_spec
from oracles import connected_components, pair_distance_series


def obj(x, y, cl="person", clc=0.9):
    return FrameObject(centroid=(x, y), cl=cl, clc=clc)


def paper_style_frames():
    """Frames shaped like the worked example: 29 holds four objects, 31 two
    of them again, 80 two new ones."""
    return {
        29: {1: obj(100, 100, "potted plant"), 2: obj(160, 100, "potted plant"),
             4: obj(100, 180), 5: obj(160, 180)},
        31: {1: obj(102, 101, "potted plant"), 2: obj(158, 99, "potted plant")},
        80: {64: obj(700, 400), 66: obj(760, 420)},
    }


class TestSgf:
    def test_worked_example_counts(self):
        graphs = [build_sgf_graph(fid, table) for fid, table in paper_style_frames().items()]
        by_fid = {g.fid: g for g in graphs}
        assert (len(by_fid[29].nodes), len(by_fid[29].edges)) == (4, 6)
        assert (len(by_fid[31].nodes), len(by_fid[31].edges)) == (2, 1)
        assert (len(by_fid[80].nodes), len(by_fid[80].edges)) == (2, 1)

    def test_single_object_frame(self):
        g = build_sgf_graph(1, {7: obj(10, 10)})
        assert len(g.nodes) == 1 and len(g.edges) == 0

    def test_distances_are_euclidean_pixels(self):
        g = build_sgf_graph(1, {1: obj(0, 0), 2: obj(3, 4)})
        assert g.edges[(1, 2)] == 5.0


class TestUpdateNodesAndEdges:
    def test_new_pair_gets_min_max_singletons(self):
        g = SgvGraph()
        update_nodes_and_edges(g, 5, {1: obj(0, 0), 2: obj(10, 0)})
        edge = g.edges[(1, 2)]
        assert (edge.min_dist, edge.min_frames) == (10.0, [5])
        assert (edge.max_dist, edge.max_frames) == (10.0, [5])

    def test_equal_min_extends_frame_sequence(self):
        g = SgvGraph()
        update_nodes_and_edges(g, 5, {1: obj(0, 0), 2: obj(10, 0)})
        update_nodes_and_edges(g, 9, {1: obj(0, 0), 2: obj(20, 0)})
        update_nodes_and_edges(g, 12, {1: obj(0, 0), 2: obj(10, 0)})
        edge = g.edges[(1, 2)]
        assert (edge.min_dist, edge.min_frames) == (10.0, [5, 12])
        assert (edge.max_dist, edge.max_frames) == (20.0, [9])

    def test_new_max_resets_frames(self):
        g = SgvGraph()
        update_nodes_and_edges(g, 5, {1: obj(0, 0), 2: obj(10, 0)})
        update_nodes_and_edges(g, 9, {1: obj(0, 0), 2: obj(20, 0)})
        update_nodes_and_edges(g, 12, {1: obj(0, 0), 2: obj(25, 0)})
        edge = g.edges[(1, 2)]
        assert (edge.max_dist, edge.max_frames) == (25.0, [12])
        assert (edge.min_dist, edge.min_frames) == (10.0, [5])

    def test_class_confidence_takes_max_per_label(self):
        g = SgvGraph()
        update_nodes_and_edges(g, 1, {1: obj(0, 0, "person", 0.5)})
        update_nodes_and_edges(g, 2, {1: obj(0, 0, "person", 0.8)})
        update_nodes_and_edges(g, 3, {1: obj(0, 0, "car", 0.4)})
        update_nodes_and_edges(g, 4, {1: obj(0, 0, "person", 0.6)})
        assert g.nodes[1].labels == {"person": 0.8, "car": 0.4}

    def test_frame_labels_sorted_desc_count_ties_by_fid(self):
        g = SgvGraph()
        update_nodes_and_edges(g, 4, {1: obj(0, 0), 2: obj(5, 0)})
        update_nodes_and_edges(g, 2, {1: obj(0, 0), 2: obj(5, 0), 3: obj(9, 9)})
        update_nodes_and_edges(g, 1, {1: obj(0, 0), 2: obj(5, 0)})
        g.finalize([])
        assert g.nodes[1].frames == [(2, 3), (1, 2), (4, 2)]


class TestSgvModel:
    def test_worked_example_two_components(self):
        g = SgvGraph()
        comps: list = []
        from tracegraph.graphs import merge_frame_into_components

        for fid, table in paper_style_frames().items():
            update_nodes_and_edges(g, fid, table)
            comps = merge_frame_into_components(comps, set(table), fid, len(table))
        g.finalize(comps)
        assert len(g.nodes) == 6
        assert g.characteristics.components == 2
        assert g.characteristics.largest_component == 4
        assert g.characteristics.smallest_component == 2

    def test_edge_labels_match_brute_force_scan(self, tmp_trace):
        spec = random_scenario(42, frame_count=300)
        result = tmp_trace(spec, seed=42)
        chars, meta, records, _ = synthesize(spec, 42)
        _, _, graph = read_sgv_bgf(result.sgv_path)
        for (a, b), edge in graph.edges.items():
            series = pair_distance_series(records, a, b)
            lo = min(series.values())
            hi = max(series.values())
            assert edge.min_dist == lo
            assert edge.max_dist == hi
            assert edge.min_frames == sorted(f for f, d in series.items() if d == lo)
            assert edge.max_frames == sorted(f for f, d in series.items() if d == hi)

    def test_single_object_trace_matches_sgf_shape(self):
        g = SgvGraph()
        update_nodes_and_edges(g, 1, {7: obj(10, 10)})
        g.finalize([])
        assert len(g.nodes) == 1 and len(g.edges) == 0
        assert g.frames == {1: 1}

    def test_node_count_identities(self, tmp_trace):
        spec = random_scenario(7, frame_count=400)
        result = tmp_trace(spec, seed=7)
        chars, meta, sgf_graphs = read_sgf_bgf(result.sgf_path)
        _, _, sgv = read_sgv_bgf(result.sgv_path)
        assert sum(len(g.nodes) for g in sgf_graphs) == meta.oi
        assert len(sgv.nodes) == meta.uo
        for g in sgf_graphs:  # complete graph per frame
            n = len(g.nodes)
            assert len(g.edges) == n * (n - 1) // 2


class TestMgv:
    def table(self, *oids):
        return {oid: obj(10.0 * oid, 5.0 * oid) for oid in oids}

    def test_first_frame_single_component(self):
        b = MgvBuilder(balance_by="frame", max_graph=4, mu=10.0)
        b.add_frame(1, self.table(1, 2, 3))
        state = b.finalize()
        assert state.n == 1
        assert [c.nodes for c in state.components[0]] == [{1, 2, 3}]

    def test_cross_graph_shift_merges_components(self):
        b = MgvBuilder(balance_by="frame", max_graph=4, mu=0.5)
        b.add_frame(1, self.table(1, 2))   # graph 1: {1,2}
        b.add_frame(2, self.table(3, 4))   # graph 2 (graph 1 past mu)
        state = b.state
        assert state.n == 2
        b.add_frame(3, self.table(2, 3))   # bridges both graphs
        state = b.finalize()
        all_comp_nodes = [c.nodes for comps in state.components for c in comps]
        assert {1, 2, 3, 4} in all_comp_nodes
        non_empty = [g for g in state.graphs if g.nodes]
        assert len(non_empty) == 1
        assert set(non_empty[0].nodes) == {1, 2, 3, 4}

    def test_case_iii_new_graph_when_last_full(self):
        # one-frame components carry no slack, so delta stays 0 and the
        # second disjoint frame pushes fill past mu
        b = MgvBuilder(balance_by="frame", max_graph=3, mu=1.5)
        b.add_frame(1, self.table(1, 2))
        b.add_frame(2, self.table(3, 4))  # fill 1 <= mu: joins graph 1
        b.add_frame(3, self.table(5, 6))  # fill 2 > mu: new graph
        state = b.finalize()
        assert state.n == 2
        assert set(state.graphs[0].nodes) == {1, 2, 3, 4}
        assert set(state.graphs[1].nodes) == {5, 6}

    def test_overflow_allowed_at_graph_cap(self):
        b = MgvBuilder(balance_by="frame", max_graph=1, mu=1.0)
        b.add_frame(1, self.table(1, 2))
        b.add_frame(2, self.table(3, 4))
        b.add_frame(3, self.table(5, 6))
        state = b.finalize()
        assert state.n == 1  # never splits past the cap; data is never dropped
        assert len(state.graphs[0].nodes) == 6

    @pytest.mark.parametrize("balance_by", ["frame", "node"])
    @pytest.mark.parametrize("max_graph", [2, 4, 6, 8])
    def test_mgv_equals_sgv_identities(self, tmp_trace, balance_by, max_graph):
        spec = random_scenario(13, frame_count=500)
        result = tmp_trace(spec, seed=13, balance_by=balance_by, max_graph=max_graph)
        _, _, sgv = read_sgv_bgf(result.sgv_path)
        mgv_graphs = [read_sgv_bgf(p)[2] for p in result.mgv_paths]
        # node and edge multisets identical, labels included
        mgv_nodes = {}
        for g in mgv_graphs:
            for oid, node in g.nodes.items():
                assert oid not in mgv_nodes
                mgv_nodes[oid] = node
        assert set(mgv_nodes) == set(sgv.nodes)
        for oid, node in sgv.nodes.items():
            assert mgv_nodes[oid].labels == node.labels
            assert mgv_nodes[oid].frames == node.frames
        mgv_edges = {}
        for g in mgv_graphs:
            for pair, edge in g.edges.items():
                assert pair not in mgv_edges
                mgv_edges[pair] = edge
        assert set(mgv_edges) == set(sgv.edges)
        for pair, edge in sgv.edges.items():
            assert mgv_edges[pair] == edge

    @pytest.mark.parametrize("balance_by", ["frame", "node"])
    def test_no_component_spans_two_graphs(self, tmp_trace, balance_by):
        spec = random_scenario(99, frame_count=400)
        result = tmp_trace(spec, seed=99, balance_by=balance_by, max_graph=4)
        _, _, sgv = read_sgv_bgf(result.sgv_path)
        components = connected_components(set(sgv.nodes), set(sgv.edges))
        graph_nodes = [set(read_sgv_bgf(p)[2].nodes) for p in result.mgv_paths]
        for component in components:
            holders = [i for i, nodes in enumerate(graph_nodes) if component & nodes]
            assert len(holders) == 1
            assert component <= graph_nodes[holders[0]]

    def test_frame_balance_within_slack_or_flagged(self, tmp_path):
        # disjoint short episodes: oids burst for 10 frames then vanish
        scripts = []
        oid = 1
        for episode in range(30):
            start = 1 + episode * 20
            for j in range(2):
                scripts.append(
                    linear_script(
                        oid,
                        (100.0 + 30.0 * j + 5 * episode, 100.0),
                        (120.0 + 30.0 * j + 5 * episode, 120.0),
                        enter=start,
                        exit=start + 9,
                    )
                )
                oid += 1
        from tracegraph.synth import ScenarioSpec

        spec = ScenarioSpec(
            video_id="EP1", frame_count=600, fps=30, width=1280, height=720,
            objects=tuple(scripts),
        )
        chars, meta, records, _ = synthesize(spec, 3)
        rdf = tmp_path / "ep.rdf"
        write_rdf(rdf, chars, meta, records)
        result = build_models(rdf, tmp_path / "g", model="mgv",
                              balance_by="frame", max_graph=4)
        report = result.mgv_set.balance_report()
        assert len(report) > 1
        for row in report[:-1]:  # the last graph legitimately runs short
            assert row["within_range"] or row["forced_by_component"]
            assert row["fill"] >= row["mu"] - row["delta"]

    def test_unsupported_sgf_edge_type(self, tmp_path):
        spec = stable_group_spec(frame_count=10)
        chars, meta, records, _ = synthesize(spec, 1)
        rdf = tmp_path / "t.rdf"
        write_rdf(rdf, chars, meta, records)
        with pytest.raises(UnsupportedFeatureError):
            build_models(rdf, tmp_path / "g", model="sgf",
                         edge_type="bounding-box-spatial-relationship")


class TestFileFormats:
    def test_golden_sgf_bgf_round_trip(self, tmp_path):
        golden = GOLDEN / "stable_group_sgf.bgf"
        chars, meta, graphs = read_sgf_bgf(golden)
        out = tmp_path / "copy.bgf"
        write_sgf_bgf(out, chars, meta, graphs)
        assert out.read_bytes() == golden.read_bytes()

    def test_golden_sgv_bgf_round_trip(self, tmp_path):
        golden = GOLDEN / "stable_group_sgv.bgf"
        chars, meta, graph = read_sgv_bgf(golden)
        out = tmp_path / "copy.bgf"
        write_sgv_bgf(out, chars, meta, graph)
        assert out.read_bytes() == golden.read_bytes()

    def test_golden_idf_round_trip(self, tmp_path):
        golden = GOLDEN / "stable_group.idf"
        frames = list(read_idf_frames(golden))
        out = tmp_path / "copy.idf"
        write_idf(out, frames)
        assert out.read_bytes() == golden.read_bytes()

    def test_idf_random_access_100_frames(self, tmp_trace):
        spec = random_scenario(5, frame_count=500)
        result = tmp_trace(spec, seed=5)
        chars, meta, records, _ = synthesize(spec, 5)
        by_frame: dict[int, list] = {}
        for r in records:
            by_frame.setdefault(r.fid, []).append(r)
        rng = np.random.default_rng(0)
        with IdfReader(result.idf_path) as idf:
            fids = sorted(by_frame)
            for fid in rng.choice(fids, size=100, replace=True):
                fid = int(fid)
                fetched = idf.fetch_records(fid)
                assert fetched == by_frame[fid]

    def test_idf_missing_frame_is_integrity_error(self, tmp_trace):
        result = tmp_trace(stable_group_spec(frame_count=20), seed=1)
        with IdfReader(result.idf_path) as idf:
            with pytest.raises(DataIntegrityError):
                idf.fetch(999)

    def test_th_track_checkpoint_rejects_recurring_oid(self, tmp_path):
        spec = stable_group_spec(frame_count=60)
        chars, meta, records, _ = synthesize(spec, 2)
        rdf = tmp_path / "t.rdf"
        write_rdf(rdf, chars, meta, records)
        with pytest.raises(DataIntegrityError, match="recur"):
            build_models(rdf, tmp_path / "g", model="sgv", th_track=20)

    def test_th_track_checkpoint_with_disjoint_episodes(self, tmp_path):
        scripts = [
            linear_script(1, (100.0, 100.0), (120.0, 120.0), enter=1, exit=10),
            linear_script(2, (140.0, 100.0), (160.0, 120.0), enter=1, exit=10),
            linear_script(3, (300.0, 300.0), (320.0, 320.0), enter=11, exit=20),
            linear_script(4, (340.0, 300.0), (360.0, 320.0), enter=11, exit=20),
        ]
        from tracegraph.synth import ScenarioSpec

        spec = ScenarioSpec(
            video_id="CK1", frame_count=20, fps=30, width=1280, height=720,
            objects=tuple(scripts),
        )
        chars, meta, records, _ = synthesize(spec, 2)
        rdf = tmp_path / "t.rdf"
        write_rdf(rdf, chars, meta, records)
        result = build_models(rdf, tmp_path / "g", model="sgv", th_track=10)
        _, _, graph = read_sgv_bgf(result.sgv_path)
        assert set(graph.nodes) == {1, 2, 3, 4}
