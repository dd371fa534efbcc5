"""Command-line front end: generate traces, build graph models, run the
group/approach detectors, apply relational operators, and render reports."""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from . import approach as approach_mod
from . import groups as groups_mod
from .build import build_models
from .errors import ConfigError, DataIntegrityError, TracegraphError
from .graphio import IdfReader, read_sgf_bgf, read_sgv_bgf
from .report import approach_report, group_report
from .rpp import (
    ArrableRelation,
    SMatchCondition,
    cct,
    cct_join,
    cjoin,
    direction,
    load_relation,
    r2a,
    records_to_relation,
    relation_to_obj,
    save_relation,
    smatch,
)
from .synth import generate, load_scenario
from .trace import parse_rdf


def _parse_p(value: str) -> int | str:
    if value in (groups_mod.P_MAX, groups_mod.P_STAR):
        return value
    try:
        return int(value)
    except ValueError as exc:
        raise ConfigError(f"p must be an integer, '*' or 'max', got {value!r}") from exc


def _load_graph_dir(graphs_dir: Path, model: str):
    idf_path = graphs_dir / "trace.idf"
    if not idf_path.exists():
        raise DataIntegrityError(f"{idf_path} not found; run build-graphs first")
    if model == "sgf":
        path = graphs_dir / "sgf.bgf"
        if not path.exists():
            raise DataIntegrityError(f"{path} not found")
        return read_sgf_bgf(path), idf_path
    if model == "sgv":
        path = graphs_dir / "sgv.bgf"
        if not path.exists():
            raise DataIntegrityError(f"{path} not found")
        return read_sgv_bgf(path), idf_path
    paths = sorted(graphs_dir.glob("mgv_*.bgf"), key=lambda p: int(p.stem.split("_")[1]))
    if not paths:
        raise DataIntegrityError(f"no mgv_*.bgf files in {graphs_dir}")
    parsed = [read_sgv_bgf(p) for p in paths]
    chars, meta, _ = parsed[0]
    return (chars, meta, [g for _, _, g in parsed]), idf_path


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


@click.group()
@click.option(
    "--config",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="JSON file with per-subcommand flag defaults.",
)
@click.pass_context
def cli(ctx: click.Context, config: str | None):
    """Graph models and situation detection over tracked-object traces."""
    if config:
        with open(config, "r", encoding="utf-8") as fh:
            ctx.default_map = json.load(fh)


@cli.command("gen-trace")
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", required=True, type=int)
@click.option("--out-dir", type=click.Path(file_okay=False), default=".")
@click.option("--rdf", "rdf_path", type=click.Path(dir_okay=False), default=None)
@click.option("--ground-truth", "gt_path", type=click.Path(dir_okay=False), default=None)
def gen_trace(spec_path, seed, out_dir, rdf_path, gt_path):
    """Generate an RDF trace plus ground truth from a scenario JSON."""
    scenario = load_scenario(spec_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rdf = Path(rdf_path) if rdf_path else out / f"{scenario.video_id}.rdf"
    gt = Path(gt_path) if gt_path else out / f"{scenario.video_id}.gt.json"
    generate(scenario, seed, rdf, gt)
    click.echo(f"wrote {rdf} and {gt}")


@cli.command("build-graphs")
@click.option("--rdf", "rdf_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--model", type=click.Choice(["sgf", "sgv", "mgv", "all"]), default="all")
@click.option("--edge-type", default=None)
@click.option("--th-track", type=int, default=None)
@click.option("--balance-by", type=click.Choice(["node", "frame"]), default="frame")
@click.option("--min-graph-size", type=int, default=None)
@click.option("--max-graph", type=int, default=None)
def build_graphs(rdf_path, out_dir, model, edge_type, th_track, balance_by, min_graph_size, max_graph):
    """Build BGF graph files and the frame-indexed IDF from a trace."""
    if model in ("mgv", "all") and min_graph_size is None and max_graph is None:
        max_graph = 1
    result = build_models(
        rdf_path,
        out_dir,
        model=model,
        edge_type=edge_type,
        th_track=th_track,
        balance_by=balance_by,
        min_graph_size=min_graph_size,
        max_graph=max_graph,
    )
    for path in result.bgf_paths + [result.idf_path]:
        click.echo(f"wrote {path}")


def _graphs_from_options(graphs_dir, rdf_path, out_dir, balance_by, min_graph_size, max_graph):
    """Detect commands accept prebuilt graphs or an RDF to build them from."""
    if graphs_dir is not None:
        return Path(graphs_dir)
    if rdf_path is None:
        raise ConfigError("pass --graphs DIR or --rdf FILE")
    built = Path(out_dir) / "graphs"
    if max_graph is None and min_graph_size is None:
        max_graph = 1
    build_models(
        rdf_path, built, model="all", balance_by=balance_by,
        min_graph_size=min_graph_size, max_graph=max_graph,
    )
    return built


@cli.command("detect-groups")
@click.option("--graphs", "graphs_dir", default=None, type=click.Path(exists=True, file_okay=False))
@click.option("--rdf", "rdf_path", default=None, type=click.Path(exists=True, dir_okay=False),
              help="build graph models on the fly instead of --graphs")
@click.option("--balance-by", type=click.Choice(["node", "frame"]), default="frame")
@click.option("--min-graph-size", type=int, default=None)
@click.option("--max-graph", type=int, default=None)
@click.option("--model", type=click.Choice(["sgf", "sgv", "mgv"]), required=True)
@click.option(
    "--algorithm",
    type=click.Choice(["gc", "ho", "vt", "baseline"]),
    required=True,
    help="gc/ho run on SGF, vt on SGV or MGV, baseline on SGF or SGV.",
)
@click.option("--s", "size_s", type=int, default=1)
@click.option("--p", "size_p", default="max", help="integer, '*' or 'max'")
@click.option("--cl", default=None, help="restrict to one class label")
@click.option("--heuristic", type=click.Choice(["CS", "JD", "CQ"]), default="CS")
@click.option("--th-jd", type=float, default=None)
@click.option("--th-cq", type=float, default=None)
@click.option("--alpha", type=float, default=1.0, help="frame-drop budget factor of fps")
@click.option("--baseline", "baseline_kind", type=click.Choice(["sgf", "sgv-vt"]), default=None)
@click.option("--jobs", type=int, default=None, help="parallel MGV analyses (default: cores)")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def detect_groups(
    graphs_dir, rdf_path, balance_by, min_graph_size, max_graph,
    model, algorithm, size_s, size_p, cl, heuristic,
    th_jd, th_cq, alpha, baseline_kind, jobs, out_dir,
):
    """Find groups of the queried size and report F1 against a baseline."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    graphs_dir = _graphs_from_options(
        graphs_dir, rdf_path, out, balance_by, min_graph_size, max_graph
    )
    query = groups_mod.SizeQuery(s=size_s, p=_parse_p(size_p))
    per_graph_stats = None

    loaded, idf_path = _load_graph_dir(graphs_dir, model)
    if model == "sgf":
        chars, meta, sgf_graphs = loaded
        with IdfReader(idf_path) as idf:
            if algorithm == "gc":
                cfg = groups_mod.HeuristicConfig(
                    heuristic=heuristic, th_jd=th_jd, th_cq=th_cq, alpha=alpha
                )
                detection = groups_mod.gc_heuristic(
                    sgf_graphs, idf, chars.fps, query, cfg, cl=cl
                )
            elif algorithm == "ho":
                detection = groups_mod.histogram_of_objects(
                    sgf_graphs, idf, meta.max_objs, query, cl=cl
                )
            elif algorithm == "baseline":
                detection = groups_mod.gc_heuristic(
                    sgf_graphs, idf, chars.fps, query, cl=cl, generate_baseline=True
                )
            else:
                raise ConfigError("vertex traversal needs --model sgv or mgv")
    elif model == "sgv":
        chars, meta, graph = loaded
        with IdfReader(idf_path) as idf:
            if algorithm == "vt":
                detection = groups_mod.vertex_traversal(graph, idf, query, cl=cl)
            elif algorithm == "baseline":
                detection = groups_mod.vertex_traversal(
                    graph, idf, query, cl=cl, generate_baseline=True
                )
            else:
                raise ConfigError(f"--algorithm {algorithm} runs on --model sgf")
    else:
        if algorithm != "vt":
            raise ConfigError("MGV supports --algorithm vt")
        chars, meta, mgv_graphs = loaded
        jobs = jobs or os.cpu_count() or 1
        composed, results = groups_mod.run_vt_mgv(
            mgv_graphs, idf_path, query, cl=cl, jobs=jobs
        )
        stats = groups_mod.GroupStats()
        for r in results:
            stats.frames_seen += r.stats.frames_seen
            stats.cluster_calls += r.stats.cluster_calls
            stats.kmeans_invocations += r.stats.kmeans_invocations
            stats.io_seconds += r.stats.io_seconds
            stats.traversal_seconds += r.stats.traversal_seconds
            stats.compute_seconds += r.stats.compute_seconds
            stats.elapsed_seconds = max(stats.elapsed_seconds, r.stats.elapsed_seconds)
        detection = groups_mod.GroupDetection(clusters=composed, stats=stats)
        per_graph_stats = [r.stats.to_obj() for r in results]

    _write_json(out / "clusters.json", detection.clusters.to_obj())
    stats_obj = detection.stats.to_obj()
    if per_graph_stats is not None:
        stats_obj["per_graph"] = per_graph_stats
    _write_json(out / "stats.json", stats_obj)

    baseline_run = None
    if baseline_kind == "sgf":
        chars_b, meta_b, sgf_graphs = read_sgf_bgf(graphs_dir / "sgf.bgf")
        with IdfReader(idf_path) as idf:
            baseline_run = groups_mod.gc_heuristic(
                sgf_graphs, idf, chars_b.fps, query, cl=cl, generate_baseline=True
            )
    elif baseline_kind == "sgv-vt":
        _, _, sgv_graph = read_sgv_bgf(graphs_dir / "sgv.bgf")
        with IdfReader(idf_path) as idf:
            baseline_run = groups_mod.vertex_traversal(
                sgv_graph, idf, query, cl=cl, generate_baseline=True
            )
    if baseline_run is not None:
        summary = group_report(
            out, f"{model}-{algorithm}", detection,
            f"baseline-{baseline_kind}", baseline_run,
        )
        click.echo(f"f1 {summary['f1']:.6f}")
    else:
        group_report(out, f"{model}-{algorithm}", detection)
    click.echo(f"wrote {out / 'clusters.json'}")


@cli.command("detect-approach")
@click.option("--graphs", "graphs_dir", default=None, type=click.Path(exists=True, file_okay=False))
@click.option("--rdf", "rdf_path", default=None, type=click.Path(exists=True, dir_okay=False),
              help="build graph models on the fly instead of --graphs")
@click.option("--balance-by", type=click.Choice(["node", "frame"]), default="frame")
@click.option("--min-graph-size", type=int, default=None)
@click.option("--max-graph", type=int, default=None)
@click.option("--model", type=click.Choice(["sgf", "sgv", "mgv"]), required=True)
@click.option(
    "--direction", "direction_",
    type=click.Choice(["moving-closer", "far-apart"]),
    default="moving-closer",
)
@click.option("--epsilon", type=float, default=5.0, help="perturbation filter, pixels")
@click.option(
    "--k-mode",
    type=click.Choice(["half-fps", "fps", "adaptive-half", "adaptive-full", "fixed"]),
    default="adaptive-half",
)
@click.option("--k", type=int, default=None, help="frame skip for --k-mode fixed")
@click.option("--cl", default=None)
@click.option("--jobs", type=int, default=None)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def detect_approach(graphs_dir, rdf_path, balance_by, min_graph_size, max_graph,
                    model, direction_, epsilon, k_mode, k, cl, jobs, out_dir):
    """Find all pairs moving monotonically closer or farther apart."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    graphs_dir = _graphs_from_options(
        graphs_dir, rdf_path, out, balance_by, min_graph_size, max_graph
    )
    cfg = approach_mod.ApproachConfig(
        direction=direction_.replace("-", "_"),
        epsilon=epsilon,
        k_mode=k_mode.replace("-", "_"),
        k=k,
    )
    loaded, idf_path = _load_graph_dir(graphs_dir, model)
    if model == "sgf":
        chars, meta, sgf_graphs = loaded
        detection = approach_mod.detect_sgf(sgf_graphs, meta, chars, cfg, cl=cl)
        output, per_graph, used_k = detection.output, [detection], detection.k
    elif model == "sgv":
        chars, meta, graph = loaded
        with IdfReader(idf_path) as idf:
            detection = approach_mod.detect_sgv(graph, idf, meta, chars, cfg, cl=cl)
        output, per_graph, used_k = detection.output, [detection], detection.k
    else:
        chars, meta, mgv_graphs = loaded
        jobs = jobs or os.cpu_count() or 1
        output, results = approach_mod.run_approach_mgv(
            mgv_graphs, idf_path, meta, chars, cfg, cl=cl, jobs=jobs
        )
        per_graph, used_k = results, results[0].k if results else 1
    _write_json(out / "approach.json", output.to_obj())
    approach_report(out, output, per_graph, used_k)
    click.echo(f"instances {output.count_instances()} (k={used_k})")
    click.echo(f"wrote {out / 'approach.json'}")


@cli.group()
def rpp():
    """Order-preserving relational operators over extracted contents."""


@rpp.command("from-rdf")
@click.option("--rdf", "rdf_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def rpp_from_rdf(rdf_path, out_path):
    """Bridge an RDF trace into a relation JSON document."""
    _, _, records = parse_rdf(rdf_path)
    save_relation(records_to_relation(records), out_path)
    click.echo(f"wrote {out_path}")


@rpp.command("r2a")
@click.option("--input", "in_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--gba", required=True, help="group-by attribute")
@click.option("--aoa", required=True, help="assumed-order attribute")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def rpp_r2a(in_path, gba, aoa, out_path):
    """Group a relation and order the remaining columns into sequences."""
    rel = load_relation(in_path)
    if isinstance(rel, ArrableRelation):
        raise ConfigError("input is already grouped")
    save_relation(r2a(rel, gba, aoa), out_path)
    click.echo(f"wrote {out_path}")


@rpp.command("cct")
@click.option("--input", "in_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--cct", "option", type=click.Choice(["first", "last", "both"]), default="first")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def rpp_cct(in_path, option, out_path):
    """Compress consecutive tuples to first/last/both elements."""
    rel = load_relation(in_path)
    if not isinstance(rel, ArrableRelation):
        raise ConfigError("cct needs a grouped (arrable) relation")
    save_relation(cct(rel, option), out_path)
    click.echo(f"wrote {out_path}")


def _join_inputs(left_path, right_path, column, metric, th, op):
    left = load_relation(left_path)
    right = load_relation(right_path)
    if not isinstance(left, ArrableRelation) or not isinstance(right, ArrableRelation):
        raise ConfigError("joins need grouped (arrable) relations on both sides")
    condition = SMatchCondition(
        left_column=column, right_column=column, threshold=th, metric=metric, op=op
    )
    return left, right, condition


@rpp.command("cjoin")
@click.option("--left", "left_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--right", "right_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--column", default="fv", help="sequence column compared on both sides")
@click.option("--metric", type=click.Choice(["cosine", "euclidean"]), default="cosine")
@click.option("--th", type=float, required=True)
@click.option("--op", type=click.Choice(["<", "<=", ">", ">=", "=="]), default="<=")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def rpp_cjoin(left_path, right_path, column, metric, th, op, out_path):
    """Consecutive join: first matching element pair per group pair."""
    left, right, condition = _join_inputs(left_path, right_path, column, metric, th, op)
    result = cjoin(left, right, condition)
    obj = relation_to_obj(result.relation)
    obj["comparisons"] = result.comparisons
    _write_json(Path(out_path), obj)
    click.echo(f"matches {len(result.relation.rows)} comparisons {result.comparisons}")


@rpp.command("cct-join")
@click.option("--left", "left_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--right", "right_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--column", default="fv")
@click.option("--cct", "option", type=click.Choice(["first", "last", "both"]), default="both")
@click.option("--metric", type=click.Choice(["cosine", "euclidean"]), default="cosine")
@click.option("--th", type=float, required=True)
@click.option("--op", type=click.Choice(["<", "<=", ">", ">=", "=="]), default="<=")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def rpp_cct_join(left_path, right_path, column, option, metric, th, op, out_path):
    """Compress both sides with CCT, then join exhaustively."""
    left, right, condition = _join_inputs(left_path, right_path, column, metric, th, op)
    result = cct_join(left, right, condition, option)
    obj = relation_to_obj(result.relation)
    obj["comparisons"] = result.comparisons
    _write_json(Path(out_path), obj)
    click.echo(f"matches {len(result.relation.rows)} comparisons {result.comparisons}")


@rpp.command("direction")
@click.option("--input", "in_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--column", default="bb", help="bounding-box sequence column")
@click.option("--i", "idx_i", type=int, default=None)
@click.option("--j", "idx_j", type=int, default=None)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def rpp_direction(in_path, column, idx_i, idx_j, out_path):
    """Compass direction of each group's displacement."""
    rel = load_relation(in_path)
    if not isinstance(rel, ArrableRelation):
        raise ConfigError("direction needs a grouped (arrable) relation")
    gi = rel.column_index(rel.gba)
    ci = rel.column_index(column)
    out_obj = [
        {"group": row[gi], "direction": direction(row[ci], idx_i, idx_j)}
        for row in rel.rows
    ]
    _write_json(Path(out_path), out_obj)
    click.echo(f"wrote {out_path}")


@rpp.command("smatch")
@click.option("--a", "vec_a", required=True, help="comma-separated floats")
@click.option("--b", "vec_b", required=True, help="comma-separated floats")
@click.option("--metric", type=click.Choice(["cosine", "euclidean"]), default="cosine")
def rpp_smatch(vec_a, vec_b, metric):
    """Similarity distance between two vectors."""
    a = [float(x) for x in vec_a.split(",")]
    b = [float(x) for x in vec_b.split(",")]
    click.echo(repr(smatch(a, b, metric)))


@cli.command("report")
@click.option("--candidate", "candidate_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--baseline", "baseline_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def report_cmd(candidate_dir, baseline_dir, out_dir):
    """Compare two detect-groups runs: F1, K-means counts, timing figures."""

    def load_run(run_dir: Path) -> groups_mod.GroupDetection:
        clusters = groups_mod.ClusterOutput.from_obj(
            json.loads((run_dir / "clusters.json").read_text("utf-8"))
        )
        raw = json.loads((run_dir / "stats.json").read_text("utf-8"))
        raw.pop("per_graph", None)
        stats = groups_mod.GroupStats(**raw)
        return groups_mod.GroupDetection(clusters=clusters, stats=stats)

    candidate = load_run(Path(candidate_dir))
    baseline = load_run(Path(baseline_dir))
    summary = group_report(out_dir, "candidate", candidate, "baseline", baseline)
    click.echo(f"f1 {summary['f1']:.6f}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="tracegraph", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        sys.stderr.write(f"error[usage]: {exc.format_message()}\n")
        if exc.ctx is not None:
            sys.stderr.write(exc.ctx.get_usage() + "\n")
        return 1
    except click.ClickException as exc:
        sys.stderr.write(f"error[usage]: {exc.format_message()}\n")
        return 1
    except click.Abort:
        sys.stderr.write("error[abort]: interrupted\n")
        return 1
    except TracegraphError as exc:
        sys.stderr.write(f"error[{exc.code}]: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"error[io]: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
