"""One-pass generation of graph model files from an RDF trace.

A single scan over the frame-grouped records feeds every requested model and
the shared frame-indexed data file. SGV/MGV state is checkpointed to the
output file(s) after every th_track frames; with the default th_track (the
whole video) that is a single write at the end.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import ConfigError, UnsupportedFeatureError
from .graphio import (
    _graph_header,
    _trace_header,
    sgf_body_lines,
    sgv_body_lines,
    write_idf,
)
from .graphs import (
    EDGE_DISTANCE,
    EDGE_MIN_MAX,
    EDGE_SPATIAL,
    MgvBuilder,
    MgvSet,
    SgvBuilder,
    SgvGraph,
    build_sgf_graph,
    compute_mgv_bounds,
    frame_table,
)
from .trace import TraceMeta, VideoCharacteristics, iter_frames, parse_rdf

MODELS = ("sgf", "sgv", "mgv")


@dataclass(frozen=True, slots=True)
class BuildResult:
    chars: VideoCharacteristics
    meta: TraceMeta
    rdf_path: Path
    idf_path: Path
    sgf_path: Path | None = None
    sgv_path: Path | None = None
    mgv_paths: tuple[Path, ...] = ()
    sgv_graph: SgvGraph | None = None
    mgv_set: MgvSet | None = None

    @property
    def bgf_paths(self) -> list[Path]:
        paths = []
        if self.sgf_path:
            paths.append(self.sgf_path)
        if self.sgv_path:
            paths.append(self.sgv_path)
        paths.extend(self.mgv_paths)
        return paths


def _check_edge_type(models: Sequence[str], edge_type: str | None) -> None:
    if edge_type is None:
        return
    if edge_type == EDGE_SPATIAL:
        raise UnsupportedFeatureError(
            f"edge type {EDGE_SPATIAL!r} is accepted by the interface but not implemented"
        )
    if "sgf" in models and len(models) == 1:
        if edge_type != EDGE_DISTANCE:
            raise ConfigError(f"SGF supports edge type {EDGE_DISTANCE!r}, got {edge_type!r}")
    elif edge_type != EDGE_MIN_MAX and "sgf" not in models:
        raise ConfigError(f"SGV/MGV support edge type {EDGE_MIN_MAX!r}, got {edge_type!r}")


def build_models(
    rdf_path,
    out_dir,
    model: str = "all",
    edge_type: str | None = None,
    th_track: int | None = None,
    balance_by: str = "frame",
    min_graph_size: int | None = None,
    max_graph: int | None = None,
) -> BuildResult:
    """Build the requested model files plus the IDF in one streaming pass."""
    if model == "all":
        models: tuple[str, ...] = MODELS
    elif model in MODELS:
        models = (model,)
    else:
        raise ConfigError(f"unknown model {model!r}; expected one of {MODELS} or 'all'")
    _check_edge_type(models, edge_type)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    chars, meta, records = parse_rdf(rdf_path)
    if th_track is None:
        th_track = chars.effective_th_track()
    if th_track < 1:
        raise ConfigError(f"th_track must be >= 1, got {th_track}")

    sgf_lines: list[str] = []
    sgv_builder = SgvBuilder() if "sgv" in models else None
    mgv_builder = None
    if "mgv" in models:
        mg, mu = compute_mgv_bounds(chars, meta, balance_by, min_graph_size, max_graph)
        mgv_builder = MgvBuilder(balance_by=balance_by, max_graph=mg, mu=mu)

    sgv_checkpoints: list[str] = []
    mgv_checkpoints: dict[int, list[str]] = {}

    def flush_tracked() -> None:
        if sgv_builder is not None:
            sgv_builder.mark_flushed()
            for node in sgv_builder.graph.nodes.values():
                node.sort_frames()
            sgv_checkpoints.extend(sgv_body_lines(sgv_builder.graph))
            sgv_builder.graph.nodes.clear()
            sgv_builder.graph.edges.clear()
        if mgv_builder is not None:
            mgv_builder.mark_flushed()
            for graph in mgv_builder.state.graphs:
                for node in graph.nodes.values():
                    node.sort_frames()
                mgv_checkpoints.setdefault(graph.graph_id, []).extend(sgv_body_lines(graph))
                graph.nodes.clear()
                graph.edges.clear()

    idf_frames = []
    flush_boundary = th_track  # flush when a frame past the boundary arrives
    for fid, frame_records in iter_frames(records):
        while fid > flush_boundary:
            flush_tracked()
            flush_boundary += th_track
        idf_frames.append((fid, frame_records))
        table = frame_table(frame_records)
        if "sgf" in models:
            sgf_lines.extend(sgf_body_lines(build_sgf_graph(fid, table)))
        if sgv_builder is not None:
            sgv_builder.add_frame(fid, table)
        if mgv_builder is not None:
            mgv_builder.add_frame(fid, table)

    idf_path = out_dir / "trace.idf"
    write_idf(idf_path, idf_frames)

    base_header = _trace_header(chars, meta)
    sgf_path = sgv_path = None
    mgv_paths: list[Path] = []
    sgv_graph = None
    mgv_set = None

    if "sgf" in models:
        sgf_path = out_dir / "sgf.bgf"
        _write_lines(sgf_path, base_header + sgf_lines)
    if sgv_builder is not None:
        # finalize before flushing the tail so characteristics see everything
        sgv_graph = sgv_builder.finalize()
        body = sgv_checkpoints + sgv_body_lines(sgv_graph)
        sgv_path = out_dir / "sgv.bgf"
        _write_lines(sgv_path, base_header + _graph_header(sgv_graph) + body)
        if sgv_checkpoints:
            sgv_graph = None  # in-memory graph is partial after checkpoints
    if mgv_builder is not None:
        mgv_set = mgv_builder.finalize()
        for graph in mgv_set.graphs:
            body = mgv_checkpoints.get(graph.graph_id, []) + sgv_body_lines(graph)
            path = out_dir / f"mgv_{graph.graph_id}.bgf"
            _write_lines(path, base_header + _graph_header(graph) + body)
            mgv_paths.append(path)
        if mgv_checkpoints:
            mgv_set = None

    return BuildResult(
        chars=chars,
        meta=meta,
        rdf_path=Path(rdf_path),
        idf_path=idf_path,
        sgf_path=sgf_path,
        sgv_path=sgv_path,
        mgv_paths=tuple(mgv_paths),
        sgv_graph=sgv_graph,
        mgv_set=mgv_set,
    )


def _write_lines(path: Path, lines: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
