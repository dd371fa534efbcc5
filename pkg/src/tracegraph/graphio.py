"""Base graph file (BGF) and frame-indexed data file (IDF) formats.

BGF files are UTF-8 text. The header repeats the trace's video
characteristics and meta as ``#key<TAB>value`` lines, followed by per-graph
characteristic keys. Body lines are tab-separated:

* SGF: a ``g <fid> <nodes> <edges>`` line per frame, then ``v <oid> <cl:clc>``
  and ``u <a> <b> <distance>`` lines for that frame.
* SGV/MGV: ``v <oid> <cl:clc>... <fid:n>...`` lines (class labels first,
  then the frame list in stored order) and
  ``u <a> <b> <min,f...> <max,f...>`` lines.

The IDF holds one line per non-empty frame: the frame id, a tab, then
``;``-separated object entries whose fields mirror the RDF data columns
(oid .. ts). Its header carries a ``fid:offset`` index; offsets are byte
positions relative to the first data byte, enabling random access.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace
from typing import Iterable, Iterator

from .errors import DataIntegrityError, ParseError
from .graphs import (
    GraphCharacteristics,
    SgfGraph,
    SgvEdge,
    SgvGraph,
    SgvNode,
)
from .trace import (
    DetectionRecord,
    TraceMeta,
    VideoCharacteristics,
    _HeaderAccumulator,
    _chars_lines,
    _format_int_list,
    _meta_lines,
    format_float,
    record_to_row,
    row_to_record,
)

_GRAPH_KEYS = (
    "graph_id",
    "graph_frames",
    "components",
    "largest_component",
    "smallest_component",
    "singleton_components",
    "max_component_frames",
    "min_component_frames",
    "max_degree",
    "min_degree",
    "avg_degree",
    "graph_max_objs",
    "graph_max_obj_frames",
    "graph_min_objs",
    "graph_min_obj_frames",
)


def _trace_header(chars: VideoCharacteristics, meta: TraceMeta) -> list[str]:
    plain = replace(chars, extra_header=(), comments=())
    return _chars_lines(plain) + _meta_lines(meta)


def _graph_header(graph: SgvGraph) -> list[str]:
    ch = graph.characteristics
    if ch is None:
        raise DataIntegrityError("graph written before finalize()")
    return [
        f"#graph_id\t{graph.graph_id}",
        f"#graph_frames\t{graph.frame_count}",
        f"#components\t{ch.components}",
        f"#largest_component\t{ch.largest_component}",
        f"#smallest_component\t{ch.smallest_component}",
        f"#singleton_components\t{ch.singleton_components}",
        f"#max_component_frames\t{ch.max_component_frames}",
        f"#min_component_frames\t{ch.min_component_frames}",
        f"#max_degree\t{ch.max_degree}",
        f"#min_degree\t{ch.min_degree}",
        f"#avg_degree\t{format_float(ch.avg_degree)}",
        f"#graph_max_objs\t{graph.max_objs()}",
        f"#graph_max_obj_frames\t{_format_int_list(graph.max_obj_frames())}",
        f"#graph_min_objs\t{graph.min_objs()}",
        f"#graph_min_obj_frames\t{_format_int_list(graph.min_obj_frames())}",
    ]


# ---------------------------------------------------------------------------
# SGF BGF
# ---------------------------------------------------------------------------

def sgf_body_lines(graph: SgfGraph) -> list[str]:
    lines = [f"g\t{graph.fid}\t{len(graph.nodes)}\t{len(graph.edges)}"]
    for oid in sorted(graph.nodes):
        cl, clc = graph.nodes[oid]
        lines.append(f"v\t{oid}\t{cl}:{format_float(clc)}")
    for (a, b) in sorted(graph.edges):
        lines.append(f"u\t{a}\t{b}\t{format_float(graph.edges[(a, b)])}")
    return lines


def write_sgf_bgf(
    path, chars: VideoCharacteristics, meta: TraceMeta, graphs: Iterable[SgfGraph]
) -> None:
    lines = _trace_header(chars, meta)
    for graph in graphs:
        lines.extend(sgf_body_lines(graph))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_sgf_bgf(path) -> tuple[VideoCharacteristics, TraceMeta, list[SgfGraph]]:
    header = _HeaderAccumulator()
    graphs: list[SgfGraph] = []
    current: SgfGraph | None = None
    expected: tuple[int, int] | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            if line.startswith("#") or line.startswith("//"):
                header.feed(line)
                continue
            parts = line.split("\t")
            tag = parts[0]
            if tag == "g":
                if current is not None:
                    _check_counts(current, expected, line_number)
                    graphs.append(current)
                current = SgfGraph(fid=int(parts[1]), nodes={}, edges={})
                expected = (int(parts[2]), int(parts[3]))
            elif tag == "v":
                if current is None:
                    raise ParseError("vertex line before any 'g' line", line_number)
                cl, _, clc = parts[2].rpartition(":")
                current.nodes[int(parts[1])] = (cl, float(clc))
            elif tag == "u":
                if current is None:
                    raise ParseError("edge line before any 'g' line", line_number)
                current.edges[(int(parts[1]), int(parts[2]))] = float(parts[3])
            else:
                raise ParseError(f"unknown line tag {tag!r}", line_number)
    if current is not None:
        _check_counts(current, expected, None)
        graphs.append(current)
    chars = header.build_chars()
    meta = header.build_meta()
    if meta is None:
        raise ParseError("graph file header lacks meta lines")
    return chars, meta, graphs


def _check_counts(graph: SgfGraph, expected: tuple[int, int] | None, line_number) -> None:
    if expected is not None and (len(graph.nodes), len(graph.edges)) != expected:
        raise ParseError(
            f"graph {graph.fid} has {len(graph.nodes)} nodes/{len(graph.edges)} edges, "
            f"header says {expected[0]}/{expected[1]}",
            line_number,
        )


# ---------------------------------------------------------------------------
# SGV / MGV BGF
# ---------------------------------------------------------------------------

def sgv_node_line(node: SgvNode) -> str:
    parts = [f"v\t{node.oid}"]
    parts.extend(f"{cl}:{format_float(clc)}" for cl, clc in node.labels.items())
    parts.extend(f"{fid}:{n}" for fid, n in node.frames)
    return "\t".join(parts)


def sgv_edge_line(pair: tuple[int, int], edge: SgvEdge) -> str:
    min_label = ",".join([format_float(edge.min_dist)] + [str(f) for f in edge.min_frames])
    max_label = ",".join([format_float(edge.max_dist)] + [str(f) for f in edge.max_frames])
    return f"u\t{pair[0]}\t{pair[1]}\t{min_label}\t{max_label}"


def sgv_body_lines(graph: SgvGraph) -> list[str]:
    lines = [sgv_node_line(graph.nodes[oid]) for oid in sorted(graph.nodes)]
    lines.extend(sgv_edge_line(pair, graph.edges[pair]) for pair in sorted(graph.edges))
    return lines


def write_sgv_bgf(
    path, chars: VideoCharacteristics, meta: TraceMeta, graph: SgvGraph
) -> None:
    lines = _trace_header(chars, meta) + _graph_header(graph) + sgv_body_lines(graph)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_label_token(token: str) -> tuple[bool, str, str]:
    """Classify a 'left:right' vertex label token: frame pair or class label."""
    left, _, right = token.rpartition(":")
    if left.isdigit():
        return True, left, right
    return False, left, right


def read_sgv_bgf(path) -> tuple[VideoCharacteristics, TraceMeta, SgvGraph]:
    header = _HeaderAccumulator()
    graph_values: dict[str, str] = {}
    nodes: dict[int, SgvNode] = {}
    edges: dict[tuple[int, int], SgvEdge] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition("\t")
                if key in _GRAPH_KEYS:
                    graph_values[key] = value
                else:
                    header.feed(line)
                continue
            if line.startswith("//"):
                header.feed(line)
                continue
            parts = line.split("\t")
            if parts[0] == "v":
                oid = int(parts[1])
                labels: dict[str, float] = {}
                frames: list[tuple[int, int]] = []
                for token in parts[2:]:
                    is_frame, left, right = _parse_label_token(token)
                    if is_frame:
                        frames.append((int(left), int(right)))
                    else:
                        labels[left] = float(right)
                nodes[oid] = SgvNode(oid, labels, frames)
            elif parts[0] == "u":
                pair = (int(parts[1]), int(parts[2]))
                min_parts = parts[3].split(",")
                max_parts = parts[4].split(",")
                edges[pair] = SgvEdge(
                    min_dist=float(min_parts[0]),
                    min_frames=[int(f) for f in min_parts[1:]],
                    max_dist=float(max_parts[0]),
                    max_frames=[int(f) for f in max_parts[1:]],
                )
            else:
                raise ParseError(f"unknown line tag {parts[0]!r}", line_number)
    chars = header.build_chars()
    meta = header.build_meta()
    if meta is None:
        raise ParseError("graph file header lacks meta lines")
    frames: dict[int, int] = {}
    for node in nodes.values():
        frames.update(dict(node.frames))
    graph = SgvGraph(
        graph_id=int(graph_values.get("graph_id", "1")),
        nodes=nodes,
        edges=edges,
        frames=frames,
        characteristics=GraphCharacteristics(
            components=int(graph_values.get("components", "0")),
            largest_component=int(graph_values.get("largest_component", "0")),
            smallest_component=int(graph_values.get("smallest_component", "0")),
            singleton_components=int(graph_values.get("singleton_components", "0")),
            max_component_frames=int(graph_values.get("max_component_frames", "0")),
            min_component_frames=int(graph_values.get("min_component_frames", "0")),
            max_degree=int(graph_values.get("max_degree", "0")),
            min_degree=int(graph_values.get("min_degree", "0")),
            avg_degree=float(graph_values.get("avg_degree", "0")),
        ),
    )
    declared = graph_values.get("graph_frames")
    if declared is not None and int(declared) != graph.frame_count:
        raise DataIntegrityError(
            f"header declares {declared} frames, vertex labels cover {graph.frame_count}"
        )
    return chars, meta, graph


# ---------------------------------------------------------------------------
# IDF
# ---------------------------------------------------------------------------

def _idf_entry(record: DetectionRecord) -> str:
    row = record_to_row(record)
    return row.split("\t", 1)[1]  # drop the leading fid column


def idf_line(fid: int, records: list[DetectionRecord]) -> str:
    return f"{fid}\t" + ";".join(_idf_entry(r) for r in records)


def write_idf(path, frames: Iterable[tuple[int, list[DetectionRecord]]]) -> None:
    """Write the frame-indexed data file; the header index points at each
    frame's line as a byte offset relative to the first data byte."""
    data = io.BytesIO()
    index: list[tuple[int, int]] = []
    for fid, records in frames:
        index.append((fid, data.tell()))
        data.write((idf_line(fid, records) + "\n").encode("utf-8"))
    header = (
        "#idf_version\t1\n"
        f"#frames\t{len(index)}\n"
        "#index\t" + ",".join(f"{fid}:{off}" for fid, off in index) + "\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8"))
        fh.write(data.getvalue())


@dataclass(frozen=True, slots=True)
class IdfEntry:
    oid: int
    cl: str
    clc: float
    centroid: tuple[float, float]


class IdfReader:
    """Random access to per-frame object attributes via the header index."""

    def __init__(self, path):
        self.path = path
        self._fh = open(path, "rb")
        self.index: dict[int, int] = {}
        self._cache: dict[int, list[IdfEntry]] = {}
        data_start = 0
        while True:
            pos = self._fh.tell()
            line = self._fh.readline()
            if not line.startswith(b"#"):
                data_start = pos
                break
            key, _, value = line.decode("utf-8").rstrip("\n")[1:].partition("\t")
            if key == "index" and value:
                for token in value.split(","):
                    fid, _, off = token.partition(":")
                    self.index[int(fid)] = int(off)
        self._data_start = data_start

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "IdfReader":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __contains__(self, fid: int) -> bool:
        return fid in self.index

    def raw_line(self, fid: int) -> str:
        if fid not in self.index:
            raise DataIntegrityError(f"frame {fid} missing from IDF index")
        self._fh.seek(self._data_start + self.index[fid])
        return self._fh.readline().decode("utf-8").rstrip("\n")

    def fetch(self, fid: int) -> list[IdfEntry]:
        """Object attributes for one frame (error if the frame is unindexed)."""
        cached = self._cache.get(fid)
        if cached is not None:
            return cached
        line = self.raw_line(fid)
        head, _, body = line.partition("\t")
        if int(head) != fid:
            raise DataIntegrityError(f"index for frame {fid} points at frame {head}")
        entries = []
        for chunk in body.split(";"):
            record = row_to_record(f"{fid}\t{chunk}")
            entries.append(IdfEntry(record.oid, record.cl, record.clc, record.centroid))
        self._cache[fid] = entries
        return entries

    def fetch_records(self, fid: int) -> list[DetectionRecord]:
        """Full detection records for one frame (no caching)."""
        line = self.raw_line(fid)
        _, _, body = line.partition("\t")
        return [row_to_record(f"{fid}\t{chunk}") for chunk in body.split(";")]

    def frame_ids(self) -> list[int]:
        return sorted(self.index)


def read_idf_frames(path) -> Iterator[tuple[int, list[DetectionRecord]]]:
    """Sequential scan of an IDF file (used for round-trip checks)."""
    with IdfReader(path) as reader:
        for fid in reader.frame_ids():
            yield fid, reader.fetch_records(fid)
