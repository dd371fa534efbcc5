"""Graph models built from a trace in one streaming pass.

Three representations of the same extracted contents:

* SGF - one complete graph per non-empty frame, edges labeled with the
  Euclidean distance between bounding-box centroids (pixels).
* SGV - a single graph per video; one node per unique object id carrying
  class labels (max confidence per class) and a (fid, objects-in-frame)
  list sorted by descending object count; edges carry the min/max centroid
  distance with the frame sequences attaining each.
* MGV - several SGV-shaped graphs balanced by node or frame count, with the
  guarantee that no connected component spans two graphs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import ConfigError, DataIntegrityError
from .trace import DetectionRecord, TraceMeta, VideoCharacteristics

EDGE_DISTANCE = "distance"
EDGE_MIN_MAX = "min-max-distance"
EDGE_SPATIAL = "bounding-box-spatial-relationship"


@dataclass(frozen=True, slots=True)
class FrameObject:
    """Per-object view of one frame: what edge/node generation consumes."""

    centroid: tuple[float, float]
    cl: str
    clc: float


def frame_table(records: Iterable[DetectionRecord]) -> dict[int, FrameObject]:
    """The oid -> (centroid, class, confidence) dictionary for one frame."""
    return {r.oid: FrameObject(r.centroid, r.cl, r.clc) for r in records}


def _pair(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


# ---------------------------------------------------------------------------
# SGF
# ---------------------------------------------------------------------------

@dataclass(slots=True)
class SgfGraph:
    """Complete graph over one frame's objects; graph id is the frame id."""

    fid: int
    nodes: dict[int, tuple[str, float]]
    edges: dict[tuple[int, int], float]


def build_sgf_graph(fid: int, table: Mapping[int, FrameObject]) -> SgfGraph:
    oids = sorted(table)
    nodes = {oid: (table[oid].cl, table[oid].clc) for oid in oids}
    edges = {}
    for i, a in enumerate(oids):
        for b in oids[i + 1:]:
            edges[(a, b)] = math.dist(table[a].centroid, table[b].centroid)
    return SgfGraph(fid=fid, nodes=nodes, edges=edges)


# ---------------------------------------------------------------------------
# SGV / MGV structures
# ---------------------------------------------------------------------------

@dataclass(slots=True)
class SgvNode:
    oid: int
    labels: dict[str, float]          # class label -> max confidence seen
    frames: list[tuple[int, int]]     # (fid, objects in frame), desc count

    def sort_frames(self) -> None:
        self.frames.sort(key=lambda fn: (-fn[1], fn[0]))

    def frame_ids(self) -> list[int]:
        return sorted(f for f, _ in self.frames)


@dataclass(slots=True)
class SgvEdge:
    min_dist: float
    min_frames: list[int]
    max_dist: float
    max_frames: list[int]

    def observe(self, d: float, fid: int) -> None:
        if d < self.min_dist:
            self.min_dist = d
            self.min_frames = [fid]
        elif d == self.min_dist:
            self.min_frames.append(fid)
        if d > self.max_dist:
            self.max_dist = d
            self.max_frames = [fid]
        elif d == self.max_dist:
            self.max_frames.append(fid)


@dataclass(frozen=True, slots=True)
class GraphCharacteristics:
    components: int
    largest_component: int
    smallest_component: int
    singleton_components: int
    max_component_frames: int
    min_component_frames: int
    max_degree: int
    min_degree: int
    avg_degree: float


@dataclass(eq=False, slots=True)
class Component:
    """Node set of one connected component plus the frames assigned to it."""

    nodes: set[int]
    frames: dict[int, int]  # fid -> objects in that frame


@dataclass(slots=True)
class SgvGraph:
    graph_id: int = 1
    nodes: dict[int, SgvNode] = field(default_factory=dict)
    edges: dict[tuple[int, int], SgvEdge] = field(default_factory=dict)
    frames: dict[int, int] = field(default_factory=dict)  # fid -> |O_f|
    characteristics: GraphCharacteristics | None = None

    @property
    def frame_count(self) -> int:
        return len(self.frames)

    def max_objs(self) -> int:
        return max(self.frames.values(), default=0)

    def max_obj_frames(self) -> list[int]:
        m = self.max_objs()
        return sorted(f for f, n in self.frames.items() if n == m)

    def min_objs(self) -> int:
        return min(self.frames.values(), default=0)

    def min_obj_frames(self) -> list[int]:
        m = self.min_objs()
        return sorted(f for f, n in self.frames.items() if n == m)

    def degree_stats(self) -> tuple[int, int, float]:
        if not self.nodes:
            return 0, 0, 0.0
        degrees = {oid: 0 for oid in self.nodes}
        for a, b in self.edges:
            degrees[a] += 1
            degrees[b] += 1
        values = list(degrees.values())
        return max(values), min(values), sum(values) / len(values)

    def finalize(self, components: list[Component]) -> None:
        for node in self.nodes.values():
            node.sort_frames()
        max_deg, min_deg, avg_deg = self.degree_stats()
        sizes = [len(c.nodes) for c in components]
        frame_counts = [len(c.frames) for c in components]
        self.characteristics = GraphCharacteristics(
            components=len(components),
            largest_component=max(sizes, default=0),
            smallest_component=min(sizes, default=0),
            singleton_components=sum(1 for s in sizes if s == 1),
            max_component_frames=max(frame_counts, default=0),
            min_component_frames=min(frame_counts, default=0),
            max_degree=max_deg,
            min_degree=min_deg,
            avg_degree=avg_deg,
        )


def update_nodes_and_edges(
    graph: SgvGraph,
    fid: int,
    table: Mapping[int, FrameObject],
    edge_type: str = EDGE_MIN_MAX,
) -> SgvGraph:
    """Add one frame's objects to an SGV-shaped graph.

    New oids become nodes labeled <cl,clc>,<fid,n>; existing nodes gain the
    (fid, n) pair and take the max confidence per class label. Every object
    pair updates (or creates) the min/max distance edge.
    """
    if edge_type != EDGE_MIN_MAX:
        raise ConfigError(f"unknown edge type {edge_type!r} for SGV/MGV")
    n = len(table)
    for oid, obj in table.items():
        node = graph.nodes.get(oid)
        if node is None:
            graph.nodes[oid] = SgvNode(oid, {obj.cl: obj.clc}, [(fid, n)])
        else:
            node.frames.append((fid, n))
            prev = node.labels.get(obj.cl)
            node.labels[obj.cl] = obj.clc if prev is None else max(prev, obj.clc)
    oids = sorted(table)
    for i, a in enumerate(oids):
        for b in oids[i + 1:]:
            d = math.dist(table[a].centroid, table[b].centroid)
            edge = graph.edges.get((a, b))
            if edge is None:
                graph.edges[(a, b)] = SgvEdge(d, [fid], d, [fid])
            else:
                edge.observe(d, fid)
    graph.frames[fid] = n
    return graph


def _merge_components(parts: list[Component]) -> Component:
    nodes: set[int] = set()
    frames: dict[int, int] = {}
    for part in parts:
        nodes |= part.nodes
        frames.update(part.frames)
    return Component(nodes, frames)


def merge_frame_into_components(
    components: list[Component], oids: set[int], fid: int, n: int
) -> list[Component]:
    """Union the frame's clique into the component registry of one graph."""
    hits = [c for c in components if c.nodes & oids]
    rest = [c for c in components if not (c.nodes & oids)]
    merged = _merge_components(hits) if hits else Component(set(), {})
    merged.nodes |= oids
    merged.frames[fid] = n
    rest.append(merged)
    return rest


# ---------------------------------------------------------------------------
# MGV
# ---------------------------------------------------------------------------

@dataclass(slots=True)
class MgvSet:
    graphs: list[SgvGraph]
    components: list[list[Component]]  # parallel to graphs
    balance_by: str
    max_graph: int
    mu: float

    @property
    def n(self) -> int:
        return len(self.graphs)

    def delta(self, index: int) -> int:
        """Slack for one graph: its smallest multi-node (or multi-frame)
        component; 0 when only singletons exist."""
        comps = self.components[index]
        if self.balance_by == "node":
            sizes = [len(c.nodes) for c in comps if len(c.nodes) > 1]
        else:
            sizes = [len(c.frames) for c in comps if len(c.frames) > 1]
        return min(sizes, default=0)

    def node_count(self, index: int) -> int:
        """Nodes assigned to one graph, counted via the component registry so
        the value survives tracking-threshold flushes."""
        return sum(len(c.nodes) for c in self.components[index])

    def frame_fill(self, index: int) -> int:
        return sum(len(c.frames) for c in self.components[index])

    def balance_report(self) -> list[dict]:
        """Per-graph fill relative to mu +/- delta.

        A graph can legitimately exceed mu + delta only because one of its
        components could not be split (components never span graphs); such
        rows carry forced_by_component=True instead of within_range. The
        last graph may also run short when the trace ends.
        """
        rows = []
        for i, g in enumerate(self.graphs):
            if self.balance_by == "node":
                fill = self.node_count(i)
                largest = max((len(c.nodes) for c in self.components[i]), default=0)
            else:
                fill = self.frame_fill(i)
                largest = max((len(c.frames) for c in self.components[i]), default=0)
            delta = self.delta(i)
            rows.append(
                {
                    "graph_id": g.graph_id,
                    "fill": fill,
                    "mu": self.mu,
                    "delta": delta,
                    "largest_component": largest,
                    "within_range": self.mu - delta <= fill <= self.mu + delta,
                    "forced_by_component": fill > self.mu + delta
                    and fill - largest <= self.mu + delta,
                    "is_last": i == len(self.graphs) - 1,
                }
            )
        return rows


def compute_mgv_bounds(
    chars: VideoCharacteristics,
    meta: TraceMeta,
    balance_by: str,
    min_graph_size: int | None = None,
    max_graph: int | None = None,
) -> tuple[int, float]:
    """maxGraph and mu (average frames or nodes allowed per graph)."""
    if balance_by not in ("node", "frame"):
        raise ConfigError(f"balance_by must be 'node' or 'frame', got {balance_by!r}")
    total = chars.frame_count if balance_by == "frame" else meta.uo
    if max_graph is None:
        if min_graph_size is None or min_graph_size < 1:
            raise ConfigError("MGV needs min_graph_size >= 1 or an explicit max_graph")
        max_graph = max(1, total // min_graph_size)
    if max_graph < 1:
        raise ConfigError(f"max_graph must be >= 1, got {max_graph}")
    return max_graph, total / max_graph


class MgvBuilder:
    """Streaming constructor for the MGV model (one call per non-empty frame).

    Keeps per-graph component registries so deciding where a frame lands
    never needs a from-scratch connected-component pass. Three cases:
    components intersecting the frame merge within a graph; components
    intersecting across graphs all shift into the graph holding the largest
    intersecting component (ties: lowest graph id); a fully new object set
    goes to the last graph unless it is already past mu + delta and the
    graph-count cap has room.
    """

    def __init__(self, balance_by: str, max_graph: int, mu: float):
        self.state = MgvSet(
            graphs=[SgvGraph(graph_id=1)],
            components=[[]],
            balance_by=balance_by,
            max_graph=max_graph,
            mu=mu,
        )
        self._flushed_oids: set[int] = set()

    def add_frame(self, fid: int, table: Mapping[int, FrameObject]) -> None:
        state = self.state
        oids = set(table)
        recurring = oids & self._flushed_oids
        if recurring:
            raise DataIntegrityError(
                f"object ids {sorted(recurring)} recur after a tracking-threshold flush"
            )
        n = len(table)
        intersecting: dict[int, Component] = {}
        for i, comps in enumerate(state.components):
            hits = [c for c in comps if c.nodes & oids]
            if hits:
                merged = _merge_components(hits)
                state.components[i] = [c for c in comps if c not in hits] + [merged]
                intersecting[i] = merged
        if intersecting:
            target = max(intersecting, key=lambda i: (len(intersecting[i].nodes), -i))
            for i in sorted(intersecting):
                if i == target:
                    continue
                self._shift_component(i, target, intersecting[i])
            update_nodes_and_edges(state.graphs[target], fid, table)
            pieces = [intersecting[i] for i in sorted(intersecting)]
            merged = _merge_components(pieces)
            merged.nodes |= oids
            merged.frames[fid] = n
            state.components[target] = [
                c for c in state.components[target] if c not in pieces
            ] + [merged]
        else:
            gi = state.n - 1
            graph = state.graphs[gi]
            delta = state.delta(gi)
            create = False
            if state.n < state.max_graph and state.components[gi]:
                if state.balance_by == "node":
                    create = state.node_count(gi) + len(oids) > state.mu + delta
                else:
                    create = state.frame_fill(gi) > state.mu + delta
            if create:
                graph = SgvGraph(graph_id=state.n + 1)
                state.graphs.append(graph)
                state.components.append([])
                gi = state.n - 1
            update_nodes_and_edges(graph, fid, table)
            state.components[gi].append(Component(set(oids), {fid: n}))

    def _shift_component(self, src: int, dst: int, comp: Component) -> None:
        graphs = self.state.graphs
        for oid in comp.nodes:
            graphs[dst].nodes[oid] = graphs[src].nodes.pop(oid)
        for pair in [p for p in graphs[src].edges if p[0] in comp.nodes]:
            graphs[dst].edges[pair] = graphs[src].edges.pop(pair)
        for fid in comp.frames:
            graphs[dst].frames[fid] = graphs[src].frames.pop(fid)
        self.state.components[src].remove(comp)
        self.state.components[dst].append(comp)

    def mark_flushed(self) -> None:
        for graph in self.state.graphs:
            self._flushed_oids |= set(graph.nodes)

    def finalize(self) -> MgvSet:
        for graph, comps in zip(self.state.graphs, self.state.components):
            graph.finalize(comps)
        return self.state


class SgvBuilder:
    """Streaming constructor for the single-graph-per-video model."""

    def __init__(self):
        self.graph = SgvGraph(graph_id=1)
        self.components: list[Component] = []
        self._flushed_oids: set[int] = set()

    def add_frame(self, fid: int, table: Mapping[int, FrameObject]) -> None:
        oids = set(table)
        recurring = oids & self._flushed_oids
        if recurring:
            raise DataIntegrityError(
                f"object ids {sorted(recurring)} recur after a tracking-threshold flush"
            )
        update_nodes_and_edges(self.graph, fid, table)
        self.components = merge_frame_into_components(
            self.components, oids, fid, len(table)
        )

    def mark_flushed(self) -> None:
        self._flushed_oids |= set(self.graph.nodes)

    def finalize(self) -> SgvGraph:
        self.graph.finalize(self.components)
        return self.graph


def create_mgv(builder: MgvBuilder, fid: int, table: Mapping[int, FrameObject]) -> MgvSet:
    """One MGV step; returns the updated state (same object, for chaining)."""
    builder.add_frame(fid, table)
    return builder.state
