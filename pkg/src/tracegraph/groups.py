"""Detect groups of objects of parameterized sizes over the graph models.

Four detectors share the same clustering primitives and output shape:

* ``gc_heuristic`` - sequential SGF pass; runs full K-means+Elbow only on the
  first eligible frame, after a frame-drop budget is exhausted, or when the
  configured heuristic (JD / CQ / CS) says the groups changed; other frames
  reuse the carried K and centroids (simple clustering). Baseline mode
  clusters every eligible frame and is the exhaustive reference.
* ``histogram_of_objects`` - two SGF passes; groups frames by object count
  and clusters them in descending count order, so for largest-group queries
  the bound s rises early and low-count frames are never clustered.
* ``vertex_traversal`` - SGV/MGV; seeds s by clustering the header's
  max-object frames, then walks each vertex's descending-count frame list,
  stopping at counts below s.
* ``compose_clustering_results`` - folds per-MGV-graph outputs into one.

Eligibility everywhere means more than two labeled objects in the frame
(the elbow rule needs at least three points).
"""

from __future__ import annotations

import time
from bisect import insort
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .clustering import Clustering, elbow, kmeans, silhouette_scaled, simple_cluster
from .errors import ConfigError, QualityUndefinedError
from .graphio import IdfReader
from .graphs import SgfGraph, SgvGraph

P_MAX = "max"
P_STAR = "*"

HEURISTIC_JD = "JD"
HEURISTIC_CQ = "CQ"
HEURISTIC_CS = "CS"


@dataclass(frozen=True, slots=True)
class SizeQuery:
    """Group-size filter: p=s exact, numeric p>s a range, '*' above s,
    'max' the largest groups."""

    s: int = 1
    p: int | str = P_MAX

    def __post_init__(self):
        if isinstance(self.p, int):
            if not 1 <= self.s <= self.p:
                raise ConfigError(f"need 1 <= s <= p, got s={self.s}, p={self.p}")
        elif self.p not in (P_MAX, P_STAR):
            raise ConfigError(f"p must be an int, '{P_STAR}' or '{P_MAX}', got {self.p!r}")
        elif self.s < 1:
            raise ConfigError(f"s must be >= 1, got {self.s}")

    @property
    def is_max(self) -> bool:
        return self.p == P_MAX

    def initial_s(self) -> int:
        return 0 if self.is_max else self.s

    def accepts(self, size: int) -> bool:
        """Size filter for the non-max query forms."""
        if self.p == P_STAR:
            return size > self.s
        if isinstance(self.p, int):
            return self.s <= size <= self.p
        raise ConfigError("accepts() is undefined for p=max")


@dataclass(slots=True)
class ClusterEntry:
    size: int
    oids: frozenset[int]
    frames: list[int]  # sorted, unique

    def add_frame(self, fid: int) -> None:
        if fid not in self.frames:
            insort(self.frames, fid)


@dataclass(slots=True)
class ClusterOutput:
    entries: list[ClusterEntry] = field(default_factory=list)

    def frames(self) -> set[int]:
        out: set[int] = set()
        for entry in self.entries:
            out.update(entry.frames)
        return out

    def max_size(self) -> int:
        return max((e.size for e in self.entries), default=0)

    def canonical(self) -> list[tuple[int, tuple[int, ...], tuple[int, ...]]]:
        return sorted(
            (e.size, tuple(sorted(e.oids)), tuple(e.frames)) for e in self.entries
        )

    def to_obj(self) -> list[dict]:
        return [
            {
                "size": e.size,
                "oids": sorted(e.oids),
                "frames": _runs(e.frames),
            }
            for e in self.entries
        ]

    @staticmethod
    def from_obj(obj: list[dict]) -> "ClusterOutput":
        entries = []
        for item in obj:
            frames: list[int] = []
            for a, b in item["frames"]:
                frames.extend(range(a, b + 1))
            entries.append(
                ClusterEntry(int(item["size"]), frozenset(item["oids"]), sorted(frames))
            )
        return ClusterOutput(entries)


def _runs(frames: Sequence[int]) -> list[list[int]]:
    """Compress a sorted frame list into maximal [a, b] runs."""
    runs: list[list[int]] = []
    for f in frames:
        if runs and f == runs[-1][1] + 1:
            runs[-1][1] = f
        else:
            runs.append([f, f])
    return runs


def update_output_clusters(
    oc: ClusterOutput,
    fid: int,
    s: int,
    p: int | str,
    clusters: Iterable[frozenset[int]],
) -> tuple[ClusterOutput, int]:
    """Fold one frame's clusters into the output under the size query.

    For p=max a strictly larger cluster resets the output and raises s;
    an equal-size cluster is appended (or extends its frame sequence when
    the oid set was already recorded). Other query forms just filter.
    """
    for cluster in sorted(clusters, key=lambda c: (len(c), sorted(c))):
        size = len(cluster)
        if p == P_MAX:
            if size > s:
                s = size
                oc.entries = [ClusterEntry(size, cluster, [fid])]
                continue
            if size != s:
                continue
        elif p == P_STAR:
            if size <= s:
                continue
        elif not s <= size <= p:
            continue
        for entry in oc.entries:
            if entry.oids == cluster and entry.size == size:
                entry.add_frame(fid)
                break
        else:
            oc.entries.append(ClusterEntry(size, cluster, [fid]))
    return oc, s


@dataclass(slots=True)
class GroupStats:
    frames_seen: int = 0
    frames_dropped: int = 0
    cluster_calls: int = 0       # simple + full clustering passes
    kmeans_invocations: int = 0  # frames on which K-means+Elbow ran
    io_seconds: float = 0.0
    traversal_seconds: float = 0.0
    compute_seconds: float = 0.0
    elapsed_seconds: float = 0.0

    def to_obj(self) -> dict:
        return {
            "frames_seen": self.frames_seen,
            "frames_dropped": self.frames_dropped,
            "cluster_calls": self.cluster_calls,
            "kmeans_invocations": self.kmeans_invocations,
            "io_seconds": self.io_seconds,
            "traversal_seconds": self.traversal_seconds,
            "compute_seconds": self.compute_seconds,
            "elapsed_seconds": self.elapsed_seconds,
        }


@dataclass(slots=True)
class GroupDetection:
    clusters: ClusterOutput
    stats: GroupStats


@dataclass(frozen=True, slots=True)
class HeuristicConfig:
    heuristic: str = HEURISTIC_CS
    th_jd: float | None = None
    th_cq: float | None = None
    alpha: float = 1.0

    def __post_init__(self):
        if self.heuristic not in (HEURISTIC_JD, HEURISTIC_CQ, HEURISTIC_CS):
            raise ConfigError(f"unknown heuristic {self.heuristic!r}")
        if self.heuristic == HEURISTIC_JD and self.th_jd is None:
            raise ConfigError("JD heuristic needs th_jd")
        if self.heuristic == HEURISTIC_CQ and self.th_cq is None:
            raise ConfigError("CQ heuristic needs th_cq")
        for name, th in (("th_jd", self.th_jd), ("th_cq", self.th_cq)):
            if th is not None and not 0.0 <= th <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {th}")
        if self.alpha <= 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")


def _fetch_points(
    idf: IdfReader, fid: int, oids: Sequence[int], stats: GroupStats
) -> list[tuple[float, float]]:
    t0 = time.perf_counter()
    entries = {e.oid: e for e in idf.fetch(fid)}
    stats.io_seconds += time.perf_counter() - t0
    return [entries[oid].centroid for oid in oids]


def _cluster_oids(clustering: Clustering, oids: Sequence[int]) -> list[frozenset[int]]:
    return [frozenset(oids[i] for i in members) for members in clustering.clusters()]


def _full_clustering(points: list[tuple[float, float]], stats: GroupStats) -> Clustering:
    t0 = time.perf_counter()
    k = elbow(points)
    clustering = kmeans(points, k)
    stats.compute_seconds += time.perf_counter() - t0
    stats.kmeans_invocations += 1
    stats.cluster_calls += 1
    return clustering


def _quality_or_none(clustering: Clustering, points) -> float | None:
    try:
        return silhouette_scaled(clustering, points).silhouette_scaled
    except QualityUndefinedError:
        return None  # treated as "no drop detected"


def gc_heuristic(
    sgf_graphs: Iterable[SgfGraph],
    idf: IdfReader,
    fps: int,
    query: SizeQuery,
    cfg: HeuristicConfig | None = None,
    cl: str | None = None,
    generate_baseline: bool = False,
) -> GroupDetection:
    """One sequential pass over SGF graphs with heuristic-triggered K-means."""
    cfg = cfg or HeuristicConfig()
    stats = GroupStats()
    started = time.perf_counter()
    oc = ClusterOutput()
    s = query.initial_s()
    th_drop = cfg.alpha * fps
    carried_k: int | None = None
    carried_centroids: tuple[tuple[float, float], ...] | None = None
    dropped = 0
    last_quality: float | None = None
    last_largest = 0
    prev_oids: set[int] | None = None

    for graph in sgf_graphs:
        oids = sorted(
            oid for oid, (ocl, _) in graph.nodes.items() if cl is None or ocl == cl
        )
        if len(oids) <= 2:
            continue  # two-object frames cannot seed the elbow rule
        stats.frames_seen += 1
        if not generate_baseline and len(oids) < s:
            dropped += 1
            stats.frames_dropped += 1
            continue
        points = _fetch_points(idf, graph.fid, oids, stats)
        do_kmeans = generate_baseline or carried_centroids is None or dropped >= th_drop
        if (
            not do_kmeans
            and cfg.heuristic == HEURISTIC_JD
            and prev_oids is not None
        ):
            current = set(oids)
            jd = 1.0 - len(current & prev_oids) / len(current | prev_oids)
            do_kmeans = jd >= cfg.th_jd
        clustering: Clustering | None = None
        if not do_kmeans:
            t0 = time.perf_counter()
            clustering = simple_cluster(points, carried_k, carried_centroids)
            stats.compute_seconds += time.perf_counter() - t0
            stats.cluster_calls += 1
            carried_centroids = clustering.centroids
            if clustering.empty_clusters:
                do_kmeans = True  # carried centroids are provably stale
            elif cfg.heuristic == HEURISTIC_CS:
                do_kmeans = clustering.largest_cluster_size() > last_largest
            elif cfg.heuristic == HEURISTIC_CQ:
                t0 = time.perf_counter()
                quality = _quality_or_none(clustering, points)
                stats.compute_seconds += time.perf_counter() - t0
                if quality is not None and last_quality is not None and quality < last_quality:
                    do_kmeans = (last_quality - quality) / last_quality >= cfg.th_cq
        if do_kmeans:
            clustering = _full_clustering(points, stats)
            carried_k = clustering.k
            carried_centroids = clustering.centroids
            dropped = 0
            last_largest = clustering.largest_cluster_size()
            if cfg.heuristic == HEURISTIC_CQ:
                t0 = time.perf_counter()
                last_quality = _quality_or_none(clustering, points)
                stats.compute_seconds += time.perf_counter() - t0
        oc, s = update_output_clusters(oc, graph.fid, s, query.p, _cluster_oids(clustering, oids))
        prev_oids = set(oids)
    stats.elapsed_seconds = time.perf_counter() - started
    return GroupDetection(clusters=oc, stats=stats)


def histogram_of_objects(
    sgf_graphs: Iterable[SgfGraph],
    idf: IdfReader,
    max_objs: int,
    query: SizeQuery,
    cl: str | None = None,
) -> GroupDetection:
    """Cluster SGF frames in descending object-count order (two passes)."""
    stats = GroupStats()
    started = time.perf_counter()
    oc = ClusterOutput()
    s = query.initial_s()
    histogram: dict[int, list[int]] = {}
    t0 = time.perf_counter()
    for graph in sgf_graphs:
        n = len(graph.nodes)
        stats.frames_seen += 1
        if n > 2 and n >= s:
            histogram.setdefault(n, []).append(graph.fid)
        else:
            stats.frames_dropped += 1
    stats.traversal_seconds += time.perf_counter() - t0
    m = max_objs
    while m >= s and m > 2:
        for fid in histogram.get(m, ()):
            t0 = time.perf_counter()
            entries = {e.oid: e for e in idf.fetch(fid)}
            stats.io_seconds += time.perf_counter() - t0
            oids = sorted(o for o, e in entries.items() if cl is None or e.cl == cl)
            if len(oids) <= 2:
                continue
            points = [entries[o].centroid for o in oids]
            clustering = _full_clustering(points, stats)
            oc, s = update_output_clusters(oc, fid, s, query.p, _cluster_oids(clustering, oids))
        m -= 1
    stats.elapsed_seconds = time.perf_counter() - started
    return GroupDetection(clusters=oc, stats=stats)


def vertex_traversal(
    graph: SgvGraph,
    idf: IdfReader,
    query: SizeQuery,
    cl: str | None = None,
    generate_baseline: bool = False,
) -> GroupDetection:
    """Walk SGV/MGV vertex labels in descending object-count order."""
    stats = GroupStats()
    started = time.perf_counter()
    oc = ClusterOutput()
    s = query.initial_s()
    total_frames = graph.frame_count
    visited: set[int] = set()

    def cluster_frame(fid: int) -> None:
        t0 = time.perf_counter()
        entries = {e.oid: e for e in idf.fetch(fid)}
        stats.io_seconds += time.perf_counter() - t0
        stats.frames_seen += 1
        oids = sorted(o for o, e in entries.items() if cl is None or e.cl == cl)
        if len(oids) <= 2:
            return
        points = [entries[o].centroid for o in oids]
        clustering = _full_clustering(points, stats)
        nonlocal oc, s
        oc, s = update_output_clusters(oc, fid, s, query.p, _cluster_oids(clustering, oids))

    if not generate_baseline and graph.max_objs() >= max(s, 3):
        for fid in graph.max_obj_frames():
            if fid not in visited:
                cluster_frame(fid)
                visited.add(fid)
    for oid in sorted(graph.nodes):
        if len(visited) == total_frames:
            break  # every source frame already handled
        node = graph.nodes[oid]
        if cl is not None and cl not in node.labels:
            continue
        t0 = time.perf_counter()
        label_walk = list(node.frames)  # stored in descending object count
        stats.traversal_seconds += time.perf_counter() - t0
        for fid, n in label_walk:
            if n <= 2:
                break  # descending order: the rest are two-object frames
            if n < s and not generate_baseline:
                break
            if fid not in visited:
                cluster_frame(fid)
                visited.add(fid)
    stats.elapsed_seconds = time.perf_counter() - started
    return GroupDetection(clusters=oc, stats=stats)


def compose_clustering_results(
    outputs: Sequence[ClusterOutput], p: int | str
) -> ClusterOutput:
    """Fold per-graph outputs; for p=max only globally largest entries remain."""
    def copies(entries: Iterable[ClusterEntry]) -> list[ClusterEntry]:
        return [ClusterEntry(e.size, e.oids, list(e.frames)) for e in entries]

    result = ClusterOutput()
    s = 0
    for oc in outputs:
        if p == P_MAX:
            if not oc.entries:
                continue
            largest = oc.max_size()
            if largest > s:
                result = ClusterOutput(copies(oc.entries))
                s = largest
            elif largest == s:
                result.entries.extend(copies(oc.entries))
        else:
            result.entries.extend(copies(oc.entries))
    return result


def run_vt_mgv(
    graphs: Sequence[SgvGraph],
    idf_path,
    query: SizeQuery,
    cl: str | None = None,
    jobs: int | None = None,
) -> tuple[ClusterOutput, list[GroupDetection]]:
    """Vertex traversal over MGV graphs concurrently, then composition.

    Each worker opens its own IDF reader; composition order follows graph ids
    regardless of completion order.
    """

    def work(graph: SgvGraph) -> GroupDetection:
        with IdfReader(idf_path) as idf:
            return vertex_traversal(graph, idf, query, cl=cl)

    if jobs == 1 or len(graphs) == 1:
        results = [work(g) for g in graphs]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, graphs))
    composed = compose_clustering_results([r.clusters for r in results], query.p)
    return composed, results


def f1_against_baseline(candidate: ClusterOutput, baseline: ClusterOutput) -> float:
    """Frame-set F1: TP frames in both, FP only in candidate, FN only in baseline."""
    cand = candidate.frames()
    base = baseline.frames()
    if not cand and not base:
        return 1.0
    tp = len(cand & base)
    if tp == 0:
        return 0.0
    precision = tp / len(cand)
    recall = tp / len(base)
    return 2.0 * precision * recall / (precision + recall)
