"""Detect pairs of objects moving monotonically closer or farther apart.

Distances are compared every k-th frame, which smooths frame-to-frame
bounding-box noise; steps whose absolute distance change stays within the
perturbation threshold epsilon are ignored. k can be fixed, tied to the
frame rate, or chosen adaptively from the trace meta: when the minimum or
(halved) average object duration falls below fps/2 the larger of the two is
used, otherwise the smaller, keeping k neither perturbation-prone nor blind
to short instances.

The SGV/MGV detector walks graph edges and samples a rigid stride from the
pair's first co-derived frame, fetching boxes from the IDF; a sampled step
with either object undetected contributes no comparison but does not stall
the stride. The SGF detector reads distances straight from per-frame edge
labels and compares only when exactly k frames separate two sightings of a
pair. Both produce identical output when pairs co-occur at every sampled
step.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import ConfigError, DataIntegrityError, DisjointnessError, NoObjectsError
from .graphio import IdfReader
from .graphs import SgfGraph, SgvGraph
from .trace import TraceMeta, VideoCharacteristics

MOVING_CLOSER = "moving_closer"
FAR_APART = "far_apart"

K_HALF_FPS = "half_fps"
K_FPS = "fps"
K_ADAPTIVE_HALF = "adaptive_half"
K_ADAPTIVE_FULL = "adaptive_full"
K_FIXED = "fixed"

_K_MODES = (K_HALF_FPS, K_FPS, K_ADAPTIVE_HALF, K_ADAPTIVE_FULL, K_FIXED)


@dataclass(frozen=True, slots=True)
class ApproachConfig:
    direction: str = MOVING_CLOSER
    epsilon: float = 5.0  # pixels; 0 disables perturbation screening
    k_mode: str = K_ADAPTIVE_HALF
    k: int | None = None  # required for k_mode="fixed"

    def __post_init__(self):
        if self.direction not in (MOVING_CLOSER, FAR_APART):
            raise ConfigError(f"unknown direction {self.direction!r}")
        if self.epsilon < 0:
            raise ConfigError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.k_mode not in _K_MODES:
            raise ConfigError(f"unknown k mode {self.k_mode!r}")
        if self.k_mode == K_FIXED and (self.k is None or self.k < 1):
            raise ConfigError("fixed k mode needs k >= 1")

    def trending(self, d_now: float, d_prev: float) -> bool:
        if self.direction == MOVING_CLOSER:
            return d_now < d_prev
        return d_now > d_prev


def choose_k(meta: TraceMeta, chars: VideoCharacteristics, cfg: ApproachConfig) -> int:
    """Frame skip for distance comparisons; floored and clamped to >= 1."""
    if cfg.k_mode == K_FIXED:
        return cfg.k
    if cfg.k_mode == K_FPS:
        return max(1, chars.fps)
    if cfg.k_mode == K_HALF_FPS:
        return max(1, int(chars.fps / 2))
    if meta.uo == 0:
        raise NoObjectsError("adaptive k needs at least one tracked object")
    avg_duration = chars.frame_count / meta.uo
    if cfg.k_mode == K_ADAPTIVE_HALF:
        avg_duration /= 2
    min_duration = meta.min_duration
    half_fps = chars.fps / 2
    if min_duration < half_fps or avg_duration < half_fps:
        k = max(min_duration, avg_duration)
    else:
        k = min(min_duration, avg_duration)
    return max(1, int(k))


@dataclass(slots=True)
class ApproachStats:
    pairs_seen: int = 0
    comparisons: int = 0
    io_seconds: float = 0.0
    traversal_seconds: float = 0.0
    compute_seconds: float = 0.0
    elapsed_seconds: float = 0.0

    def to_obj(self) -> dict:
        return {
            "pairs_seen": self.pairs_seen,
            "comparisons": self.comparisons,
            "io_seconds": self.io_seconds,
            "traversal_seconds": self.traversal_seconds,
            "compute_seconds": self.compute_seconds,
            "elapsed_seconds": self.elapsed_seconds,
        }


@dataclass(slots=True)
class ApproachOutput:
    """Closed frame intervals per (smaller oid, larger oid) pair."""

    pairs: dict[tuple[int, int], list[list[int]]] = field(default_factory=dict)

    def record(self, pair: tuple[int, int], start: int, end: int) -> None:
        intervals = self.pairs.setdefault(pair, [])
        if intervals and intervals[-1][1] == start:
            intervals[-1][1] = end  # extend the interval open at the last step
        else:
            intervals.append([start, end])

    def count_instances(self) -> int:
        return sum(len(v) for v in self.pairs.values())

    def to_obj(self) -> dict:
        return {
            "pairs": [
                {"a": a, "b": b, "intervals": [list(i) for i in self.pairs[(a, b)]]}
                for a, b in sorted(self.pairs)
            ]
        }

    @staticmethod
    def from_obj(obj: dict) -> "ApproachOutput":
        out = ApproachOutput()
        for item in obj["pairs"]:
            out.pairs[(int(item["a"]), int(item["b"]))] = [
                [int(s), int(e)] for s, e in item["intervals"]
            ]
        return out


@dataclass(slots=True)
class ApproachDetection:
    output: ApproachOutput
    stats: ApproachStats
    k: int = 1


def count_instances(output: ApproachOutput) -> int:
    return output.count_instances()


def detect_sgv(
    graph: SgvGraph,
    idf: IdfReader,
    meta: TraceMeta,
    chars: VideoCharacteristics,
    cfg: ApproachConfig,
    cl: str | None = None,
) -> ApproachDetection:
    """Edge walk over an SGV/MGV graph with IDF lookups every k-th frame."""
    stats = ApproachStats()
    started = time.perf_counter()
    k = choose_k(meta, chars, cfg)
    output = ApproachOutput()

    t0 = time.perf_counter()
    frame_sets: dict[int, set[int]] = {}
    spans: dict[int, tuple[int, int]] = {}
    for oid, node in graph.nodes.items():
        if cl is not None and cl not in node.labels:
            continue
        fids = node.frame_ids()
        frame_sets[oid] = set(fids)
        spans[oid] = (fids[0], fids[-1])
    stats.traversal_seconds += time.perf_counter() - t0

    centroid_cache: dict[int, dict[int, tuple[float, float]]] = {}

    def centroids_at(fid: int) -> dict[int, tuple[float, float]]:
        got = centroid_cache.get(fid)
        if got is None:
            t1 = time.perf_counter()
            got = {e.oid: e.centroid for e in idf.fetch(fid)}
            stats.io_seconds += time.perf_counter() - t1
            centroid_cache[fid] = got
        return got

    for a, b in sorted(graph.edges):
        if a not in frame_sets or b not in frame_sets:
            continue
        stats.pairs_seen += 1
        f_start = max(spans[a][0], spans[b][0])
        f_end = min(spans[a][1], spans[b][1])
        prev_d: float | None = None
        f = f_start
        while f <= f_end:
            d: float | None = None
            if f in frame_sets[a] and f in frame_sets[b]:
                boxes = centroids_at(f)
                if a not in boxes or b not in boxes:
                    raise DataIntegrityError(
                        f"frame {f} lacks objects {a}/{b} promised by vertex labels"
                    )
                t1 = time.perf_counter()
                d = math.dist(boxes[a], boxes[b])
                stats.compute_seconds += time.perf_counter() - t1
            if d is not None and prev_d is not None:
                stats.comparisons += 1
                if abs(d - prev_d) > cfg.epsilon and cfg.trending(d, prev_d):
                    output.record((a, b), f - k, f)
            prev_d = d
            f += k
    stats.elapsed_seconds = time.perf_counter() - started
    return ApproachDetection(output=output, stats=stats, k=k)


def detect_sgf(
    sgf_graphs: Iterable[SgfGraph],
    meta: TraceMeta,
    chars: VideoCharacteristics,
    cfg: ApproachConfig,
    cl: str | None = None,
) -> ApproachDetection:
    """Single pass over per-frame graphs; distances come from edge labels,
    so the IDF is never read. A comparison fires only when a pair's two
    sightings are exactly k frames apart."""
    stats = ApproachStats()
    started = time.perf_counter()
    k = choose_k(meta, chars, cfg)
    output = ApproachOutput()
    last_seen: dict[tuple[int, int], tuple[int, float]] = {}

    for graph in sgf_graphs:
        for pair, d in graph.edges.items():
            a, b = pair
            if cl is not None and (
                graph.nodes[a][0] != cl or graph.nodes[b][0] != cl
            ):
                continue
            state = last_seen.get(pair)
            if state is None:
                stats.pairs_seen += 1
                last_seen[pair] = (graph.fid, d)
                continue
            f_prev, d_prev = state
            if graph.fid - f_prev == k:
                stats.comparisons += 1
                if abs(d - d_prev) > cfg.epsilon and cfg.trending(d, d_prev):
                    output.record(pair, f_prev, graph.fid)
                last_seen[pair] = (graph.fid, d)
    stats.elapsed_seconds = time.perf_counter() - started
    return ApproachDetection(output=output, stats=stats, k=k)


def compose_approach(outputs: Sequence[ApproachOutput]) -> ApproachOutput:
    """Key-wise union of per-graph outputs; pair keys must be disjoint."""
    merged = ApproachOutput()
    for output in outputs:
        for pair, intervals in output.pairs.items():
            if pair in merged.pairs:
                raise DisjointnessError(
                    f"pair {pair} appears in more than one graph's output"
                )
            merged.pairs[pair] = [list(i) for i in intervals]
    return merged


def run_approach_mgv(
    graphs: Sequence[SgvGraph],
    idf_path,
    meta: TraceMeta,
    chars: VideoCharacteristics,
    cfg: ApproachConfig,
    cl: str | None = None,
    jobs: int | None = None,
) -> tuple[ApproachOutput, list[ApproachDetection]]:
    """detect_sgv over MGV graphs concurrently, then a key-wise union.

    k comes from the whole-video meta, so every graph uses the same stride.
    """

    def work(graph: SgvGraph) -> ApproachDetection:
        with IdfReader(idf_path) as idf:
            return detect_sgv(graph, idf, meta, chars, cfg, cl=cl)

    if jobs == 1 or len(graphs) == 1:
        results = [work(g) for g in graphs]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, graphs))
    return compose_approach([r.output for r in results]), results
