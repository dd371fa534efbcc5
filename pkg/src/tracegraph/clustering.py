"""Deterministic clustering primitives shared by every group detector.

K-means seeds with greedy farthest-first traversal (first centroid = lowest
index point, ties by lowest index throughout), so identical inputs always
produce bit-identical clusterings. The cluster count is picked by the elbow
rule: the interior K maximizing the discrete second difference of the
log-SSE curve, ties resolved toward the smaller K. Curvature is taken in
the log domain so the knee is judged by relative drops; on the raw curve
the huge early drops (splitting the whole cloud) always dominate the one at
the true group count. The K search range is 1..len(points); including K=1
gives the curve an interior point even for three objects.

Frames hold at most a few dozen objects, so the hot loops are plain Python
over tuples; numpy enters only for the silhouette distance matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, QualityUndefinedError

MAX_ITER = 50
TOL = 1e-3  # max centroid displacement, pixels

_SSE_FLOOR = 1e-12  # zero-SSE clusterings enter the log curve at this floor

Point = tuple[float, float]


@dataclass(frozen=True, slots=True)
class Clustering:
    k: int
    assignments: tuple[int, ...]
    centroids: tuple[Point, ...]
    sse: float

    @property
    def empty_clusters(self) -> tuple[int, ...]:
        used = set(self.assignments)
        return tuple(i for i in range(self.k) if i not in used)

    def clusters(self) -> list[tuple[int, ...]]:
        """Point indices per cluster, skipping empty clusters."""
        buckets: list[list[int]] = [[] for _ in range(self.k)]
        for idx, c in enumerate(self.assignments):
            buckets[c].append(idx)
        return [tuple(b) for b in buckets if b]

    def largest_cluster_size(self) -> int:
        counts = [0] * self.k
        for c in self.assignments:
            counts[c] += 1
        return max(counts, default=0)


@dataclass(frozen=True, slots=True)
class QualityScore:
    """Mean silhouette shifted into [0, 2] so relative drops stay in [0, 1)."""

    silhouette_scaled: float


def _check_points(points: Sequence[Point]) -> list[Point]:
    pts = [(float(x), float(y)) for x, y in points]
    if not pts:
        raise ConfigError("need at least one point")
    return pts


def _d2(a: Point, b: Point) -> float:
    dx = a[0] - b[0]
    dy = a[1] - b[1]
    return dx * dx + dy * dy


def farthest_first_centroids(points: Sequence[Point], k: int) -> list[Point]:
    pts = _check_points(points)
    chosen = [pts[0]]
    min_d2 = [_d2(p, pts[0]) for p in pts]
    while len(chosen) < k:
        best_i = 0
        best = min_d2[0]
        for i in range(1, len(pts)):
            if min_d2[i] > best:  # strict: ties keep the lowest index
                best = min_d2[i]
                best_i = i
        chosen.append(pts[best_i])
        for i in range(len(pts)):
            d = _d2(pts[i], pts[best_i])
            if d < min_d2[i]:
                min_d2[i] = d
    return chosen


def _assign(pts: list[Point], centroids: list[Point]) -> tuple[list[int], float]:
    """Nearest-centroid assignment (ties toward the lowest cluster index)
    plus the resulting SSE."""
    assignments = []
    sse = 0.0
    for p in pts:
        best_i = 0
        best = _d2(p, centroids[0])
        for i in range(1, len(centroids)):
            d = _d2(p, centroids[i])
            if d < best:
                best = d
                best_i = i
        assignments.append(best_i)
        sse += best
    return assignments, sse


def _recompute(
    pts: list[Point], centroids: list[Point], assignments: list[int]
) -> list[Point]:
    k = len(centroids)
    sums = [[0.0, 0.0, 0] for _ in range(k)]
    for p, c in zip(pts, assignments):
        acc = sums[c]
        acc[0] += p[0]
        acc[1] += p[1]
        acc[2] += 1
    new = []
    for c in range(k):
        sx, sy, n = sums[c]
        if n:  # empty clusters keep their previous centroid
            new.append((sx / n, sy / n))
        else:
            new.append(centroids[c])
    return new


def _result(pts: list[Point], centroids: list[Point]) -> Clustering:
    assignments, sse = _assign(pts, centroids)
    return Clustering(
        k=len(centroids),
        assignments=tuple(assignments),
        centroids=tuple(centroids),
        sse=sse,
    )


def kmeans(
    points: Sequence[Point],
    k: int,
    init_centroids: Sequence[Point] | None = None,
) -> Clustering:
    """Lloyd iterations from a deterministic seeding."""
    pts = _check_points(points)
    if not 1 <= k <= len(pts):
        raise ConfigError(f"k={k} out of range for {len(pts)} points")
    if init_centroids is not None:
        centroids = _check_points(init_centroids)
        if len(centroids) != k:
            raise ConfigError(f"got {len(centroids)} init centroids for k={k}")
    else:
        centroids = farthest_first_centroids(pts, k)
    tol2 = TOL * TOL
    assignments, _ = _assign(pts, centroids)
    for _ in range(MAX_ITER):
        new_centroids = _recompute(pts, centroids, assignments)
        shift2 = max(_d2(a, b) for a, b in zip(new_centroids, centroids))
        centroids = new_centroids
        assignments, _ = _assign(pts, centroids)
        if shift2 < tol2:
            break
    return _result(pts, centroids)


def simple_cluster(
    points: Sequence[Point], k: int, centroids: Sequence[Point]
) -> Clustering:
    """One nearest-centroid pass with carried centroids, then one recompute."""
    pts = _check_points(points)
    cents = _check_points(centroids)
    if len(cents) != k:
        raise ConfigError(f"got {len(cents)} centroids for k={k}")
    assignments, _ = _assign(pts, cents)
    return _result(pts, _recompute(pts, cents, assignments))


def sse_curve(points: Sequence[Point]) -> list[float]:
    pts = _check_points(points)
    curve = []
    for k in range(1, len(pts) + 1):
        if k == 1:
            # single cluster: the mean is optimal, no iterations needed
            cx = sum(p[0] for p in pts) / len(pts)
            cy = sum(p[1] for p in pts) / len(pts)
            curve.append(sum(_d2(p, (cx, cy)) for p in pts))
        else:
            curve.append(kmeans(pts, k).sse)
    return curve


def elbow(points: Sequence[Point]) -> int:
    """K at the maximum second difference of the log-SSE curve (ties: smaller K)."""
    pts = _check_points(points)
    n = len(pts)
    if n < 3:
        raise ConfigError(f"elbow needs at least 3 points, got {n}")
    curve = [math.log(max(v, _SSE_FLOOR)) for v in sse_curve(pts)]
    best_k = 2
    best_curvature = -math.inf
    for k in range(2, n):  # interior points of the K=1..n curve
        curvature = curve[k - 2] - 2.0 * curve[k - 1] + curve[k]
        if curvature > best_curvature:
            best_curvature = curvature
            best_k = k
    return best_k


def silhouette_scaled(
    clustering: Clustering, points: Sequence[Point]
) -> QualityScore:
    """Mean silhouette over all points, shifted by +1 into [0, 2].

    Undefined for a single cluster or an all-singleton clustering; points in
    a singleton cluster contribute 0 (the usual convention).
    """
    pts = np.asarray(_check_points(points))
    clusters = clustering.clusters()
    if len(clusters) < 2:
        raise QualityUndefinedError("silhouette needs at least 2 non-empty clusters")
    if all(len(c) == 1 for c in clusters):
        raise QualityUndefinedError("silhouette undefined for all-singleton clustering")
    dists = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    scores = []
    for ci, members in enumerate(clusters):
        for idx in members:
            if len(members) == 1:
                scores.append(0.0)
                continue
            a = float(sum(dists[idx][j] for j in members if j != idx)) / (len(members) - 1)
            b = min(
                float(np.mean(dists[idx][list(other)]))
                for cj, other in enumerate(clusters)
                if cj != ci
            )
            denom = max(a, b)
            scores.append((b - a) / denom if denom > 0 else 0.0)
    return QualityScore(silhouette_scaled=float(np.mean(scores)) + 1.0)
