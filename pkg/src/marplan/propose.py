"""Turn a placement heatmap into a few candidate drop-off regions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridSpec


@dataclass(frozen=True)
class ProposalConfig:
    k: int = 3
    alpha: float = 0.8
    kmeans_restarts: int = 5
    kmeans_max_iter: int = 50
    seed: int = 0
    snap: str = "peak"  # "peak": best-scoring member; "centroid": member nearest the mean

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.kmeans_restarts < 1 or self.kmeans_max_iter < 1:
            raise ValueError("k-means restarts and iterations must be positive")
        if self.snap not in ("peak", "centroid"):
            raise ValueError("snap must be 'peak' or 'centroid'")


@dataclass(frozen=True)
class RegionCandidate:
    center: tuple[float, float]
    cell: tuple[int, int]
    member_patches: tuple[tuple[int, int], ...]
    score: float


@dataclass
class KMeansResult:
    centroids: np.ndarray
    labels: np.ndarray
    inertia: float
    history: list[float]


def _farthest_point_seeds(points: np.ndarray, k: int, first: int) -> np.ndarray:
    idx = [first]
    d = np.sum((points - points[first]) ** 2, axis=1)
    for _ in range(1, k):
        nxt = int(np.argmax(d))  # first index among ties
        idx.append(nxt)
        d = np.minimum(d, np.sum((points - points[nxt]) ** 2, axis=1))
    return points[idx].astype(float)


def _assign(points: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = np.sum((points[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
    labels = np.argmin(d2, axis=1)
    return labels, d2[np.arange(len(points)), labels]


def lloyd(points: np.ndarray, seeds: np.ndarray, max_iter: int) -> KMeansResult:
    centroids = seeds.copy()
    k = len(centroids)
    labels, d2 = _assign(points, centroids)
    history = [float(d2.sum())]
    for _ in range(max_iter):
        new = centroids.copy()
        for j in range(k):
            members = points[labels == j]
            if len(members):
                new[j] = members.mean(axis=0)
        for j in range(k):
            if not np.any(labels == j):
                # an empty cluster takes over the worst-served point
                far = int(np.argmax(d2))
                new[j] = points[far]
                d2[far] = 0.0
        new_labels, new_d2 = _assign(points, new)
        centroids = new
        history.append(float(new_d2.sum()))
        if np.array_equal(new_labels, labels):
            labels, d2 = new_labels, new_d2
            break
        labels, d2 = new_labels, new_d2
    return KMeansResult(centroids, labels, float(d2.sum()), history)


def kmeans(points: np.ndarray, k: int, restarts: int = 5, max_iter: int = 50, seed: int = 0) -> KMeansResult:
    """Lloyd's algorithm with farthest-point seeding; each restart starts from a
    different seeded first point and the lowest within-cluster sum of squares wins."""
    points = np.asarray(points, dtype=float)
    k = min(k, len(points))
    rng = np.random.default_rng(seed)
    firsts = rng.choice(len(points), size=min(restarts, len(points)), replace=False)
    best = None
    for first in firsts:
        res = lloyd(points, _farthest_point_seeds(points, k, int(first)), max_iter)
        if best is None or res.inertia < best.inertia - 1e-12:
            best = res
    return best


def propose_regions(q_place: np.ndarray, config: ProposalConfig, spec: GridSpec) -> list[RegionCandidate]:
    """Cluster the patches scoring above ``alpha * max`` into at most ``k`` regions.

    Each region is centered on a member patch: the best-scoring one (ties broken by
    distance to the cluster mean) or, with ``snap="centroid"``, the one nearest the mean.
    """
    q = np.asarray(q_place, dtype=float)
    q_max = float(q.max()) if q.size else 0.0
    if q_max <= 0.0:
        return []
    members = np.argwhere(q > config.alpha * q_max)
    res = kmeans(members, config.k, config.kmeans_restarts, config.kmeans_max_iter, config.seed)
    out = []
    for j in range(len(res.centroids)):
        cluster = members[res.labels == j]
        if len(cluster) == 0:
            continue
        d2 = np.sum((cluster - res.centroids[j]) ** 2, axis=1)
        if config.snap == "peak":
            vals = q[cluster[:, 0], cluster[:, 1]]
            order = np.lexsort((cluster[:, 1], cluster[:, 0], d2, -vals))
        else:
            order = np.lexsort((cluster[:, 1], cluster[:, 0], d2))
        cell = (int(cluster[order[0], 0]), int(cluster[order[0], 1]))
        patches = tuple((int(r), int(c)) for r, c in cluster)
        score = float(np.mean([q[p] for p in patches]))
        out.append(RegionCandidate(spec.center(cell), cell, patches, score))
    out.sort(key=lambda c: (-c.score, c.cell))
    return out
