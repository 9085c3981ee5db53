# src/geometry/neighbors.py
import logging
from dataclasses import dataclass
from typing import Tuple, Union

import faiss
import numpy as np

from src.errors import ParameterError, ShapeError
from src.geometry.point_cloud import PointCloud

logger = logging.getLogger(__name__)

# Extra float32 candidates fetched from faiss before the float64 re-rank.
CANDIDATE_MARGIN = 8


@dataclass(frozen=True)
class NeighborIndex:
    """Exact k-nearest-neighbour lists, self first.

    Attributes:
        k: neighbours per point (self included)
        lists: (N, k) int64 indices
        distances: (N, k) squared Euclidean distances, non-decreasing per row
    """

    k: int
    lists: np.ndarray
    distances: np.ndarray

    @property
    def size(self) -> int:
        return self.lists.shape[0]

    def truncated(self, k: int) -> "NeighborIndex":
        """The first k entries of every list (still exact, still self first)."""
        if not 1 <= k <= self.k:
            raise ParameterError(f"cannot truncate a {self.k}-NN index to k={k}")
        return NeighborIndex(k=k, lists=self.lists[:, :k].copy(), distances=self.distances[:, :k].copy())

    def symmetric_pattern(self) -> Tuple[np.ndarray, np.ndarray]:
        """Row/column indices of the union pattern: j in knn(i) or i in knn(j)."""
        n = self.size
        rows = np.repeat(np.arange(n), self.k)
        cols = self.lists.ravel()
        pairs = np.unique(np.concatenate([rows * n + cols, cols * n + rows]))
        return pairs // n, pairs % n


def _as_points(cloud: Union[PointCloud, np.ndarray]) -> np.ndarray:
    points = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    if points.ndim != 2:
        raise ShapeError(f"expected an (N, dim) coordinate array, got shape {points.shape}")
    return points


def _flat_index(points: np.ndarray) -> faiss.IndexFlatL2:
    index = faiss.IndexFlatL2(points.shape[1])
    index.add(np.ascontiguousarray(points, dtype=np.float32))
    return index


def _rerank(points: np.ndarray, queries: np.ndarray, candidates: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Recompute candidate distances in float64 and sort rows by (distance, index)."""
    diff = points[candidates] - queries[:, None, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    order = np.lexsort((candidates, sq), axis=-1)
    return np.take_along_axis(candidates, order, axis=1), np.take_along_axis(sq, order, axis=1)


def build_knn(cloud: Union[PointCloud, np.ndarray], k: int) -> NeighborIndex:
    """
    Exact k nearest neighbours by ambient Euclidean distance.

    faiss IndexFlatL2 does the brute-force search in float32; the candidates are
    re-ranked with float64 distances so ties and rounding never depend on the
    thread count.

    Args:
        cloud: PointCloud or raw (N, dim) array
        k: neighbours per point, self included

    Returns:
        NeighborIndex with lists[i][0] == i
    """
    points = _as_points(cloud)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ParameterError(f"k must satisfy 1 <= k <= N={n}, got k={k}")

    n_candidates = min(n, k + CANDIDATE_MARGIN)
    _, candidates = _flat_index(points).search(np.ascontiguousarray(points, dtype=np.float32), n_candidates)
    candidates = candidates.astype(np.int64)

    # Self goes first even when duplicates sit at distance zero.
    own = np.arange(n)
    has_self = (candidates == own[:, None]).any(axis=1)
    if not has_self.all():
        candidates[~has_self, -1] = own[~has_self]
    lists, distances = _rerank(points, points, candidates)
    self_pos = np.argmax(lists == own[:, None], axis=1)
    for i in np.flatnonzero(self_pos):
        p = self_pos[i]
        lists[i, 1:p + 1] = lists[i, :p].copy()
        distances[i, 1:p + 1] = distances[i, :p].copy()
        lists[i, 0] = i
        distances[i, 0] = 0.0

    logger.debug(f"Built {k}-NN index over {n} points")
    return NeighborIndex(k=k, lists=lists[:, :k].copy(), distances=distances[:, :k].copy())


def nearest(points: np.ndarray, queries: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Index of, and squared float64 distance to, the nearest point for each query."""
    points = _as_points(points)
    queries = _as_points(queries)
    n_candidates = min(points.shape[0], 1 + CANDIDATE_MARGIN)
    _, candidates = _flat_index(points).search(np.ascontiguousarray(queries, dtype=np.float32), n_candidates)
    lists, sq = _rerank(points, queries, candidates.astype(np.int64))
    return lists[:, 0], sq[:, 0]


def nearest_distances(points: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Squared float64 distance from each query to its nearest point."""
    return nearest(points, queries)[1]


def median_spacing(cloud: Union[PointCloud, np.ndarray]) -> float:
    """Median distance from a point to its nearest other point."""
    points = _as_points(cloud)
    if points.shape[0] < 2:
        raise ParameterError("spacing needs at least two points")
    knn = build_knn(points, 2)
    return float(np.median(np.sqrt(knn.distances[:, 1])))
