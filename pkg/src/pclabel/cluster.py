"""One-click cluster expansion: breadth-first growth over epsilon-neighborhoods.

From a user-selected seed, the working set is pruned to a horizontal disc,
optionally voxel-downsampled for speed, and the seed's epsilon-connected
component is collected by BFS.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator

from .cloud import PointCloud, prune_around, voxel_downsample
from .errors import ParameterError, SeedOnGroundError
from .validation import check_index_set, check_points_array, check_positive


@dataclass
class ClusterParams:
    epsilon: float = 0.5
    prune_radius: float = 15.0
    downsample_cell: float = 0.1
    max_points: int = 20000  # downsample only above this working-set size

    def __post_init__(self):
        check_positive(self.epsilon, "epsilon")
        check_positive(self.prune_radius, "prune_radius")
        check_positive(self.downsample_cell, "downsample_cell")
        if self.max_points < 1:
            raise ParameterError("max_points must be >= 1")


@dataclass(frozen=True)
class Cluster:
    """An epsilon-connected component around a seed.

    ``members`` and ``candidates`` are full-cloud indices; ``candidates`` is
    the pre-downsample working set, kept so full resolution can be restored.
    """

    members: np.ndarray
    seed: int
    candidates: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    downsampled: bool = False

    def __len__(self) -> int:
        return self.members.size


def _connected_component(points: np.ndarray, start: int, epsilon: float) -> np.ndarray:
    """Local indices reachable from start via hops of length <= epsilon (BFS)."""
    n = points.shape[0]
    if n == 1:
        return np.array([0], dtype=np.int64)
    tree = cKDTree(points)
    pairs = tree.query_pairs(epsilon, output_type="ndarray")
    if pairs.size == 0:
        return np.array([start], dtype=np.int64)
    rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
    cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
    graph = csr_matrix((np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=(n, n))
    reach, _ = breadth_first_order(graph, start, directed=False, return_predecessors=True)
    return np.asarray(reach, dtype=np.int64)


def expand_cluster(cloud: PointCloud, nonground, seed: int,
                   params: ClusterParams | None = None) -> Cluster:
    """Grow the cluster containing the clicked seed point.

    The working set is nonground points within the prune radius of the seed,
    voxel-downsampled when larger than ``max_points`` (the seed always stays
    in). Raises SeedOnGroundError when the seed is ground-classified.
    """
    params = params or ClusterParams()
    nonground = check_index_set(nonground, cloud.n, "nonground")
    seed = int(seed)
    if seed < 0 or seed >= cloud.n:
        raise ParameterError(f"seed index {seed} out of range")
    if not np.isin(seed, nonground):
        raise SeedOnGroundError(f"point {seed} is classified as ground; click an object point")
    pruned = prune_around(cloud, cloud.xyz[seed], params.prune_radius)
    candidates = np.intersect1d(nonground, pruned, assume_unique=True)
    working = candidates
    downsampled = False
    if working.size > params.max_points:
        working = voxel_downsample(cloud, working, params.downsample_cell)
        if not np.isin(seed, working):
            working = np.union1d(working, [seed])
        downsampled = True
    local = np.searchsorted(working, seed)
    component = _connected_component(cloud.xyz[working], local, params.epsilon)
    return Cluster(
        members=np.sort(working[component]),
        seed=seed,
        candidates=candidates,
        downsampled=downsampled,
    )


def restore_full_resolution(cloud: PointCloud, cluster: Cluster,
                            epsilon: float) -> np.ndarray:
    """Undo downsampling: every candidate within epsilon of a member.

    Identity when no downsampling was applied (the BFS already absorbed every
    epsilon-neighbor in that case); always a superset of the members.
    """
    check_positive(epsilon, "epsilon")
    if not cluster.downsampled:
        return cluster.members.copy()
    cand = cluster.candidates
    tree = cKDTree(cloud.xyz[cand])
    near = tree.query_ball_point(cloud.xyz[cluster.members], epsilon)
    local = np.unique(np.concatenate([np.asarray(ix, dtype=np.int64) for ix in near]))
    return np.union1d(cand[local], cluster.members)


class SeededClusterExpander(BaseEstimator):
    """Estimator-style wrapper around `expand_cluster`.

    ``fit(X, seed=i, exclude_mask=None)`` stores the member mask in ``labels_``
    (True for cluster members) and indices in ``member_indices_``.
    """

    def __init__(self, epsilon=0.5, prune_radius=15.0, downsample_cell=0.1,
                 max_points=20000):
        self.epsilon = epsilon
        self.prune_radius = prune_radius
        self.downsample_cell = downsample_cell
        self.max_points = max_points

    def _params(self) -> ClusterParams:
        return ClusterParams(
            epsilon=self.epsilon,
            prune_radius=self.prune_radius,
            downsample_cell=self.downsample_cell,
            max_points=self.max_points,
        )

    def fit(self, X, y=None, seed: int = 0, exclude_mask=None):
        X = check_points_array(X, 3)
        cloud = PointCloud(X)
        if exclude_mask is None:
            eligible = cloud.all_indices()
        else:
            exclude_mask = np.asarray(exclude_mask, dtype=bool).reshape(-1)
            if exclude_mask.shape[0] != cloud.n:
                raise ParameterError("exclude_mask length does not match X")
            eligible = np.nonzero(~exclude_mask)[0]
        cluster = expand_cluster(cloud, eligible, seed, self._params())
        members = restore_full_resolution(cloud, cluster, self.epsilon)
        self.cluster_ = cluster
        self.member_indices_ = members
        labels = np.zeros(cloud.n, dtype=bool)
        labels[members] = True
        self.labels_ = labels
        return self

    def fit_predict(self, X, y=None, **kwargs) -> np.ndarray:
        return self.fit(X, **kwargs).labels_
