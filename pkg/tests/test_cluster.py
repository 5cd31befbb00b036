from collections import deque

import numpy as np
import pytest

from pclabel.cloud import PointCloud
from pclabel.cluster import (
    ClusterParams,
    SeededClusterExpander,
    expand_cluster,
    restore_full_resolution,
)
from pclabel.errors import SeedOnGroundError


WIDE_OPEN = ClusterParams(epsilon=0.5, prune_radius=1e6, downsample_cell=0.1,
                          max_points=10**9)


# --------------------------------------------------------------------- oracles

def brute_component(xyz, seed, eps):
    """BFS over the dense epsilon-adjacency graph, written independently."""
    n = len(xyz)
    diff = xyz[:, None, :] - xyz[None, :, :]
    adjacent = (diff ** 2).sum(axis=2) <= eps * eps
    seen = {seed}
    queue = deque([seed])
    while queue:
        u = queue.popleft()
        for v in range(n):
            if adjacent[u, v] and v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


def brute_dilation(xyz, members, candidates, eps):
    member_pts = xyz[sorted(members)]
    out = set(members)
    for c in candidates:
        d2 = ((member_pts - xyz[c]) ** 2).sum(axis=1)
        if (d2 <= eps * eps).any():
            out.add(int(c))
    return out


# ------------------------------------------------------------- expand_cluster

class TestExpandCluster:
    def test_separated_blobs(self, rng):
        blob_a = rng.normal(0, 0.15, (100, 3))
        blob_b = rng.normal(0, 0.15, (100, 3)) + [3, 0, 0]
        cloud = PointCloud(np.vstack([blob_a, blob_b]))
        cluster = expand_cluster(cloud, np.arange(200), 5,
                                 ClusterParams(epsilon=0.5, prune_radius=100))
        assert set(cluster.members.tolist()) == set(range(100))
        assert cluster.seed == 5

    def test_isolated_seed_is_singleton(self, rng):
        pts = np.vstack([rng.normal(0, 0.1, (50, 3)), [[50, 50, 50]]])
        cloud = PointCloud(pts)
        cluster = expand_cluster(cloud, np.arange(51), 50, WIDE_OPEN)
        assert cluster.members.tolist() == [50]

    def test_seed_on_ground_rejected(self, rng):
        cloud = PointCloud(rng.normal(0, 1, (20, 3)))
        with pytest.raises(SeedOnGroundError):
            expand_cluster(cloud, np.arange(10), 15, WIDE_OPEN)

    def test_matches_graph_oracle_on_random_clouds(self, rng):
        params = ClusterParams(epsilon=0.4, prune_radius=1e6, max_points=10**9)
        for _ in range(20):
            n = int(rng.integers(50, 600))
            xyz = rng.uniform(0, 6, (n, 3))
            cloud = PointCloud(xyz)
            seed = int(rng.integers(0, n))
            got = set(expand_cluster(cloud, np.arange(n), seed, params).members.tolist())
            assert got == brute_component(xyz, seed, 0.4)

    def test_respects_nonground_restriction(self, rng):
        # chain 0-1-2; removing 1 from the working set splits it
        cloud = PointCloud([[0, 0, 0], [0.4, 0, 0], [0.8, 0, 0]])
        full = expand_cluster(cloud, [0, 1, 2], 0, WIDE_OPEN)
        assert full.members.tolist() == [0, 1, 2]
        split = expand_cluster(cloud, [0, 2], 0, WIDE_OPEN)
        assert split.members.tolist() == [0]

    def test_determinism(self, rng):
        xyz = rng.uniform(0, 5, (400, 3))
        cloud = PointCloud(xyz)
        a = expand_cluster(cloud, np.arange(400), 7, WIDE_OPEN)
        b = expand_cluster(cloud, np.arange(400), 7, WIDE_OPEN)
        assert np.array_equal(a.members, b.members)

    def test_downsampling_keeps_seed(self, rng):
        xyz = rng.normal(0, 0.5, (3000, 3))
        cloud = PointCloud(xyz)
        params = ClusterParams(epsilon=0.5, prune_radius=100, downsample_cell=0.2,
                               max_points=100)
        cluster = expand_cluster(cloud, np.arange(3000), 42, params)
        assert cluster.downsampled
        assert 42 in cluster.members


# -------------------------------------------------------- restore_full_resolution

class TestRestoreFullResolution:
    def test_identity_without_downsampling(self, rng):
        xyz = rng.normal(0, 0.3, (200, 3))
        cloud = PointCloud(xyz)
        cluster = expand_cluster(cloud, np.arange(200), 0, WIDE_OPEN)
        restored = restore_full_resolution(cloud, cluster, 0.5)
        assert np.array_equal(restored, cluster.members)

    def test_covoxel_pair_recovered(self):
        # two points share a voxel; only the survivor joins the BFS
        xyz = np.array([[0, 0, 0], [0.01, 0, 0], [0.3, 0, 0]])
        cloud = PointCloud(xyz)
        params = ClusterParams(epsilon=0.5, prune_radius=100, downsample_cell=0.1,
                               max_points=2)
        cluster = expand_cluster(cloud, [0, 1, 2], 2, params)
        restored = restore_full_resolution(cloud, cluster, 0.5)
        assert set(restored.tolist()) == {0, 1, 2}

    def test_matches_brute_force_dilation(self, rng):
        xyz = rng.uniform(0, 4, (2500, 3))
        cloud = PointCloud(xyz)
        params = ClusterParams(epsilon=0.45, prune_radius=1e6, downsample_cell=0.3,
                               max_points=500)
        seed = 11
        cluster = expand_cluster(cloud, np.arange(2500), seed, params)
        restored = set(restore_full_resolution(cloud, cluster, 0.45).tolist())
        want = brute_dilation(xyz, set(cluster.members.tolist()),
                              cluster.candidates.tolist(), 0.45)
        assert restored == want

    def test_superset_of_members(self, rng):
        xyz = rng.normal(0, 1, (4000, 3))
        cloud = PointCloud(xyz)
        params = ClusterParams(epsilon=0.5, prune_radius=100, downsample_cell=0.25,
                               max_points=300)
        cluster = expand_cluster(cloud, np.arange(4000), 0, params)
        restored = restore_full_resolution(cloud, cluster, 0.5)
        assert np.isin(cluster.members, restored).all()


# ---------------------------------------------------------------- invariants

class TestClusterInvariants:
    def test_cluster_never_contains_ground(self, rng):
        xyz = rng.uniform(0, 5, (1000, 3))
        cloud = PointCloud(xyz)
        nonground = np.arange(0, 1000, 2)  # evens only
        cluster = expand_cluster(cloud, nonground, 0, WIDE_OPEN)
        assert np.isin(cluster.members, nonground).all()

    def test_seed_always_member(self, rng):
        xyz = rng.uniform(0, 8, (500, 3))
        cloud = PointCloud(xyz)
        for seed in (0, 250, 499):
            cluster = expand_cluster(cloud, np.arange(500), seed, WIDE_OPEN)
            assert seed in cluster.members


class TestSeededClusterExpander:
    def test_estimator_matches_functional_path(self, rng):
        blob_a = rng.normal(0, 0.15, (80, 3))
        blob_b = rng.normal(0, 0.15, (80, 3)) + [4, 0, 0]
        X = np.vstack([blob_a, blob_b])
        est = SeededClusterExpander(epsilon=0.5, prune_radius=100)
        labels = est.fit_predict(X, seed=3)
        assert labels[:80].all() and not labels[80:].any()

    def test_exclude_mask(self, rng):
        X = np.vstack([rng.normal(0, 0.1, (50, 3)), rng.normal(0, 0.1, (50, 3))])
        exclude = np.zeros(100, dtype=bool)
        exclude[50:] = True
        est = SeededClusterExpander(prune_radius=100).fit(X, seed=0, exclude_mask=exclude)
        assert not est.labels_[50:].any()

    def test_get_params(self):
        est = SeededClusterExpander(epsilon=0.7)
        assert est.get_params()["epsilon"] == 0.7
