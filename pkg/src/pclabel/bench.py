"""Latency benchmark for the interactive one-click path.

Builds a synthetic 100k-point street scene, runs ground removal once (the
per-frame cost paid before any interaction), then times click -> box proposal
end to end. Run via ``pclabel bench``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .boxfit import FitParams
from .cloud import PointCloud
from .cluster import ClusterParams
from .ground import GroundParams, remove_ground
from .pipeline import one_click_box


@dataclass
class BenchResult:
    n_points: int
    ground_ms: float
    click_ms_median: float
    click_ms_max: float
    cluster_size: int

    def summary(self) -> str:
        return (
            f"frame: {self.n_points} points\n"
            f"ground removal: {self.ground_ms:.1f} ms\n"
            f"one-click median: {self.click_ms_median:.1f} ms "
            f"(max {self.click_ms_max:.1f} ms, cluster {self.cluster_size} pts)"
        )


def synthetic_street_frame(n_points: int = 100_000, n_cars: int = 8,
                           seed: int = 7) -> tuple[PointCloud, np.ndarray]:
    """Ground plane plus car-sized boxes; returns (cloud, car centers)."""
    rng = np.random.default_rng(seed)
    n_obj = 2000 * n_cars
    n_ground = n_points - n_obj
    gx = rng.uniform(-40, 40, n_ground)
    gy = rng.uniform(-40, 40, n_ground)
    gz = rng.normal(0, 0.02, n_ground)
    ground = np.column_stack([gx, gy, gz])
    centers = np.column_stack([
        rng.uniform(-30, 30, n_cars),
        rng.uniform(-30, 30, n_cars),
        np.zeros(n_cars),
    ])
    objs = []
    for c in centers:
        local = np.column_stack([
            rng.uniform(-2.2, 2.2, 2000),
            rng.uniform(-0.9, 0.9, 2000),
            rng.uniform(0.3, 1.6, 2000),
        ])
        objs.append(local + c)
    xyz = np.vstack([ground] + objs)
    return PointCloud(xyz), centers


def run_click_benchmark(n_points: int = 100_000, repeats: int = 5,
                        seed: int = 7) -> BenchResult:
    cloud, centers = synthetic_street_frame(n_points, seed=seed)
    gp = GroundParams()
    t0 = time.perf_counter()
    _, nonground = remove_ground(cloud, gp)
    ground_ms = (time.perf_counter() - t0) * 1000

    cparams = ClusterParams()
    fparams = FitParams()
    # pick a seed point on the first car
    target = centers[0]
    dxy = cloud.xyz[nonground, :2] - target[:2]
    seed_idx = int(nonground[np.argmin((dxy ** 2).sum(axis=1))])

    times = []
    cluster_size = 0
    for _ in range(repeats):
        t0 = time.perf_counter()
        _, members, _ = one_click_box(cloud, nonground, seed_idx, cparams, fparams)
        times.append((time.perf_counter() - t0) * 1000)
        cluster_size = members.size
    times.sort()
    return BenchResult(
        n_points=cloud.n,
        ground_ms=ground_ms,
        click_ms_median=times[len(times) // 2],
        click_ms_max=times[-1],
        cluster_size=cluster_size,
    )
