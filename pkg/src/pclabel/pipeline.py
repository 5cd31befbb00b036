"""Orchestration of the interactive loop: ground removal -> click -> box.

These helpers are the single code path shared by the HTTP service, the batch
CLI, and the latency benchmark.
"""

from __future__ import annotations

import numpy as np

from .boxfit import FitParams, TopViewBox, fit_rectangle
from .cloud import PointCloud
from .cluster import Cluster, ClusterParams, expand_cluster, restore_full_resolution
from .errors import NoSeedError
from .ground import GroundParams, PlaneModel, remove_ground


def one_click_box(cloud: PointCloud, nonground, seed: int,
                  cluster_params: ClusterParams | None = None,
                  fit_params: FitParams | None = None
                  ) -> tuple[TopViewBox, np.ndarray, Cluster]:
    """Expand a cluster from the clicked point and wrap it in a top-view box.

    Returns (box with z extent, full-resolution member indices, raw cluster).
    """
    cluster_params = cluster_params or ClusterParams()
    fit_params = fit_params or FitParams()
    cluster = expand_cluster(cloud, nonground, seed, cluster_params)
    members = restore_full_resolution(cloud, cluster, cluster_params.epsilon)
    box = fit_rectangle(cloud.xyz[members][:, :2], fit_params)
    z = cloud.xyz[members][:, 2]
    box = box.with_z_extent(float(z.min()), float(z.max()))
    return box, members, cluster


def resolve_click_seed(cloud: PointCloud, nonground, x: float, y: float,
                       max_distance: float = 1.0) -> int:
    """Nearest non-ground point within max_distance (horizontal) of a ray click."""
    nonground = np.asarray(nonground, dtype=np.int64)
    if nonground.size == 0:
        raise NoSeedError("frame has no non-ground points")
    dxy = cloud.xyz[nonground, :2] - np.array([x, y])
    d2 = (dxy ** 2).sum(axis=1)
    best = int(np.argmin(d2))
    if d2[best] > max_distance ** 2:
        raise NoSeedError(f"no point within {max_distance} m of the click")
    return int(nonground[best])


def prepare_frame(cloud: PointCloud, ground_params: GroundParams | None = None
                  ) -> tuple[PlaneModel, np.ndarray]:
    """Ground removal as run once per frame before any interaction."""
    return remove_ground(cloud, ground_params or GroundParams())
