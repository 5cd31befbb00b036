"""Ground-plane estimation and removal.

Seeds with the lowest points, fits a plane through their covariance (smallest
singular direction), then alternates distance-threshold resampling with
refitting until the normal stops rotating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator

from .cloud import PointCloud
from .errors import DegenerateGeometryError, InsufficientPointsError, ParameterError
from .validation import check_fraction, check_points_array, check_positive


@dataclass(frozen=True)
class PlaneModel:
    """Plane {p : normal . p = offset} with unit, up-facing normal."""

    normal: np.ndarray
    offset: float
    inliers: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def distances(self, xyz: np.ndarray) -> np.ndarray:
        return np.abs(xyz @ self.normal - self.offset)


@dataclass
class GroundParams:
    seed_fraction: float = 0.1
    dist_thresh: float = 0.2
    max_iterations: int = 10
    convergence_angle_deg: float = 0.5
    convergence_offset: float = 1e-3  # meters; see _iterate_plane
    tile_size: float | None = None    # optional per-tile plane mode

    def __post_init__(self):
        check_fraction(self.seed_fraction, "seed_fraction")
        check_positive(self.dist_thresh, "dist_thresh")
        if self.max_iterations < 1:
            raise ParameterError("max_iterations must be >= 1")
        if self.convergence_angle_deg < 0 or self.convergence_offset < 0:
            raise ParameterError("convergence tolerances must be >= 0")
        if self.tile_size is not None:
            check_positive(self.tile_size, "tile_size")


def seed_ground_set(cloud: PointCloud, seed_fraction: float) -> np.ndarray:
    """The ceil(seed_fraction * n) indices with smallest z, ties by index order."""
    check_fraction(seed_fraction, "seed_fraction")
    k = math.ceil(seed_fraction * cloud.n)
    order = np.argsort(cloud.xyz[:, 2], kind="stable")
    return np.sort(order[:k])


def _canonical_normal(normal: np.ndarray) -> np.ndarray:
    if normal[2] < 0:
        return -normal
    if normal[2] == 0:
        for c in normal:
            if c != 0:
                return normal if c > 0 else -normal
    return normal


def fit_plane_svd(cloud: PointCloud, indices) -> PlaneModel:
    """Least-squares plane through the indexed points.

    The normal is the direction of least dispersion: the right singular vector
    of the centered coordinates for the smallest singular value (equivalently
    the smallest-eigenvalue eigenvector of the covariance matrix).
    """
    idx = np.asarray(indices, dtype=np.int64).reshape(-1)
    if idx.size < 3:
        raise InsufficientPointsError(f"plane fit needs >= 3 points, got {idx.size}")
    pts = cloud.xyz[idx]
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s[1] <= 1e-10 * max(s[0], 1e-12):
        raise DegenerateGeometryError("points are collinear; plane is not determined")
    normal = _canonical_normal(vt[2])
    normal = normal / np.linalg.norm(normal)
    return PlaneModel(normal=normal, offset=float(normal @ centroid), inliers=np.sort(idx))


def resample_ground(cloud: PointCloud, plane: PlaneModel, thresh: float) -> np.ndarray:
    """Indices with point-to-plane distance strictly below thresh."""
    check_positive(thresh, "thresh")
    return np.nonzero(plane.distances(cloud.xyz) < thresh)[0]


def _normal_rotation_deg(a: np.ndarray, b: np.ndarray) -> float:
    return math.degrees(math.acos(min(1.0, max(-1.0, float(a @ b)))))


def _iterate_plane(cloud: PointCloud, params: GroundParams) -> PlaneModel:
    seed = seed_ground_set(cloud, params.seed_fraction)
    if seed.size < 3:  # tiny frames: a plane still needs three points
        order = np.argsort(cloud.xyz[:, 2], kind="stable")
        seed = np.sort(order[:3])
    plane = fit_plane_svd(cloud, seed)
    for _ in range(params.max_iterations):
        inliers = resample_ground(cloud, plane, params.dist_thresh)
        if inliers.size < 3:
            break  # keep the last well-determined plane
        refit = fit_plane_svd(cloud, inliers)
        rotation = _normal_rotation_deg(plane.normal, refit.normal)
        # the lowest-z seed biases the first offsets low, so the plane keeps
        # recentering for a few rounds after the normal has settled; require
        # both to stop moving
        shift = abs(refit.offset - plane.offset)
        plane = refit
        if rotation < params.convergence_angle_deg and shift < params.convergence_offset:
            break
    return plane


def remove_ground(cloud: PointCloud, params: GroundParams | None = None
                  ) -> tuple[PlaneModel, np.ndarray]:
    """Estimate the ground plane and return (plane, non-ground indices).

    The returned plane's inlier set is recomputed against the final plane, so
    it is exactly self-consistent with `resample_ground`. A frame where every
    point sits within the threshold yields an empty non-ground set.
    """
    params = params or GroundParams()
    if cloud.n < 3:
        raise InsufficientPointsError("ground removal needs >= 3 points")
    if params.tile_size is not None:
        return _remove_ground_tiled(cloud, params)
    plane = _iterate_plane(cloud, params)
    inliers = resample_ground(cloud, plane, params.dist_thresh)
    plane = replace(plane, inliers=inliers)
    mask = np.ones(cloud.n, dtype=bool)
    mask[inliers] = False
    return plane, np.nonzero(mask)[0]


_MIN_TILE_POINTS = 30


def _remove_ground_tiled(cloud: PointCloud, params: GroundParams
                         ) -> tuple[PlaneModel, np.ndarray]:
    """Per-tile planes over a horizontal grid; small/degenerate tiles fall back
    to the global plane. The returned PlaneModel carries the global fit with
    the union of per-tile inlier sets."""
    flat = GroundParams(
        seed_fraction=params.seed_fraction,
        dist_thresh=params.dist_thresh,
        max_iterations=params.max_iterations,
        convergence_angle_deg=params.convergence_angle_deg,
    )
    global_plane = _iterate_plane(cloud, flat)
    keys = np.floor(cloud.xyz[:, :2] / params.tile_size).astype(np.int64)
    _, inverse = np.unique(keys, axis=0, return_inverse=True)
    ground_mask = np.zeros(cloud.n, dtype=bool)
    for g in range(inverse.max() + 1):
        tile_idx = np.nonzero(inverse == g)[0]
        plane = global_plane
        if tile_idx.size >= _MIN_TILE_POINTS:
            sub = PointCloud(cloud.xyz[tile_idx], cloud.intensity[tile_idx])
            try:
                plane_local = _iterate_plane(sub, flat)
            except (InsufficientPointsError, DegenerateGeometryError):
                plane_local = None
            if plane_local is not None:
                ground_mask[tile_idx] = plane_local.distances(cloud.xyz[tile_idx]) < params.dist_thresh
                continue
        ground_mask[tile_idx] = plane.distances(cloud.xyz[tile_idx]) < params.dist_thresh
    inliers = np.nonzero(ground_mask)[0]
    return replace(global_plane, inliers=inliers), np.nonzero(~ground_mask)[0]


class GroundPlaneEstimator(BaseEstimator):
    """Estimator-style wrapper: fit(X) learns the plane, predict(X) flags ground.

    X is an (n, 3) array of sensor-frame coordinates. After fit:
    ``normal_``, ``offset_``, ``inlier_mask_``, ``nonground_indices_``.
    """

    def __init__(self, seed_fraction=0.1, dist_thresh=0.2, max_iterations=10,
                 convergence_angle_deg=0.5, tile_size=None):
        self.seed_fraction = seed_fraction
        self.dist_thresh = dist_thresh
        self.max_iterations = max_iterations
        self.convergence_angle_deg = convergence_angle_deg
        self.tile_size = tile_size

    def _params(self) -> GroundParams:
        return GroundParams(
            seed_fraction=self.seed_fraction,
            dist_thresh=self.dist_thresh,
            max_iterations=self.max_iterations,
            convergence_angle_deg=self.convergence_angle_deg,
            tile_size=self.tile_size,
        )

    def fit(self, X, y=None):
        X = check_points_array(X, 3, min_points=3)
        plane, nonground = remove_ground(PointCloud(X), self._params())
        self.normal_ = plane.normal
        self.offset_ = plane.offset
        self.plane_ = plane
        mask = np.zeros(X.shape[0], dtype=bool)
        mask[plane.inliers] = True
        self.inlier_mask_ = mask
        self.nonground_indices_ = nonground
        return self

    def predict(self, X) -> np.ndarray:
        """Boolean ground membership by distance to the fitted plane."""
        X = check_points_array(X, 3)
        return np.abs(X @ self.normal_ - self.offset_) < self.dist_thresh

    def fit_predict(self, X, y=None) -> np.ndarray:
        return self.fit(X).inlier_mask_
