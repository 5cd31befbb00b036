"""Top-view oriented rectangle estimation by exhaustive heading search.

For each candidate heading the cluster is projected onto two perpendicular
axes; each point is assigned to whichever axis-edge it is closest to, and the
heading minimizing the summed variance of those edge distances wins. Edges are
then placed at the min/max projections, so every cluster point lies inside the
fitted rectangle by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator

from .cloud import PointCloud
from .errors import DegenerateClusterError, ParameterError
from .validation import check_points_array

CLASS_LABELS = ("car", "pedestrian", "cyclist", "truck", "van", "other")

# Slack for boundary membership tests; keeps "all cluster points inside the
# fitted box" exact under floating-point rotation round-off.
BOUNDARY_EPS = 1e-9

_TWO_PI = 2.0 * math.pi
# Yaw this close to pi would render as "3.141593" (> pi) in 6-decimal exports;
# snap to the geometrically identical 0 so formatting round-trips bytewise.
_YAW_WRAP_EPS = 5e-7


def normalize_yaw(yaw: float) -> float:
    """Wrap into [0, pi); a box is symmetric under half-turn rotation."""
    yaw = float(yaw) % math.pi
    if math.pi - yaw < _YAW_WRAP_EPS:
        yaw = 0.0
    return yaw


@dataclass(frozen=True)
class TopViewBox:
    """Oriented top-view rectangle: center, width <= length, yaw along length.

    Construction normalizes: dimensions are swapped (with a quarter-turn) so
    length >= width, and yaw wraps into [0, pi).
    """

    cx: float
    cy: float
    width: float
    length: float
    yaw: float
    label: str = "other"
    z_min: float | None = None
    z_max: float | None = None

    def __post_init__(self):
        for name in ("cx", "cy", "width", "length", "yaw"):
            try:
                v = float(getattr(self, name))
            except (TypeError, ValueError) as exc:
                raise ParameterError(f"{name} must be a number") from exc
            if not math.isfinite(v):
                raise ParameterError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)
        if self.width <= 0 or self.length <= 0:
            raise ParameterError("box dimensions must be positive")
        if self.label not in CLASS_LABELS:
            raise ParameterError(f"unknown class label {self.label!r}")
        if (self.z_min is None) != (self.z_max is None):
            raise ParameterError("z_min and z_max must be set together")
        if self.z_min is not None:
            object.__setattr__(self, "z_min", float(self.z_min))
            object.__setattr__(self, "z_max", float(self.z_max))
            if self.z_max < self.z_min:
                raise ParameterError("z_max must be >= z_min")
        w, l, yaw = self.width, self.length, self.yaw
        if l < w:
            w, l = l, w
            yaw = yaw + math.pi / 2
        object.__setattr__(self, "width", w)
        object.__setattr__(self, "length", l)
        object.__setattr__(self, "yaw", normalize_yaw(yaw))

    @property
    def area(self) -> float:
        return self.width * self.length

    def corners(self) -> np.ndarray:
        """(4, 2) corner coordinates in counter-clockwise order."""
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        hl, hw = self.length / 2, self.width / 2
        local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + np.array([self.cx, self.cy])

    def with_label(self, label: str) -> "TopViewBox":
        return replace(self, label=label)

    def with_z_extent(self, z_min: float, z_max: float) -> "TopViewBox":
        return replace(self, z_min=float(z_min), z_max=float(z_max))


@dataclass
class FitParams:
    theta_step_deg: float = 0.25
    min_cluster_size: int = 5

    def __post_init__(self):
        step = math.radians(self.theta_step_deg)
        if not 0 < step <= math.pi / 180:
            raise ParameterError("theta_step_deg must be in (0, 1] degrees")
        if self.min_cluster_size < 2:
            raise ParameterError("min_cluster_size must be >= 2")

    @property
    def theta_step(self) -> float:
        return math.radians(self.theta_step_deg)

    def grid(self) -> np.ndarray:
        """Candidate headings over [0, pi/2): the loss is pi/2-periodic."""
        n = int(math.ceil(math.pi / 2 / self.theta_step))
        return np.arange(n) * self.theta_step


def _edge_distance_stats(points: np.ndarray, thetas: np.ndarray):
    """Projections and per-heading partitioned edge distances.

    Returns (c1, c2, d1, d2, mask1) where arrays are (n, T); mask1 marks the
    points assigned to the first axis (d1 < d2; ties go to the second).
    """
    e1 = np.stack([np.cos(thetas), np.sin(thetas)])   # (2, T)
    e2 = np.stack([-np.sin(thetas), np.cos(thetas)])
    c1 = points @ e1
    c2 = points @ e2
    d1 = np.minimum(c1 - c1.min(axis=0), c1.max(axis=0) - c1)
    d2 = np.minimum(c2 - c2.min(axis=0), c2.max(axis=0) - c2)
    return c1, c2, d1, d2, d1 < d2


def _masked_variance(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Column-wise population variance over the masked entries; empty -> 0."""
    count = mask.sum(axis=0)
    safe = np.maximum(count, 1)
    total = np.where(mask, values, 0.0).sum(axis=0)
    total_sq = np.where(mask, values * values, 0.0).sum(axis=0)
    mean = total / safe
    var = total_sq / safe - mean * mean
    return np.where(count > 0, np.maximum(var, 0.0), 0.0)


def variance_loss_grid(points, thetas) -> np.ndarray:
    """Fit loss Var(d1 | closer to axis 1) + Var(d2 | closer to axis 2) per heading."""
    points = check_points_array(points, 2, min_points=2, name="points")
    thetas = np.asarray(thetas, dtype=np.float64).reshape(-1)
    _, _, d1, d2, mask1 = _edge_distance_stats(points, thetas)
    return _masked_variance(d1, mask1) + _masked_variance(d2, ~mask1)


def variance_loss(points, theta: float) -> float:
    """Loss for a single heading; lower is a better rectangle fit."""
    return float(variance_loss_grid(points, [theta])[0])


def fit_rectangle(points, params: FitParams | None = None) -> TopViewBox:
    """Search headings on a grid and wrap the min/max projections in a box.

    Ties in the loss resolve to the smallest heading. Raises
    DegenerateClusterError for clusters too small or too thin to bound.
    """
    params = params or FitParams()
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ParameterError(f"expected (n, 2) points, got {points.shape}")
    if points.shape[0] < params.min_cluster_size:
        raise DegenerateClusterError(
            f"{points.shape[0]} points < minimum {params.min_cluster_size}; annotate manually"
        )
    thetas = params.grid()
    losses = variance_loss_grid(points, thetas)
    best = int(np.argmin(losses))  # first minimum = smallest heading
    theta = float(thetas[best])
    c, s = math.cos(theta), math.sin(theta)
    c1 = points @ np.array([c, s])
    c2 = points @ np.array([-s, c])
    lo1, hi1 = c1.min(), c1.max()
    lo2, hi2 = c2.min(), c2.max()
    ext1, ext2 = hi1 - lo1, hi2 - lo2
    if min(ext1, ext2) <= 1e-12:
        raise DegenerateClusterError("cluster is collinear; cannot bound a rectangle")
    m1, m2 = (lo1 + hi1) / 2, (lo2 + hi2) / 2
    cx = m1 * c + m2 * (-s)
    cy = m1 * s + m2 * c
    if ext1 >= ext2:
        length, width, yaw = ext1, ext2, theta
    else:
        length, width, yaw = ext2, ext1, theta + math.pi / 2
    return TopViewBox(cx=cx, cy=cy, width=float(width), length=float(length), yaw=yaw)


def points_in_box(cloud: PointCloud, box: TopViewBox) -> np.ndarray:
    """Indices whose (x, y) lies in the rectangle (boundary inclusive).

    z is ignored unless the box carries a z extent, which is then also
    required (inclusive).
    """
    dx = cloud.xyz[:, 0] - box.cx
    dy = cloud.xyz[:, 1] - box.cy
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    u = dx * c + dy * s
    v = -dx * s + dy * c
    inside = (np.abs(u) <= box.length / 2 + BOUNDARY_EPS) & (
        np.abs(v) <= box.width / 2 + BOUNDARY_EPS
    )
    if box.z_min is not None:
        z = cloud.xyz[:, 2]
        inside &= (z >= box.z_min - BOUNDARY_EPS) & (z <= box.z_max + BOUNDARY_EPS)
    return np.nonzero(inside)[0]


class RectangleEstimator(BaseEstimator):
    """Estimator-style wrapper: fit(X) on (n, 2) points exposes the box.

    After fit: ``box_``, ``center_``, ``width_``, ``length_``, ``yaw_``.
    ``predict(X)`` returns boolean membership of 2D points in the fitted box.
    """

    def __init__(self, theta_step_deg=0.25, min_cluster_size=5):
        self.theta_step_deg = theta_step_deg
        self.min_cluster_size = min_cluster_size

    def fit(self, X, y=None):
        X = check_points_array(X, 2)
        box = fit_rectangle(X, FitParams(self.theta_step_deg, self.min_cluster_size))
        self.box_ = box
        self.center_ = np.array([box.cx, box.cy])
        self.width_ = box.width
        self.length_ = box.length
        self.yaw_ = box.yaw
        return self

    def predict(self, X) -> np.ndarray:
        X = check_points_array(X, 2)
        box = self.box_
        dx = X[:, 0] - box.cx
        dy = X[:, 1] - box.cy
        c, s = math.cos(box.yaw), math.sin(box.yaw)
        u = dx * c + dy * s
        v = -dx * s + dy * c
        return (np.abs(u) <= box.length / 2 + BOUNDARY_EPS) & (
            np.abs(v) <= box.width / 2 + BOUNDARY_EPS
        )
