"""Constant-acceleration Kalman tracking of box centers across frames.

Each annotated object owns one filter over [px, py, vx, vy, ax, ay]; only the
center position is observed (from the human-confirmed box), and the covariance
update uses the Joseph form so positive semi-definiteness survives rounding.
Rigid objects keep their box dimensions frozen between frames; non-rigid ones
are re-fit from scratch around the predicted center.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .boxfit import FitParams, TopViewBox, fit_rectangle, variance_loss_grid
from .cloud import PointCloud
from .cluster import ClusterParams, expand_cluster, restore_full_resolution
from .errors import ParameterError, TrackLostError
from .validation import check_index_set, check_positive

RIGID_CLASSES = frozenset({"car", "van", "truck"})

_H = np.array([[1.0, 0, 0, 0, 0, 0],
               [0, 1.0, 0, 0, 0, 0]])


def is_rigid_class(label: str) -> bool:
    return label in RIGID_CLASSES


@dataclass
class KalmanParams:
    """Filter constants; diagonals are variances in squared state units."""

    dt: float = 0.1
    q_diag: tuple = (0.01, 0.01, 0.1, 0.1, 1.0, 1.0)
    r_diag: tuple = (0.05 ** 2, 0.05 ** 2)
    p0_diag: tuple = (0.25, 0.25, 1.0, 1.0, 1.0, 1.0)

    def __post_init__(self):
        check_positive(self.dt, "dt")
        for name in ("q_diag", "r_diag", "p0_diag"):
            setattr(self, name, tuple(float(v) for v in getattr(self, name)))
        if len(self.q_diag) != 6 or len(self.p0_diag) != 6 or len(self.r_diag) != 2:
            raise ParameterError("q_diag/p0_diag need 6 entries, r_diag needs 2")
        for name in ("q_diag", "r_diag", "p0_diag"):
            if any(v < 0 for v in getattr(self, name)):
                raise ParameterError(f"{name} entries must be >= 0")

    def transition(self) -> np.ndarray:
        dt = self.dt
        h = 0.5 * dt * dt
        return np.array([
            [1, 0, dt, 0, h, 0],
            [0, 1, 0, dt, 0, h],
            [0, 0, 1, 0, dt, 0],
            [0, 0, 0, 1, 0, dt],
            [0, 0, 0, 0, 1, 0],
            [0, 0, 0, 0, 0, 1],
        ], dtype=np.float64)

    def process_noise(self) -> np.ndarray:
        return np.diag(self.q_diag).astype(np.float64)

    def measurement_noise(self) -> np.ndarray:
        return np.diag(self.r_diag).astype(np.float64)

    def initial_covariance(self) -> np.ndarray:
        return np.diag(self.p0_diag).astype(np.float64)


@dataclass
class TrackState:
    """Filter state for one annotated object."""

    x: np.ndarray
    P: np.ndarray
    annotation_id: str = ""
    rigid: bool = False

    @property
    def position(self) -> np.ndarray:
        return self.x[:2]

    def __eq__(self, other):
        return (
            isinstance(other, TrackState)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.P, other.P)
            and self.annotation_id == other.annotation_id
            and self.rigid == other.rigid
        )


def _symmetrized(P: np.ndarray) -> np.ndarray:
    return (P + P.T) / 2


def init_track(box: TopViewBox, rigid: bool, params: KalmanParams,
               annotation_id: str = "") -> TrackState:
    """Start a filter at the box center with zero velocity and acceleration."""
    x = np.array([box.cx, box.cy, 0.0, 0.0, 0.0, 0.0])
    return TrackState(x=x, P=params.initial_covariance(), annotation_id=annotation_id,
                      rigid=rigid)


def predict(ts: TrackState, params: KalmanParams) -> TrackState:
    """Advance one sampling interval: x <- Fx, P <- FPF' + Q."""
    F = params.transition()
    x = F @ ts.x
    P = _symmetrized(F @ ts.P @ F.T + params.process_noise())
    return TrackState(x=x, P=P, annotation_id=ts.annotation_id, rigid=ts.rigid)


def update(ts: TrackState, z, params: KalmanParams) -> TrackState:
    """Fold an observed center into the state (Joseph-form covariance update)."""
    z = np.asarray(z, dtype=np.float64).reshape(2)
    if not np.isfinite(z).all():
        raise ParameterError("observation must be finite")
    R = params.measurement_noise()
    P = ts.P
    S = R + _H @ P @ _H.T
    K = np.linalg.solve(S.T, (P @ _H.T).T).T  # P H' S^-1; raises if S singular
    innovation = z - _H @ ts.x
    x = ts.x + K @ innovation
    I_KH = np.eye(6) - K @ _H
    P_new = _symmetrized(I_KH @ P @ I_KH.T + K @ R @ K.T)
    return TrackState(x=x, P=P_new, annotation_id=ts.annotation_id, rigid=ts.rigid)


def _fit_rigid_rectangle(points: np.ndarray, prior: TopViewBox,
                         fit_params: FitParams) -> TopViewBox:
    """Heading search with (width, length) frozen to the prior box.

    The center comes from the projection-interval midpoints under the best
    heading; the longer projected extent decides which axis carries the frozen
    length.
    """
    thetas = fit_params.grid()
    losses = variance_loss_grid(points, thetas)
    theta = float(thetas[int(np.argmin(losses))])
    c, s = math.cos(theta), math.sin(theta)
    c1 = points @ np.array([c, s])
    c2 = points @ np.array([-s, c])
    m1 = (c1.min() + c1.max()) / 2
    m2 = (c2.min() + c2.max()) / 2
    cx = m1 * c + m2 * (-s)
    cy = m1 * s + m2 * c
    yaw = theta if (c1.max() - c1.min()) >= (c2.max() - c2.min()) else theta + math.pi / 2
    return TopViewBox(cx=cx, cy=cy, width=prior.width, length=prior.length, yaw=yaw,
                      label=prior.label)


def propagate_annotation(cloud: PointCloud, nonground, ts: TrackState,
                         prior_box: TopViewBox, cluster_params: ClusterParams,
                         fit_params: FitParams) -> tuple[TopViewBox, np.ndarray]:
    """Propose the box on a new frame from a predicted track state.

    The predicted center acts as a synthetic click: the nearest non-ground
    point within the prune radius seeds cluster expansion. Rigid objects keep
    their prior dimensions bit-identical and only re-estimate heading and
    center; non-rigid objects get a full rectangle fit. Returns the proposal
    and the full-resolution cluster indices. Raises TrackLostError when no
    seed is reachable.
    """
    nonground = check_index_set(nonground, cloud.n, "nonground")
    if nonground.size == 0:
        raise TrackLostError("frame has no non-ground points")
    center = ts.position
    dxy = cloud.xyz[nonground, :2] - center
    d2 = (dxy ** 2).sum(axis=1)
    nearest = int(np.argmin(d2))
    if d2[nearest] > cluster_params.prune_radius ** 2:
        raise TrackLostError(
            f"no non-ground point within {cluster_params.prune_radius} m of the prediction"
        )
    seed = int(nonground[nearest])
    cluster = expand_cluster(cloud, nonground, seed, cluster_params)
    members = restore_full_resolution(cloud, cluster, cluster_params.epsilon)
    pts2 = cloud.xyz[members][:, :2]
    if ts.rigid:
        if pts2.shape[0] < 2:
            raise TrackLostError("cluster too small to orient the rigid box")
        box = _fit_rigid_rectangle(pts2, prior_box, fit_params)
    else:
        box = fit_rectangle(pts2, fit_params).with_label(prior_box.label)
    z = cloud.xyz[members][:, 2]
    box = box.with_z_extent(float(z.min()), float(z.max()))
    return box, members
