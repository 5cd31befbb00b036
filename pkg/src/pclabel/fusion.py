"""Calibrated cloud-image projection, mask label transfer, and crop geometry.

Projection uses a homogeneous 3x4 matrix with perspective divide. Label
transfer paints advisory pre-labels by looking up each in-view point's pixel
in an externally produced instance mask; no occlusion reasoning is attempted.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud
from .errors import CalibrationError, FormatError, NotVisibleError
from .validation import check_index_set

_PROBE_DISTANCES = (4.0, 8.0, 15.0, 30.0, 60.0)
_PROBE_HEIGHTS = (-1.5, 0.0, 1.5)


@dataclass(frozen=True)
class CalibrationModel:
    """Point -> pixel projection for one camera.

    ``projection`` is the full 3x4 homogeneous matrix (intrinsics,
    rectification and sensor-to-camera extrinsics already composed); an affine
    model is the special case with last row [0, 0, 1, 0] scaled.
    """

    projection: np.ndarray
    image_width: int
    image_height: int

    def __post_init__(self):
        mat = np.asarray(self.projection, dtype=np.float64).reshape(3, 4)
        if not np.isfinite(mat).all():
            raise CalibrationError("projection matrix contains non-finite values")
        if self.image_width < 1 or self.image_height < 1:
            raise CalibrationError("image dimensions must be positive")
        object.__setattr__(self, "projection", mat)
        if not self._probe_ok():
            raise CalibrationError(
                "projection maps no probe point with positive depth into image bounds"
            )

    def _probe_ok(self) -> bool:
        dirs = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, 1), (1, -1), (-1, -1)]
        probes = [
            (d * ux, d * uy, h)
            for d in _PROBE_DISTANCES
            for ux, uy in dirs
            for h in _PROBE_HEIGHTS
        ]
        uv, depth = project_points(self, np.asarray(probes, dtype=np.float64))
        ok = (
            (depth > 0)
            & (uv[:, 0] >= 0)
            & (uv[:, 0] < self.image_width)
            & (uv[:, 1] >= 0)
            & (uv[:, 1] < self.image_height)
        )
        return bool(ok.any())


def load_kitti_calib(path, image_width: int, image_height: int,
                     camera: str = "P2") -> CalibrationModel:
    """Compose a KITTI calib text file (P2/R0_rect/Tr_velo_to_cam) into one matrix."""
    entries = {}
    try:
        with open(path) as fh:
            for line in fh:
                if ":" not in line:
                    continue
                key, _, rest = line.partition(":")
                vals = rest.split()
                if vals:
                    entries[key.strip()] = np.array([float(v) for v in vals])
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise FormatError(f"{path}: non-numeric calibration entry") from exc
    for key in (camera, "R0_rect", "Tr_velo_to_cam"):
        if key not in entries:
            raise FormatError(f"{path}: missing calibration key {key}")
    p = entries[camera].reshape(3, 4)
    r0 = np.eye(4)
    r0[:3, :3] = entries["R0_rect"].reshape(3, 3)
    tr = np.eye(4)
    tr[:3, :] = entries["Tr_velo_to_cam"].reshape(3, 4)
    return CalibrationModel(p @ r0 @ tr, image_width, image_height)


def load_matrix_calib(path, image_width: int, image_height: int) -> CalibrationModel:
    """Read a flat 3x4 projection matrix (12 whitespace-separated numbers)."""
    try:
        with open(path) as fh:
            vals = [float(v) for v in fh.read().split()]
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise FormatError(f"{path}: expected 12 numbers") from exc
    if len(vals) != 12:
        raise FormatError(f"{path}: expected 12 numbers, got {len(vals)}")
    return CalibrationModel(np.array(vals).reshape(3, 4), image_width, image_height)


def project_points(calib: CalibrationModel, xyz) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized projection: (uv, depth). Pixels are meaningless where depth <= 0."""
    xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
    hom = np.hstack([xyz, np.ones((xyz.shape[0], 1))])
    proj = hom @ calib.projection.T
    depth = proj[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        uv = proj[:, :2] / depth[:, None]
    return uv, depth


def project_point(calib: CalibrationModel, p):
    """(u, v, depth) for one point, or None when it lies behind the camera."""
    if hasattr(p, "x"):
        p = (p.x, p.y, p.z)
    uv, depth = project_points(calib, np.asarray(p, dtype=np.float64).reshape(1, 3))
    if depth[0] <= 0:
        return None
    return float(uv[0, 0]), float(uv[0, 1]), float(depth[0])


class SegMask:
    """Per-pixel instance ids (0 = background) with a class label per instance."""

    def __init__(self, instance_ids, class_map: dict[int, str]):
        ids = np.asarray(instance_ids)
        if ids.ndim != 2:
            raise FormatError(f"mask must be 2D, got shape {ids.shape}")
        self.instance_ids = ids.astype(np.int32)
        self.class_map = {int(k): str(v) for k, v in class_map.items()}
        present = set(np.unique(self.instance_ids).tolist()) - {0}
        missing = present - set(self.class_map)
        if missing:
            raise FormatError(f"mask instances without class labels: {sorted(missing)}")

    @property
    def height(self) -> int:
        return self.instance_ids.shape[0]

    @property
    def width(self) -> int:
        return self.instance_ids.shape[1]

    @classmethod
    def load_png(cls, mask_path, class_map_path) -> "SegMask":
        from PIL import Image

        try:
            with Image.open(mask_path) as img:
                ids = np.array(img)
        except OSError as exc:
            raise FormatError(f"cannot read mask {mask_path}: {exc}") from exc
        if ids.ndim == 3:
            raise FormatError(f"{mask_path}: expected a single-channel id image")
        try:
            with open(class_map_path) as fh:
                class_map = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise FormatError(f"cannot read class map {class_map_path}: {exc}") from exc
        return cls(ids, {int(k): v for k, v in class_map.items()})

    def to_rle(self) -> dict:
        flat = self.instance_ids.reshape(-1)
        change = np.nonzero(flat[1:] != flat[:-1])[0] + 1
        starts = np.concatenate(([0], change))
        ends = np.concatenate((change, [flat.size]))
        runs = [[int(flat[a]), int(b - a)] for a, b in zip(starts, ends)]
        return {
            "size": [self.height, self.width],
            "order": "row-major",
            "runs": runs,
            "class_map": {str(k): v for k, v in self.class_map.items()},
        }

    @classmethod
    def from_rle(cls, blob: dict) -> "SegMask":
        try:
            h, w = blob["size"]
            runs = blob["runs"]
            class_map = {int(k): v for k, v in blob["class_map"].items()}
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad RLE mask block: {exc}") from exc
        flat = np.concatenate([np.full(int(n), int(v), dtype=np.int32) for v, n in runs]) \
            if runs else np.zeros(h * w, dtype=np.int32)
        if flat.size != h * w:
            raise FormatError("RLE runs do not cover the mask size")
        return cls(flat.reshape(h, w), class_map)


@dataclass(frozen=True)
class PreLabel:
    """Advisory class label transferred from the image mask to one point."""

    index: int
    label: str
    instance_id: int
    source: str = "mask_transfer"


def transfer_labels(calib: CalibrationModel, cloud: PointCloud,
                    mask: SegMask) -> list[PreLabel]:
    """Assign each in-view point the mask label under its nearest pixel.

    Points behind the camera, off-image, or over background get no pre-label.
    At most one label per point.
    """
    if (mask.height, mask.width) != (calib.image_height, calib.image_width):
        raise CalibrationError(
            f"mask is {mask.width}x{mask.height} but calibration expects "
            f"{calib.image_width}x{calib.image_height}"
        )
    uv, depth = project_points(calib, cloud.xyz)
    with np.errstate(invalid="ignore"):
        u = np.rint(uv[:, 0]).astype(np.int64)
        v = np.rint(uv[:, 1]).astype(np.int64)
    valid = (
        (depth > 0)
        & (u >= 0) & (u < mask.width)
        & (v >= 0) & (v < mask.height)
    )
    out = []
    for i in np.nonzero(valid)[0]:
        inst = int(mask.instance_ids[v[i], u[i]])
        if inst != 0:
            out.append(PreLabel(int(i), mask.class_map[inst], inst))
    return out


def crop_for_cluster(calib: CalibrationModel, cloud: PointCloud, indices,
                     margin: int = 10) -> tuple[int, int, int, int]:
    """Pixel rectangle (u_min, v_min, u_max, v_max) bounding the cluster's
    valid projections, expanded by margin and clamped to the image."""
    idx = check_index_set(indices, cloud.n, "cluster indices")
    uv, depth = project_points(calib, cloud.xyz[idx])
    valid = (
        (depth > 0)
        & (uv[:, 0] >= 0) & (uv[:, 0] < calib.image_width)
        & (uv[:, 1] >= 0) & (uv[:, 1] < calib.image_height)
    )
    if not valid.any():
        raise NotVisibleError("cluster has no projection inside the camera image")
    u = uv[valid, 0]
    v = uv[valid, 1]
    u0 = max(0, int(math.floor(u.min())) - margin)
    v0 = max(0, int(math.floor(v.min())) - margin)
    u1 = min(calib.image_width - 1, int(math.ceil(u.max())) + margin)
    v1 = min(calib.image_height - 1, int(math.ceil(v.max())) + margin)
    return u0, v0, u1, v1


def seed_from_prelabel(cloud: PointCloud, prelabels, instance_id: int) -> int:
    """The pre-labeled point of the instance nearest its pre-label centroid.

    Ties resolve to the smallest index so auto-seeding is deterministic.
    """
    members = sorted(p.index for p in prelabels if p.instance_id == instance_id)
    if not members:
        raise KeyError(f"no pre-labels for instance {instance_id}")
    pts = cloud.xyz[members]
    centroid = pts.mean(axis=0)
    d2 = ((pts - centroid) ** 2).sum(axis=1)
    return int(members[int(np.argmin(d2))])
