"""Frame-sequence descriptors and directory ingestion.

A sequence directory holds clouds plus optional images, masks and calibration:

    <seq>/
      velodyne/ *.bin      (or clouds/ *.csv)
      image_2/  *.png      (or images/)
      masks/    *.png + class_map.json (shared) or <frame>.json (per frame)
      calib.txt            (shared)   or calib/<frame>.txt (per frame)
      meta.json            optional {"dt": 0.1}

Frames are keyed by cloud file stem and strictly ordered by it.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

from .cloud import PointCloud, load_csv, load_kitti_bin
from .errors import FormatError, ParameterError, UnknownFrameError
from .fusion import CalibrationModel, SegMask, load_kitti_calib, load_matrix_calib

DEFAULT_DT = 0.1  # typical spinning-LiDAR frame interval, seconds

_CLOUD_DIRS = ("velodyne", "clouds", "cloud")
_IMAGE_DIRS = ("image_2", "images", "image")
_MASK_DIR = "masks"


@dataclass(frozen=True)
class FrameDescriptor:
    frame_id: str
    cloud_path: str
    image_path: str | None = None
    mask_path: str | None = None
    class_map_path: str | None = None
    calib_path: str | None = None


class FrameSequence:
    """Ordered frames sampled at a fixed interval."""

    def __init__(self, sequence_id: str, frames, dt: float = DEFAULT_DT):
        if dt <= 0:
            raise ParameterError(f"dt must be > 0, got {dt}")
        frames = sorted(frames, key=lambda f: f.frame_id)
        if not frames:
            raise FormatError(f"sequence {sequence_id!r} has no frames")
        self.sequence_id = sequence_id
        self.frames = frames
        self.dt = float(dt)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def frame_ids(self) -> list[str]:
        return [f.frame_id for f in self.frames]

    def descriptor(self, k: int) -> FrameDescriptor:
        if not 0 <= k < len(self.frames):
            raise UnknownFrameError(f"frame index {k} out of range 0..{len(self.frames) - 1}")
        return self.frames[k]

    def load_cloud(self, k: int) -> PointCloud:
        desc = self.descriptor(k)
        if desc.cloud_path.endswith(".bin"):
            return load_kitti_bin(desc.cloud_path)
        return load_csv(desc.cloud_path)

    def image_size(self, k: int) -> tuple[int, int] | None:
        desc = self.descriptor(k)
        if desc.image_path is None:
            return None
        from PIL import Image

        with Image.open(desc.image_path) as img:
            return img.width, img.height

    def load_calibration(self, k: int) -> CalibrationModel | None:
        desc = self.descriptor(k)
        size = self.image_size(k)
        if desc.calib_path is None or size is None:
            return None
        width, height = size
        with open(desc.calib_path) as fh:
            head = fh.read(4096)
        if ":" in head:
            return load_kitti_calib(desc.calib_path, width, height)
        return load_matrix_calib(desc.calib_path, width, height)

    def load_mask(self, k: int) -> SegMask | None:
        desc = self.descriptor(k)
        if desc.mask_path is None or desc.class_map_path is None:
            return None
        return SegMask.load_png(desc.mask_path, desc.class_map_path)


def _find_subdir(root: str, names) -> str | None:
    for name in names:
        p = os.path.join(root, name)
        if os.path.isdir(p):
            return p
    return None


def _stem_map(directory: str | None, suffixes) -> dict[str, str]:
    if directory is None:
        return {}
    out = {}
    for entry in sorted(os.listdir(directory)):
        stem, ext = os.path.splitext(entry)
        if ext.lower() in suffixes:
            out[stem] = os.path.join(directory, entry)
    return out


def scan_sequence_dir(path, dt: float | None = None) -> FrameSequence:
    """Build a FrameSequence from the directory convention above."""
    path = os.path.abspath(path)
    if not os.path.isdir(path):
        raise FormatError(f"{path} is not a directory")
    cloud_dir = _find_subdir(path, _CLOUD_DIRS)
    if cloud_dir is None:
        raise FormatError(f"{path} has no cloud subdirectory ({'/'.join(_CLOUD_DIRS)})")
    clouds = _stem_map(cloud_dir, {".bin", ".csv"})
    if not clouds:
        raise FormatError(f"{cloud_dir} contains no .bin or .csv clouds")
    images = _stem_map(_find_subdir(path, _IMAGE_DIRS), {".png", ".jpg", ".jpeg"})
    mask_dir = os.path.join(path, _MASK_DIR)
    masks = _stem_map(mask_dir if os.path.isdir(mask_dir) else None, {".png"})
    per_frame_maps = _stem_map(mask_dir if os.path.isdir(mask_dir) else None, {".json"})
    shared_map = os.path.join(mask_dir, "class_map.json")
    shared_map = shared_map if os.path.isfile(shared_map) else None
    shared_calib = os.path.join(path, "calib.txt")
    shared_calib = shared_calib if os.path.isfile(shared_calib) else None
    calib_dir = os.path.join(path, "calib")
    per_frame_calib = _stem_map(calib_dir if os.path.isdir(calib_dir) else None, {".txt"})

    if dt is None:
        dt = DEFAULT_DT
        meta_path = os.path.join(path, "meta.json")
        if os.path.isfile(meta_path):
            try:
                with open(meta_path) as fh:
                    meta = json.load(fh)
                dt = float(meta.get("dt", DEFAULT_DT))
            except (json.JSONDecodeError, TypeError, ValueError) as exc:
                raise FormatError(f"{meta_path}: {exc}") from exc

    frames = []
    for stem, cloud_path in sorted(clouds.items()):
        class_map = per_frame_maps.get(stem, shared_map)
        frames.append(FrameDescriptor(
            frame_id=stem,
            cloud_path=cloud_path,
            image_path=images.get(stem),
            mask_path=masks.get(stem),
            class_map_path=class_map if masks.get(stem) else None,
            calib_path=per_frame_calib.get(stem, shared_calib),
        ))
    return FrameSequence(os.path.basename(path.rstrip(os.sep)), frames, dt)
