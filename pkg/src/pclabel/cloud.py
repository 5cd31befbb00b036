"""Point-cloud container, file ingestion, and uniform-grid spatial indexing.

Coordinates are meters in the sensor frame: x forward, y left, z up.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ParameterError
from .validation import check_index_set, check_positive

KITTI_RECORD_BYTES = 16  # four little-endian float32 per return: x, y, z, intensity


@dataclass(frozen=True)
class Point3:
    """A single LiDAR return."""

    x: float
    y: float
    z: float
    intensity: float = 0.0


class PointCloud:
    """One frame of returns with stable point indexing.

    Every downstream result (ground masks, clusters, box memberships) is a set
    of indices into this cloud, so point order never changes after construction
    and the arrays are locked read-only.
    """

    def __init__(self, xyz, intensity=None, frame_id: str = "", n_dropped: int = 0):
        xyz = np.asarray(xyz, dtype=np.float64)
        if xyz.ndim == 1 and xyz.size == 3:
            xyz = xyz.reshape(1, 3)
        if xyz.ndim != 2 or xyz.shape[1] != 3:
            raise ParameterError(f"expected (n, 3) coordinates, got shape {xyz.shape}")
        if xyz.shape[0] < 1:
            raise FormatError("a frame must contain at least one point")
        if not np.isfinite(xyz).all():
            raise FormatError("point coordinates must be finite")
        if intensity is None:
            intensity = np.zeros(xyz.shape[0])
        intensity = np.asarray(intensity, dtype=np.float64).reshape(-1)
        if intensity.shape[0] != xyz.shape[0]:
            raise ParameterError("intensity length does not match point count")
        self.xyz = xyz.copy()
        self.intensity = intensity.copy()
        self.frame_id = frame_id
        self.n_dropped = int(n_dropped)
        self.xyz.setflags(write=False)
        self.intensity.setflags(write=False)

    @property
    def n(self) -> int:
        return self.xyz.shape[0]

    def __len__(self) -> int:
        return self.n

    def point(self, i: int) -> Point3:
        x, y, z = self.xyz[i]
        return Point3(float(x), float(y), float(z), float(self.intensity[i]))

    def all_indices(self) -> np.ndarray:
        return np.arange(self.n)

    def __repr__(self) -> str:
        return f"PointCloud(n={self.n}, frame_id={self.frame_id!r})"


def load_kitti_bin(path) -> PointCloud:
    """Read a KITTI velodyne scan (packed x, y, z, intensity float32 records).

    Records with non-finite values are dropped; the count is kept on the
    returned cloud as ``n_dropped``.
    """
    try:
        size = os.path.getsize(path)
        raw = np.fromfile(path, dtype="<f4")
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if size == 0:
        raise FormatError(f"{path} is empty: a frame must contain at least one point")
    if size % KITTI_RECORD_BYTES != 0:
        raise FormatError(
            f"{path}: size {size} is not a multiple of the {KITTI_RECORD_BYTES}-byte record"
        )
    records = raw.reshape(-1, 4).astype(np.float64)
    finite = np.isfinite(records).all(axis=1)
    dropped = int((~finite).sum())
    records = records[finite]
    if records.shape[0] == 0:
        raise FormatError(f"{path}: no finite points after filtering")
    frame_id = os.path.splitext(os.path.basename(path))[0]
    return PointCloud(records[:, :3], records[:, 3], frame_id=frame_id, n_dropped=dropped)


def load_csv(path) -> PointCloud:
    """Read a cloud from CSV with an ``x,y,z[,intensity]`` header."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise FormatError(f"{path} is empty")
        names = [h.strip().lower() for h in header]
        try:
            cols = [names.index(c) for c in ("x", "y", "z")]
        except ValueError as exc:
            raise FormatError(f"{path}: header must name x, y and z columns") from exc
        icol = names.index("intensity") if "intensity" in names else None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                vals = [float(row[c]) for c in cols]
                vals.append(float(row[icol]) if icol is not None else 0.0)
            except (ValueError, IndexError) as exc:
                raise FormatError(f"{path}:{lineno}: bad numeric row") from exc
            rows.append(vals)
    if not rows:
        raise FormatError(f"{path} has a header but no data rows")
    data = np.asarray(rows, dtype=np.float64)
    finite = np.isfinite(data).all(axis=1)
    dropped = int((~finite).sum())
    data = data[finite]
    if data.shape[0] == 0:
        raise FormatError(f"{path}: no finite points after filtering")
    frame_id = os.path.splitext(os.path.basename(path))[0]
    return PointCloud(data[:, :3], data[:, 3], frame_id=frame_id, n_dropped=dropped)


def write_csv(cloud: PointCloud, path) -> None:
    """Write ``x,y,z,intensity`` rows at full float64 precision (round-trip safe)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "z", "intensity"])
        for (x, y, z), i in zip(cloud.xyz.tolist(), cloud.intensity.tolist()):
            writer.writerow([repr(x), repr(y), repr(z), repr(i)])


def _cell_keys(xyz: np.ndarray, cell_size: float) -> np.ndarray:
    return np.floor(xyz / cell_size).astype(np.int64)


class VoxelIndex:
    """Uniform grid over (a subset of) a cloud supporting exact radius queries.

    Each indexed point lives in exactly one cell of side ``cell_size``;
    ``neighbors_within`` gathers the cells that can intersect the query ball
    and filters by exact Euclidean distance.
    """

    def __init__(self, cloud: PointCloud, cell_size: float, indices=None):
        self.cell_size = check_positive(cell_size, "cell_size")
        self.cloud = cloud
        if indices is None:
            idx = cloud.all_indices()
        else:
            idx = check_index_set(indices, cloud.n)
        self.indices = idx
        keys = _cell_keys(cloud.xyz[idx], self.cell_size)
        self._cells: dict[tuple[int, int, int], np.ndarray] = {}
        if idx.size:
            order = np.lexsort((keys[:, 2], keys[:, 1], keys[:, 0]))
            sk = keys[order]
            si = idx[order]
            change = np.nonzero((sk[1:] != sk[:-1]).any(axis=1))[0] + 1
            starts = np.concatenate(([0], change))
            ends = np.concatenate((change, [len(sk)]))
            for a, b in zip(starts, ends):
                self._cells[tuple(sk[a])] = si[a:b]

    @property
    def n_cells(self) -> int:
        return len(self._cells)

    def cell_of(self, p) -> tuple[int, int, int]:
        p = np.asarray(p, dtype=np.float64).reshape(3)
        return tuple(np.floor(p / self.cell_size).astype(np.int64))

    def neighbors_within(self, p, radius: float) -> np.ndarray:
        """Indices at Euclidean distance <= radius from p (sorted, exact)."""
        if radius < 0:
            raise ParameterError(f"radius must be >= 0, got {radius}")
        p = np.asarray(p, dtype=np.float64).reshape(3)
        lo = np.floor((p - radius) / self.cell_size).astype(np.int64)
        hi = np.floor((p + radius) / self.cell_size).astype(np.int64)
        chunks = []
        for i in range(lo[0], hi[0] + 1):
            for j in range(lo[1], hi[1] + 1):
                for k in range(lo[2], hi[2] + 1):
                    got = self._cells.get((i, j, k))
                    if got is not None:
                        chunks.append(got)
        if not chunks:
            return np.empty(0, dtype=np.int64)
        cand = np.concatenate(chunks)
        d2 = ((self.cloud.xyz[cand] - p) ** 2).sum(axis=1)
        return np.sort(cand[d2 <= radius * radius])


def build_index(cloud: PointCloud, cell_size: float, indices=None) -> VoxelIndex:
    return VoxelIndex(cloud, cell_size, indices=indices)


def prune_around(cloud: PointCloud, center, radius: float) -> np.ndarray:
    """Indices whose horizontal (x, y) distance from center is <= radius.

    Vertical extent never bounds a click neighborhood: annotation boxes are
    top-view, so pruning is horizontal-only.
    """
    check_positive(radius, "radius")
    if isinstance(center, Point3):
        cx, cy = center.x, center.y
    else:
        c = np.asarray(center, dtype=np.float64).reshape(-1)
        cx, cy = c[0], c[1]
    dx = cloud.xyz[:, 0] - cx
    dy = cloud.xyz[:, 1] - cy
    return np.nonzero(dx * dx + dy * dy <= radius * radius)[0]


def voxel_downsample(cloud: PointCloud, indices, cell_size: float) -> np.ndarray:
    """Keep one representative index per occupied voxel.

    The representative is the member closest to the centroid of the voxel's
    points (ties -> smallest index), so repeating the operation at the same
    cell size is the identity.
    """
    check_positive(cell_size, "cell_size")
    idx = check_index_set(indices, cloud.n)
    if idx.size == 0:
        return idx
    pts = cloud.xyz[idx]
    keys = _cell_keys(pts, cell_size)
    _, inverse = np.unique(keys, axis=0, return_inverse=True)
    n_groups = inverse.max() + 1
    sums = np.zeros((n_groups, 3))
    np.add.at(sums, inverse, pts)
    counts = np.bincount(inverse, minlength=n_groups).astype(np.float64)
    centroids = sums / counts[:, None]
    d2 = ((pts - centroids[inverse]) ** 2).sum(axis=1)
    # Stable lexsort: group, then distance; ties keep ascending index order.
    order = np.lexsort((d2, inverse))
    first = np.concatenate(([True], inverse[order][1:] != inverse[order][:-1]))
    return np.sort(idx[order[first]])
