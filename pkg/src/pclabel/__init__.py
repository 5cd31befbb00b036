"""Interactive LiDAR point-cloud annotation engine.

Ground removal, one-click cluster-to-box annotation, camera-mask pre-labels,
Kalman-tracked box proposals across frames, and evaluation metrics — exposed
as a library, a batch CLI, and an HTTP service with a browser frontend.
"""

from .boxfit import (
    CLASS_LABELS,
    FitParams,
    RectangleEstimator,
    TopViewBox,
    fit_rectangle,
    points_in_box,
    variance_loss,
)
from .cloud import (
    Point3,
    PointCloud,
    VoxelIndex,
    build_index,
    load_csv,
    load_kitti_bin,
    prune_around,
    voxel_downsample,
    write_csv,
)
from .cluster import Cluster, ClusterParams, SeededClusterExpander, expand_cluster, restore_full_resolution
from .fusion import (
    CalibrationModel,
    PreLabel,
    SegMask,
    crop_for_cluster,
    project_point,
    project_points,
    seed_from_prelabel,
    transfer_labels,
)
from .ground import (
    GroundParams,
    GroundPlaneEstimator,
    PlaneModel,
    fit_plane_svd,
    remove_ground,
    resample_ground,
    seed_ground_set,
)
from .metrics import MatchResult, PrecisionRecall, match_instances, precision_recall, rotated_iou
from .pipeline import one_click_box, prepare_frame, resolve_click_seed
from .sequence import FrameDescriptor, FrameSequence, scan_sequence_dir
from .store import (
    AnnotationRecord,
    LogEvent,
    Session,
    derive_pointwise_labels,
    export_labels,
    load_session,
    parse_label_text,
    record_event,
    replay_events,
    report_metrics,
    save_session,
)
from .track import (
    KalmanParams,
    TrackState,
    init_track,
    is_rigid_class,
    predict,
    propagate_annotation,
    update,
)

__version__ = "0.1.0"
