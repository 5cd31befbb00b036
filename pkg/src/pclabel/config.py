"""Service configuration: ingestion roots and every module's parameters.

The config file is JSON; unknown keys are rejected so typos fail loudly.
The class->color map is served to the frontend so exports and UI agree.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field

from .boxfit import CLASS_LABELS, FitParams
from .cluster import ClusterParams
from .errors import FormatError, ParameterError
from .ground import GroundParams
from .track import RIGID_CLASSES, KalmanParams

DEFAULT_CLASS_COLORS = {
    "car": "#4f9dff",
    "pedestrian": "#ff7043",
    "cyclist": "#ffd54f",
    "truck": "#9575cd",
    "van": "#4db6ac",
    "other": "#b0bec5",
}


@dataclass
class AppConfig:
    data_root: str = "."
    session_dir: str = "sessions"
    display_cap: int = 60000          # per-frame payload size for the browser
    click_snap_radius: float = 1.0    # ray-click to nearest point, meters
    crop_margin: int = 10             # pixels around the confirmation crop
    dt: float | None = None           # overrides per-sequence meta when set
    ground: GroundParams = field(default_factory=GroundParams)
    cluster: ClusterParams = field(default_factory=ClusterParams)
    fit: FitParams = field(default_factory=FitParams)
    tracking: KalmanParams = field(default_factory=KalmanParams)
    rigid_classes: tuple = tuple(sorted(RIGID_CLASSES))
    class_colors: dict = field(default_factory=lambda: dict(DEFAULT_CLASS_COLORS))

    def __post_init__(self):
        if self.display_cap < 1:
            raise ParameterError("display_cap must be >= 1")
        unknown = set(self.rigid_classes) - set(CLASS_LABELS)
        if unknown:
            raise ParameterError(f"rigid_classes not in the label set: {sorted(unknown)}")

    def is_rigid(self, label: str) -> bool:
        return label in self.rigid_classes

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["rigid_classes"] = list(self.rigid_classes)
        return doc


_SECTION_TYPES = {
    "ground": GroundParams,
    "cluster": ClusterParams,
    "fit": FitParams,
    "tracking": KalmanParams,
}
_SCALAR_KEYS = {
    "data_root", "session_dir", "display_cap", "click_snap_radius",
    "crop_margin", "dt", "class_colors",
}


def config_from_dict(doc: dict) -> AppConfig:
    kwargs = {}
    for key, value in doc.items():
        if key in _SECTION_TYPES:
            if not isinstance(value, dict):
                raise FormatError(f"config section {key!r} must be an object")
            try:
                kwargs[key] = _SECTION_TYPES[key](**value)
            except TypeError as exc:
                raise FormatError(f"config section {key!r}: {exc}") from exc
        elif key == "rigid_classes":
            kwargs[key] = tuple(value)
        elif key in _SCALAR_KEYS:
            kwargs[key] = value
        else:
            raise FormatError(f"unknown config key {key!r}")
    return AppConfig(**kwargs)


def load_config(path) -> AppConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise FormatError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: expected a JSON object")
    cfg = config_from_dict(doc)
    base = os.path.dirname(os.path.abspath(path))
    if not os.path.isabs(cfg.data_root):
        cfg.data_root = os.path.normpath(os.path.join(base, cfg.data_root))
    if not os.path.isabs(cfg.session_dir):
        cfg.session_dir = os.path.normpath(os.path.join(base, cfg.session_dir))
    return cfg
