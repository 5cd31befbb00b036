"""Annotation persistence, event logging, point-wise labels, and export.

All annotation mutations flow through `record_event`, so a session's final
state is exactly the fold of its event log: replaying the log is the
determinism check, not an approximation of it.
"""

from __future__ import annotations

import json
import time
import uuid
from dataclasses import dataclass, field, replace

import numpy as np

from .boxfit import TopViewBox, points_in_box
from .cloud import PointCloud
from .errors import AnnotationError, FormatError, SchemaVersionError, UnknownFrameError
from .track import TrackState

SCHEMA_VERSION = 1

EVENT_KINDS = (
    "click", "box_create", "resize", "rotate", "translate",
    "class_assign", "frame_advance", "delete",
)
# Operations counted toward the per-instance efficiency metric: box
# adjustments plus class assignment. Clicks and navigation are free.
COUNTABLE_OPS = frozenset({"resize", "rotate", "translate", "class_assign"})

ANNOTATION_SOURCES = ("manual", "one_click", "tracked")

BACKGROUND_LABEL = "background"


@dataclass(frozen=True)
class LogEvent:
    kind: str
    timestamp_ms: int
    annotation_id: str | None = None
    data: dict = field(default_factory=dict)


@dataclass(frozen=True)
class AnnotationRecord:
    annotation_id: str
    frame_id: str
    box: TopViewBox
    source: str
    created_ms: int
    modified_ms: int


def box_to_dict(box: TopViewBox) -> dict:
    d = {
        "cx": box.cx, "cy": box.cy, "width": box.width, "length": box.length,
        "yaw": box.yaw, "label": box.label,
    }
    if box.z_min is not None:
        d["z_min"] = box.z_min
        d["z_max"] = box.z_max
    return d


def box_from_dict(d: dict) -> TopViewBox:
    try:
        return TopViewBox(
            cx=d["cx"], cy=d["cy"], width=d["width"], length=d["length"],
            yaw=d["yaw"], label=d.get("label", "other"),
            z_min=d.get("z_min"), z_max=d.get("z_max"),
        )
    except KeyError as exc:
        raise FormatError(f"box record missing field {exc}") from exc


class Session:
    """One annotator's work over a frame sequence."""

    def __init__(self, sequence_id: str, frame_ids, dt: float,
                 params: dict | None = None, session_id: str | None = None):
        self.session_id = session_id or uuid.uuid4().hex[:12]
        self.sequence_id = sequence_id
        self.frame_ids = list(frame_ids)
        self.dt = float(dt)
        self.params = dict(params or {})
        self.annotations: dict[str, AnnotationRecord] = {}
        self.events: list[LogEvent] = []
        self.tracks: dict[str, TrackState] = {}
        self.masks: dict[str, dict] = {}
        self.current_frame = 0

    def next_annotation_id(self) -> str:
        n = sum(1 for e in self.events if e.kind == "box_create")
        return f"a{n + 1}"

    def frame_annotations(self, frame_id: str) -> list[AnnotationRecord]:
        recs = [a for a in self.annotations.values() if a.frame_id == frame_id]
        recs.sort(key=lambda a: (a.created_ms, a.annotation_id))
        return recs

    def __eq__(self, other):
        if not isinstance(other, Session):
            return NotImplemented
        return (
            self.session_id == other.session_id
            and self.sequence_id == other.sequence_id
            and self.frame_ids == other.frame_ids
            and self.dt == other.dt
            and self.params == other.params
            and self.annotations == other.annotations
            and self.events == other.events
            and self.tracks == other.tracks
            and self.masks == other.masks
            and self.current_frame == other.current_frame
        )


def now_ms() -> int:
    return int(time.time() * 1000)


def apply_event(annotations: dict[str, AnnotationRecord], event: LogEvent,
                current_frame: int) -> int:
    """Fold one event into the annotation map; returns the new current frame."""
    kind, data, ts = event.kind, event.data, event.timestamp_ms
    if kind == "box_create":
        aid = data["annotation_id"]
        annotations[aid] = AnnotationRecord(
            annotation_id=aid,
            frame_id=data["frame_id"],
            box=box_from_dict(data["box"]),
            source=data.get("source", "manual"),
            created_ms=ts,
            modified_ms=ts,
        )
    elif kind in ("resize", "rotate", "translate"):
        aid = event.annotation_id
        if aid not in annotations:
            raise AnnotationError(f"{kind} event references unknown annotation {aid}")
        annotations[aid] = replace(
            annotations[aid], box=box_from_dict(data["box"]), modified_ms=ts
        )
    elif kind == "class_assign":
        aid = event.annotation_id
        if aid not in annotations:
            raise AnnotationError(f"class_assign references unknown annotation {aid}")
        rec = annotations[aid]
        annotations[aid] = replace(rec, box=rec.box.with_label(data["label"]), modified_ms=ts)
    elif kind == "delete":
        aid = event.annotation_id
        if aid not in annotations:
            raise AnnotationError(f"delete references unknown annotation {aid}")
        del annotations[aid]
    elif kind == "frame_advance":
        return int(data["to_frame"])
    elif kind == "click":
        pass
    else:
        raise AnnotationError(f"unknown event kind {kind!r}")
    return current_frame


def record_event(session: Session, kind: str, annotation_id: str | None = None,
                 data: dict | None = None, timestamp_ms: int | None = None) -> LogEvent:
    """Append an event and apply it. Timestamps are clamped non-decreasing."""
    if kind not in EVENT_KINDS:
        raise AnnotationError(f"unknown event kind {kind!r}")
    ts = now_ms() if timestamp_ms is None else int(timestamp_ms)
    if session.events:
        ts = max(ts, session.events[-1].timestamp_ms)
    event = LogEvent(kind=kind, timestamp_ms=ts, annotation_id=annotation_id,
                     data=dict(data or {}))
    session.current_frame = apply_event(session.annotations, event, session.current_frame)
    session.events.append(event)
    return event


def replay_events(events) -> tuple[dict[str, AnnotationRecord], int]:
    """Rebuild the annotation map by folding the log from scratch."""
    annotations: dict[str, AnnotationRecord] = {}
    frame = 0
    for event in events:
        frame = apply_event(annotations, event, frame)
    return annotations, frame


def replay_matches(session: Session) -> bool:
    """True when the live annotation state equals the fold of the event log."""
    annotations, frame = replay_events(session.events)
    return annotations == session.annotations and frame == session.current_frame


# ---------------------------------------------------------------------------
# Point-wise labels


def derive_pointwise_labels(cloud: PointCloud, annotations
                            ) -> tuple[list, list[dict]]:
    """Per-point class labels from the frame's boxes.

    Points inside exactly one box take its class; points outside every box are
    background (None). A point in several boxes goes to the box with the
    nearest center and the conflict is reported, so the labeling stays total.
    """
    records = sorted(annotations, key=lambda a: a.annotation_id)
    labels: list = [None] * cloud.n
    hits: dict[int, list] = {}
    for rec in records:
        for i in points_in_box(cloud, rec.box):
            hits.setdefault(int(i), []).append(rec)
    conflicts = []
    for i, recs in hits.items():
        if len(recs) == 1:
            winner = recs[0]
        else:
            px, py = cloud.xyz[i, 0], cloud.xyz[i, 1]
            winner = min(
                recs,
                key=lambda r: ((r.box.cx - px) ** 2 + (r.box.cy - py) ** 2, r.annotation_id),
            )
            conflicts.append({
                "point": i,
                "winner": winner.annotation_id,
                "candidates": [r.annotation_id for r in recs],
            })
        labels[i] = winner.box.label
    return labels, conflicts


def format_pointwise_csv(labels) -> str:
    lines = ["index,class"]
    for i, label in enumerate(labels):
        lines.append(f"{i},{label if label is not None else BACKGROUND_LABEL}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Label export

_LABEL_FIELDS = 8  # class cx cy z_min z_max width length yaw


def format_label_lines(items) -> str:
    """Fixed field order and 6-decimal formatting; byte-stable under reparse."""
    lines = []
    for label, box in items:
        z0 = box.z_min if box.z_min is not None else 0.0
        z1 = box.z_max if box.z_max is not None else 0.0
        lines.append(
            f"{label} {box.cx:.6f} {box.cy:.6f} {z0:.6f} {z1:.6f} "
            f"{box.width:.6f} {box.length:.6f} {box.yaw:.6f}"
        )
    return "".join(line + "\n" for line in lines)


def export_labels(session: Session, frame_id: str) -> str:
    """One line per annotation on the frame, in creation order."""
    if frame_id not in session.frame_ids:
        raise UnknownFrameError(f"frame {frame_id!r} is not part of the sequence")
    records = session.frame_annotations(frame_id)
    return format_label_lines((r.box.label, r.box) for r in records)


def parse_label_text(text: str) -> list[tuple[str, TopViewBox]]:
    items = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != _LABEL_FIELDS:
            raise FormatError(f"label line {lineno}: expected {_LABEL_FIELDS} fields")
        label = parts[0]
        try:
            cx, cy, z0, z1, w, l, yaw = (float(v) for v in parts[1:])
        except ValueError as exc:
            raise FormatError(f"label line {lineno}: bad number") from exc
        items.append((label, TopViewBox(cx=cx, cy=cy, width=w, length=l, yaw=yaw,
                                        label=label, z_min=z0, z_max=z1)))
    return items


# ---------------------------------------------------------------------------
# Session persistence


def _track_to_dict(ts: TrackState) -> dict:
    return {
        "annotation_id": ts.annotation_id,
        "rigid": ts.rigid,
        "x": ts.x.tolist(),
        "P": ts.P.tolist(),
    }


def _track_from_dict(d: dict) -> TrackState:
    return TrackState(
        x=np.asarray(d["x"], dtype=np.float64),
        P=np.asarray(d["P"], dtype=np.float64),
        annotation_id=d["annotation_id"],
        rigid=bool(d["rigid"]),
    )


def session_to_dict(session: Session) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "session_id": session.session_id,
        "sequence_id": session.sequence_id,
        "frame_ids": session.frame_ids,
        "dt": session.dt,
        "params": session.params,
        "current_frame": session.current_frame,
        "annotations": [
            {
                "annotation_id": a.annotation_id,
                "frame_id": a.frame_id,
                "box": box_to_dict(a.box),
                "source": a.source,
                "created_ms": a.created_ms,
                "modified_ms": a.modified_ms,
            }
            for a in sorted(session.annotations.values(), key=lambda a: a.annotation_id)
        ],
        "events": [
            {"kind": e.kind, "timestamp_ms": e.timestamp_ms,
             "annotation_id": e.annotation_id, "data": e.data}
            for e in session.events
        ],
        "tracks": [_track_to_dict(t) for _, t in sorted(session.tracks.items())],
        "masks": session.masks,
    }


def session_from_dict(doc: dict) -> Session:
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"session schema version {version!r} is not supported (expected {SCHEMA_VERSION})"
        )
    try:
        session = Session(
            sequence_id=doc["sequence_id"],
            frame_ids=doc["frame_ids"],
            dt=doc["dt"],
            params=doc.get("params", {}),
            session_id=doc["session_id"],
        )
        session.current_frame = int(doc.get("current_frame", 0))
        for a in doc.get("annotations", []):
            session.annotations[a["annotation_id"]] = AnnotationRecord(
                annotation_id=a["annotation_id"],
                frame_id=a["frame_id"],
                box=box_from_dict(a["box"]),
                source=a["source"],
                created_ms=int(a["created_ms"]),
                modified_ms=int(a["modified_ms"]),
            )
        session.events = [
            LogEvent(kind=e["kind"], timestamp_ms=int(e["timestamp_ms"]),
                     annotation_id=e.get("annotation_id"), data=e.get("data", {}))
            for e in doc.get("events", [])
        ]
        session.tracks = {
            t["annotation_id"]: _track_from_dict(t) for t in doc.get("tracks", [])
        }
        session.masks = doc.get("masks", {})
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed session document: {exc}") from exc
    return session


def save_session(session: Session, path) -> None:
    with open(path, "w") as fh:
        json.dump(session_to_dict(session), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_session(path) -> Session:
    """Parse a session file; a truncated or malformed file loads nothing."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: expected a JSON object")
    return session_from_dict(doc)


# ---------------------------------------------------------------------------
# Efficiency metrics


@dataclass(frozen=True)
class MetricsReport:
    instance_count: int
    total_time_ms: int
    mean_time_s: float
    total_ops: int
    mean_ops: float


def _attributed_time_ms(events) -> int:
    """Sum over frames of (last event in frame - frame activation)."""
    total = 0
    window_start = None
    last_ts = None
    for e in events:
        if window_start is None:
            window_start = e.timestamp_ms
        if e.kind == "frame_advance":
            if last_ts is not None:
                total += max(0, last_ts - window_start)
            window_start = e.timestamp_ms
            last_ts = None
        else:
            last_ts = e.timestamp_ms
    if last_ts is not None and window_start is not None:
        total += max(0, last_ts - window_start)
    return total


def report_metrics(session: Session) -> MetricsReport | None:
    """Per-instance mean time and operation count; None when nothing was annotated."""
    alive: set[str] = set()
    for e in session.events:
        if e.kind == "box_create":
            alive.add(e.data["annotation_id"])
        elif e.kind == "delete" and e.annotation_id in alive:
            alive.discard(e.annotation_id)
    n = len(alive)
    if n == 0:
        return None
    ops = sum(1 for e in session.events if e.kind in COUNTABLE_OPS)
    time_ms = _attributed_time_ms(session.events)
    return MetricsReport(
        instance_count=n,
        total_time_ms=time_ms,
        mean_time_s=time_ms / 1000 / n,
        total_ops=ops,
        mean_ops=ops / n,
    )
