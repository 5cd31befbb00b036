"""HTTP annotation service: frames and pre-labels out, clicks and boxes in.

Clouds are immutable resources; every annotation mutation is event-sourced
through the session store, and mutating requests within one session are
serialized behind a lock.
"""

from __future__ import annotations

import dataclasses
import math
import os
import threading
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import FileResponse, JSONResponse, PlainTextResponse

from . import store
from .boxfit import CLASS_LABELS, TopViewBox, points_in_box, variance_loss_grid
from .cloud import PointCloud
from .config import AppConfig
from .errors import (
    AnnotationError,
    CalibrationError,
    DegenerateClusterError,
    DegenerateGeometryError,
    FormatError,
    InsufficientPointsError,
    NoSeedError,
    NotVisibleError,
    ParameterError,
    SchemaVersionError,
    SeedOnGroundError,
    TrackLostError,
    UnknownFrameError,
)
from .fusion import crop_for_cluster, seed_from_prelabel, transfer_labels
from .pipeline import one_click_box, prepare_frame, resolve_click_seed
from .sequence import FrameSequence, scan_sequence_dir
from .track import TrackState, init_track, predict, propagate_annotation, update

_ERROR_CODES = [
    (SeedOnGroundError, "seed_on_ground", 422),
    (NoSeedError, "no_seed", 422),
    (DegenerateClusterError, "degenerate_cluster", 422),
    (NotVisibleError, "not_visible", 404),
    (TrackLostError, "track_lost", 409),
    (UnknownFrameError, "unknown_frame", 404),
    (SchemaVersionError, "schema_version", 400),
    (CalibrationError, "calibration_error", 400),
    (FormatError, "format_error", 400),
    (ParameterError, "parameter_error", 422),
    (InsufficientPointsError, "insufficient_points", 422),
    (DegenerateGeometryError, "degenerate_geometry", 422),
    (AnnotationError, "annotation_error", 400),
]


class ProtocolError(AnnotationError):
    """Request violates the session workflow (non-sequential advance, stale frame)."""

    def __init__(self, message, code="protocol_error", status=409):
        super().__init__(message)
        self.code = code
        self.status = status


class NotFound(AnnotationError):
    def __init__(self, message):
        super().__init__(message)
        self.code = "not_found"
        self.status = 404


def _error_payload(code: str, message: str) -> dict:
    return {"error": {"code": code, "message": message}}


@dataclass
class FrameArtifacts:
    cloud: PointCloud
    ground_mask: np.ndarray
    nonground: np.ndarray
    prelabels: list = field(default_factory=list)


class SequenceRuntime:
    """Lazily computed per-frame artifacts (ground split, pre-labels), shared
    by every session on the sequence."""

    def __init__(self, sequence: FrameSequence, config: AppConfig):
        self.sequence = sequence
        self.config = config
        self._frames: dict[int, FrameArtifacts] = {}
        self._lock = threading.Lock()

    @property
    def dt(self) -> float:
        return self.config.dt if self.config.dt is not None else self.sequence.dt

    def frame(self, k: int) -> FrameArtifacts:
        with self._lock:
            if k not in self._frames:
                cloud = self.sequence.load_cloud(k)
                plane, nonground = prepare_frame(cloud, self.config.ground)
                mask = np.zeros(cloud.n, dtype=bool)
                mask[plane.inliers] = True
                prelabels = []
                calib = self.sequence.load_calibration(k)
                seg = self.sequence.load_mask(k)
                if calib is not None and seg is not None:
                    prelabels = transfer_labels(calib, cloud, seg)
                self._frames[k] = FrameArtifacts(cloud, mask, nonground, prelabels)
            return self._frames[k]

    def calibration(self, k: int):
        return self.sequence.load_calibration(k)


class SessionRuntime:
    def __init__(self, session: store.Session, seq: SequenceRuntime):
        self.session = session
        self.seq = seq
        self.lock = threading.Lock()
        # frame index of the last Kalman observation per annotation id
        self.last_observed: dict[str, int] = {}


class AppState:
    def __init__(self, config: AppConfig, sequences: dict[str, FrameSequence]):
        self.config = config
        self.sequences = {sid: SequenceRuntime(seq, config) for sid, seq in sequences.items()}
        self.sessions: dict[str, SessionRuntime] = {}
        self.lock = threading.Lock()

    def sequence(self, sid: str) -> SequenceRuntime:
        if sid not in self.sequences:
            raise NotFound(f"unknown sequence {sid!r}")
        return self.sequences[sid]

    def runtime(self, session_id: str) -> SessionRuntime:
        if session_id not in self.sessions:
            raise NotFound(f"unknown session {session_id!r}")
        return self.sessions[session_id]


def discover_sequences(data_root: str) -> dict[str, FrameSequence]:
    """data_root may be one sequence directory or a directory of them."""
    found: dict[str, FrameSequence] = {}
    if not os.path.isdir(data_root):
        return found
    try:
        seq = scan_sequence_dir(data_root)
        found[seq.sequence_id] = seq
        return found
    except FormatError:
        pass
    for entry in sorted(os.listdir(data_root)):
        path = os.path.join(data_root, entry)
        if os.path.isdir(path):
            try:
                found[entry] = scan_sequence_dir(path)
            except FormatError:
                continue
    return found


def _box_payload(box: TopViewBox) -> dict:
    return store.box_to_dict(box)


def _annotation_payload(rec: store.AnnotationRecord) -> dict:
    return {
        "annotation_id": rec.annotation_id,
        "frame_id": rec.frame_id,
        "box": _box_payload(rec.box),
        "source": rec.source,
        "created_ms": rec.created_ms,
        "modified_ms": rec.modified_ms,
    }


def _session_payload(rt: SessionRuntime) -> dict:
    s = rt.session
    return {
        "session_id": s.session_id,
        "sequence": s.sequence_id,
        "frame_ids": s.frame_ids,
        "current_frame": s.current_frame,
        "dt": s.dt,
        "annotations": [
            _annotation_payload(a)
            for a in sorted(s.annotations.values(), key=lambda a: a.annotation_id)
        ],
        "tracks": [
            {"annotation_id": aid, "rigid": t.rigid, "position": t.position.tolist()}
            for aid, t in sorted(s.tracks.items())
        ],
        "params": s.params,
    }


def _require(body: dict, key: str):
    if key not in body:
        raise ParameterError(f"request body missing {key!r}")
    return body[key]


def create_app(config: AppConfig | None = None,
               sequences: dict[str, FrameSequence] | None = None,
               ui_dir: str | None = None) -> FastAPI:
    config = config or AppConfig()
    if sequences is None:
        sequences = discover_sequences(config.data_root)
    state = AppState(config, sequences)
    os.makedirs(config.session_dir, exist_ok=True)

    app = FastAPI(title="pclabel annotation service")
    app.state.engine = state

    @app.exception_handler(AnnotationError)
    async def _annotation_error(request: Request, exc: AnnotationError):
        if hasattr(exc, "code"):
            return JSONResponse(_error_payload(exc.code, str(exc)),
                                status_code=getattr(exc, "status", 400))
        for etype, code, status in _ERROR_CODES:
            if isinstance(exc, etype):
                return JSONResponse(_error_payload(code, str(exc)), status_code=status)
        return JSONResponse(_error_payload("error", str(exc)), status_code=400)

    # ------------------------------------------------------------- sequences

    @app.get("/api/config")
    def get_config():
        return {
            "class_labels": list(CLASS_LABELS),
            "class_colors": config.class_colors,
            "rigid_classes": list(config.rigid_classes),
            "display_cap": config.display_cap,
            "click_snap_radius": config.click_snap_radius,
        }

    @app.get("/api/sequences")
    def list_sequences():
        return {
            "sequences": [
                {"id": sid, "n_frames": len(rt.sequence), "dt": rt.dt}
                for sid, rt in sorted(state.sequences.items())
            ]
        }

    @app.get("/api/sequences/{sid}/frames/{k}")
    def get_frame(sid: str, k: int):
        rt = state.sequence(sid)
        arts = rt.frame(k)  # raises UnknownFrameError past the end
        cloud = arts.cloud
        n = cloud.n
        if n > config.display_cap:
            display = np.unique(np.round(np.linspace(0, n - 1, config.display_cap)).astype(np.int64))
        else:
            display = np.arange(n)
        pos = {int(i): d for d, i in enumerate(display)}
        prelabels = [
            {
                "index": p.index,
                "display_index": pos.get(p.index),
                "label": p.label,
                "instance": p.instance_id,
            }
            for p in arts.prelabels
        ]
        instances: dict[int, dict] = {}
        for p in arts.prelabels:
            slot = instances.setdefault(p.instance_id, {"instance": p.instance_id,
                                                        "label": p.label, "count": 0})
            slot["count"] += 1
        return {
            "sequence": sid,
            "frame": k,
            "frame_id": rt.sequence.frame_ids[k],
            "dt": rt.dt,
            "n_full": n,
            "index_map": display.tolist(),
            "points": cloud.xyz[display].tolist(),
            "ground": arts.ground_mask[display].tolist(),
            "prelabels": prelabels,
            "instances": sorted(instances.values(), key=lambda d: d["instance"]),
            "image_available": rt.sequence.descriptor(k).image_path is not None,
        }

    @app.get("/api/sequences/{sid}/frames/{k}/image")
    def get_frame_image(sid: str, k: int):
        rt = state.sequence(sid)
        desc = rt.sequence.descriptor(k)
        if desc.image_path is None:
            raise NotVisibleError(f"frame {k} has no camera image")
        return FileResponse(desc.image_path)

    # -------------------------------------------------------------- sessions

    @app.post("/api/sessions")
    def create_session(body: dict):
        sid = _require(body, "sequence")
        rt = state.sequence(sid)
        session = store.Session(
            sequence_id=sid,
            frame_ids=rt.sequence.frame_ids,
            dt=rt.dt,
            params={
                "ground": dataclasses.asdict(config.ground),
                "cluster": dataclasses.asdict(config.cluster),
                "fit": dataclasses.asdict(config.fit),
                "tracking": dataclasses.asdict(config.tracking),
            },
        )
        runtime = SessionRuntime(session, rt)
        with state.lock:
            state.sessions[session.session_id] = runtime
        return _session_payload(runtime)

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str):
        return _session_payload(state.runtime(session_id))

    def _kalman_params(rt: SessionRuntime):
        return dataclasses.replace(config.tracking, dt=rt.seq.dt)

    @app.post("/api/sessions/{session_id}/click")
    def click(session_id: str, body: dict):
        rt = state.runtime(session_id)
        k = int(_require(body, "frame"))
        arts = rt.seq.frame(k)
        if "point_index" in body:
            seed = int(body["point_index"])
            if not 0 <= seed < arts.cloud.n:
                raise ParameterError(f"point_index {seed} out of range")
        elif "instance" in body:
            # auto-seed a pre-labeled instance without an explicit click;
            # mask regions often cover road pixels, so ground points don't vote
            candidates = [p for p in arts.prelabels
                          if not arts.ground_mask[p.index]]
            try:
                seed = seed_from_prelabel(arts.cloud, candidates,
                                          int(body["instance"]))
            except KeyError as exc:
                raise NotFound(str(exc)) from exc
        else:
            x = float(_require(body, "x"))
            y = float(_require(body, "y"))
            seed = resolve_click_seed(arts.cloud, arts.nonground, x, y,
                                      config.click_snap_radius)
        with rt.lock:
            store.record_event(rt.session, "click", data={"frame": k, "seed": seed})
        box, members, _ = one_click_box(arts.cloud, arts.nonground, seed,
                                        config.cluster, config.fit)
        return {
            "box": _box_payload(box),
            "seed": seed,
            "cluster_indices": members.tolist(),
        }

    @app.post("/api/sessions/{session_id}/annotations")
    def create_annotation(session_id: str, body: dict):
        rt = state.runtime(session_id)
        session = rt.session
        k = int(_require(body, "frame"))
        if k != session.current_frame:
            raise ProtocolError(
                f"frame {k} is not the active frame {session.current_frame}",
                code="stale_frame",
            )
        box = store.box_from_dict(_require(body, "box"))
        if "label" in body:
            box = box.with_label(body["label"])
        source = body.get("source", "manual")
        if source not in store.ANNOTATION_SOURCES:
            raise ParameterError(f"unknown source {source!r}")
        with rt.lock:
            aid = session.next_annotation_id()
            store.record_event(session, "box_create", data={
                "annotation_id": aid,
                "frame_id": session.frame_ids[k],
                "box": store.box_to_dict(box),
                "source": source,
            })
            session.tracks[aid] = init_track(box, config.is_rigid(box.label),
                                             _kalman_params(rt), annotation_id=aid)
            rt.last_observed[aid] = k
            return {"annotation": _annotation_payload(session.annotations[aid])}

    @app.patch("/api/sessions/{session_id}/annotations/{aid}")
    def patch_annotation(session_id: str, aid: str, body: dict):
        rt = state.runtime(session_id)
        session = rt.session
        if aid not in session.annotations:
            raise NotFound(f"unknown annotation {aid!r}")
        if "frame" in body and int(body["frame"]) != session.current_frame:
            raise ProtocolError(
                f"frame {body['frame']} is not the active frame {session.current_frame}",
                code="stale_frame",
            )
        op = _require(body, "op")
        with rt.lock:
            if op == "class_assign":
                label = _require(body, "label")
                store.record_event(session, "class_assign", annotation_id=aid,
                                   data={"label": label})
                rec = session.annotations[aid]
                if aid in session.tracks:
                    session.tracks[aid].rigid = config.is_rigid(rec.box.label)
            elif op in ("resize", "rotate", "translate"):
                box = store.box_from_dict(_require(body, "box"))
                prior = session.annotations[aid]
                box = box.with_label(prior.box.label if "label" not in body else body["label"])
                store.record_event(session, op, annotation_id=aid,
                                   data={"box": store.box_to_dict(box)})
                if aid in session.tracks:
                    session.tracks[aid] = update(
                        session.tracks[aid], [box.cx, box.cy], _kalman_params(rt))
                    rt.last_observed[aid] = session.current_frame
            else:
                raise ParameterError(f"unknown op {op!r}")
            return {"annotation": _annotation_payload(session.annotations[aid])}

    @app.delete("/api/sessions/{session_id}/annotations/{aid}")
    def delete_annotation(session_id: str, aid: str):
        rt = state.runtime(session_id)
        session = rt.session
        if aid not in session.annotations:
            raise NotFound(f"unknown annotation {aid!r}")
        with rt.lock:
            store.record_event(session, "delete", annotation_id=aid)
            session.tracks.pop(aid, None)
            rt.last_observed.pop(aid, None)
        return {"deleted": aid}

    @app.post("/api/sessions/{session_id}/advance")
    def advance(session_id: str, body: dict):
        rt = state.runtime(session_id)
        session = rt.session
        to_frame = int(_require(body, "to_frame"))
        with rt.lock:
            cur = session.current_frame
            if to_frame != cur + 1:
                raise ProtocolError(
                    f"advance must be sequential: current {cur}, requested {to_frame}"
                )
            if to_frame >= len(session.frame_ids):
                report = store.report_metrics(session)
                return {
                    "done": True,
                    "metrics": dataclasses.asdict(report) if report else None,
                }
            arts = rt.seq.frame(to_frame)
            kparams = _kalman_params(rt)
            frame_index = {fid: i for i, fid in enumerate(session.frame_ids)}
            proposals = []
            lost = []
            new_tracks: dict[str, TrackState] = {}
            for aid, ts in sorted(session.tracks.items()):
                rec = session.annotations.get(aid)
                if rec is None:
                    continue
                # a frame confirmed without adjustment still observes its final box
                if rt.last_observed.get(aid) != frame_index.get(rec.frame_id):
                    ts = update(ts, [rec.box.cx, rec.box.cy], kparams)
                ts = predict(ts, kparams)
                try:
                    box, members = propagate_annotation(
                        arts.cloud, arts.nonground, ts, rec.box,
                        config.cluster, config.fit)
                except (TrackLostError, DegenerateClusterError, SeedOnGroundError) as exc:
                    lost.append({"annotation_id": aid, "reason": str(exc)})
                    new_tracks[aid] = ts  # paused, not deleted
                    continue
                new_id = session.next_annotation_id()
                store.record_event(session, "box_create", data={
                    "annotation_id": new_id,
                    "frame_id": session.frame_ids[to_frame],
                    "box": store.box_to_dict(box),
                    "source": "tracked",
                })
                new_tracks[new_id] = TrackState(x=ts.x, P=ts.P, annotation_id=new_id,
                                                rigid=ts.rigid)
                proposals.append({
                    "annotation": _annotation_payload(session.annotations[new_id]),
                    "from_annotation": aid,
                    "cluster_indices": members.tolist(),
                })
            session.tracks = new_tracks
            store.record_event(session, "frame_advance", data={"to_frame": to_frame})
            return {
                "done": False,
                "frame": to_frame,
                "proposals": proposals,
                "lost": lost,
            }

    @app.post("/api/sessions/{session_id}/save")
    def save(session_id: str, body: dict | None = None):
        rt = state.runtime(session_id)
        path = (body or {}).get("path") or os.path.join(
            config.session_dir, f"{rt.session.session_id}.json")
        with rt.lock:
            store.save_session(rt.session, path)
        return {"path": os.path.abspath(path)}

    @app.post("/api/sessions/load")
    def load(body: dict):
        path = _require(body, "path")
        session = store.load_session(path)
        seq = state.sequence(session.sequence_id)
        runtime = SessionRuntime(session, seq)
        for aid in session.tracks:
            rec = session.annotations.get(aid)
            if rec is not None and rec.frame_id in session.frame_ids:
                runtime.last_observed[aid] = session.frame_ids.index(rec.frame_id)
        with state.lock:
            state.sessions[session.session_id] = runtime
        return _session_payload(runtime)

    @app.get("/api/sessions/{session_id}/metrics")
    def metrics(session_id: str):
        rt = state.runtime(session_id)
        report = store.report_metrics(rt.session)
        return {"metrics": dataclasses.asdict(report) if report else None}

    @app.get("/api/sessions/{session_id}/replay_check")
    def replay_check(session_id: str):
        rt = state.runtime(session_id)
        return {"ok": store.replay_matches(rt.session)}

    @app.get("/api/sessions/{session_id}/export/{k}")
    def export(session_id: str, k: int):
        rt = state.runtime(session_id)
        session = rt.session
        if not 0 <= k < len(session.frame_ids):
            raise UnknownFrameError(f"frame index {k} out of range")
        text = store.export_labels(session, session.frame_ids[k])
        return PlainTextResponse(text)

    @app.get("/api/sessions/{session_id}/export/{k}/pointwise")
    def export_pointwise(session_id: str, k: int):
        rt = state.runtime(session_id)
        session = rt.session
        if not 0 <= k < len(session.frame_ids):
            raise UnknownFrameError(f"frame index {k} out of range")
        arts = rt.seq.frame(k)
        frame_id = session.frame_ids[k]
        labels, _ = store.derive_pointwise_labels(arts.cloud,
                                                  session.frame_annotations(frame_id))
        return PlainTextResponse(store.format_pointwise_csv(labels))

    @app.get("/api/sessions/{session_id}/annotations/{aid}/crop")
    def crop(session_id: str, aid: str):
        rt = state.runtime(session_id)
        session = rt.session
        rec = session.annotations.get(aid)
        if rec is None:
            raise NotFound(f"unknown annotation {aid!r}")
        k = session.frame_ids.index(rec.frame_id)
        calib = rt.seq.calibration(k)
        if calib is None:
            raise NotVisibleError("frame has no calibrated camera")
        arts = rt.seq.frame(k)
        members = points_in_box(arts.cloud, rec.box)
        if members.size == 0:
            raise NotVisibleError("annotation contains no points")
        rect = crop_for_cluster(calib, arts.cloud, members, config.crop_margin)
        return {
            "rect": list(rect),
            "image_url": f"/api/sequences/{session.sequence_id}/frames/{k}/image",
        }

    # ----------------------------------------------------------------- debug

    @app.post("/api/debug/fit_loss")
    def fit_loss(body: dict):
        sid = _require(body, "sequence")
        k = int(_require(body, "frame"))
        indices = np.asarray(_require(body, "indices"), dtype=np.int64)
        arts = state.sequence(sid).frame(k)
        if indices.size < 2:
            raise ParameterError("need at least 2 indices")
        step = config.fit.theta_step
        thetas = np.arange(0, math.pi / 2, step)
        losses = variance_loss_grid(arts.cloud.xyz[indices][:, :2], thetas)
        return {"thetas_deg": np.degrees(thetas).tolist(), "losses": losses.tolist()}

    @app.get("/api/debug/box_corners")
    def box_corners(cx: float, cy: float, width: float, length: float, yaw: float):
        box = TopViewBox(cx=cx, cy=cy, width=width, length=length, yaw=yaw)
        return {"corners": box.corners().tolist()}

    if ui_dir and os.path.isdir(ui_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
