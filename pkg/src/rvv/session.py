"""Deterministic playback pipeline: decode -> resolve trackers -> commit
registry -> update effects -> evaluate scene.

All authoring state is declarative: any spec mutation (new tracker, effect,
parameter) invalidates checkpoints and rebuilds history by replaying from
frame 0, so seek(n) is always byte-identical to a fresh run stepped n times.
Checkpoints every 30 frames bound the replay cost of backward seeks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .camera import CameraIntrinsics, Vec3
from .container import load_sequence, read_ply
from .effects import (
    GHOST_BODY_RADIUS_M,
    Effect,
    EffectError,
    GhostEffect,
    GraphSeries,
    TrajectoryEffect,
)
from .frames import PointCloud, RgbdFrame, unproject, unproject_pixels
from .kinematics import (
    ParamSet,
    SampleWindow,
    VariableRegistry,
    commit_frame,
    declared_variables,
)
from .project import Project, ProjectError, validate
from .scene import (
    ConnectedLink,
    EmbeddedVisual,
    ObjectHighlight,
    ObjectHold,
    SceneError,
    SceneGraph,
    TextAnnotation,
    VirtualObject,
    evaluate,
    resolve_transforms,
    snapshot_bytes,
)
from .tracking import (
    BodyTracker,
    ColorTracker,
    ComponentDetail,
    PoseTrack,
    StationaryTracker,
    TrackedPoint,
    Tracker,
    create_color_tracker,
    create_stationary,
    loss_metric,
)

CHECKPOINT_INTERVAL = 30

_NAME_PREFIX = {"color": "obj", "body": "body", "stationary": "anchor"}


class SessionError(ValueError):
    pass


@dataclass(frozen=True)
class CameraPath:
    """Scripted snapshot camera: static by default, or a horizontal orbit."""

    kind: str = "static"
    position: Vec3 = (0.0, 0.0, 0.0)
    target: Vec3 = (0.0, 0.0, 1.0)
    radius: float = 1.5
    height: float = 0.0
    period_frames: int = 300
    phase_deg: float = 0.0

    def at(self, frame: int) -> Vec3:
        if self.kind == "static":
            return self.position
        a = 2.0 * math.pi * (frame / self.period_frames) + math.radians(self.phase_deg)
        return (
            self.target[0] + self.radius * math.cos(a),
            self.target[1] + self.height,
            self.target[2] + self.radius * math.sin(a),
        )

    @classmethod
    def from_json(cls, doc: dict) -> "CameraPath":
        kind = doc.get("kind", "static")
        if kind == "static":
            return cls(kind="static", position=tuple(doc.get("position", (0.0, 0.0, 0.0))))
        if kind == "orbit":
            return cls(
                kind="orbit",
                target=tuple(doc.get("target", (0.0, 0.0, 1.0))),
                radius=float(doc.get("radius", 1.5)),
                height=float(doc.get("height", 0.0)),
                period_frames=int(doc.get("period_frames", 300)),
                phase_deg=float(doc.get("phase_deg", 0.0)),
            )
        raise SessionError(f"unknown camera kind {kind!r}")


@dataclass
class _Checkpoint:
    frame: int
    trackers: dict[str, Tracker]
    windows: dict[str, SampleWindow]
    holds: dict[str, ObjectHold]
    effects: dict[str, Effect]
    registry: VariableRegistry
    tracked: dict[str, TrackedPoint]


def _clone_state(trackers, windows, holds, effects):
    return (
        {n: t.clone() for n, t in trackers.items()},
        {n: w.clone() for n, w in windows.items()},
        {n: h.clone() for n, h in holds.items()},
        {n: e.clone() for n, e in effects.items()},
    )


class Session:
    """One clip, one authoring state, one logical stepper."""

    def __init__(self, sequence, pose: PoseTrack | None = None,
                 camera: CameraPath | None = None,
                 background: tuple[np.ndarray, np.ndarray] | None = None,
                 checkpoint_interval: int = CHECKPOINT_INTERVAL):
        if sequence.frame_count < 1:
            raise SessionError("sequence has no frames")
        self.sequence = sequence
        self.k: CameraIntrinsics = sequence.intrinsics
        self.length: int = sequence.frame_count
        self.pose = pose
        self.camera = camera or CameraPath()
        self.background = background
        self.checkpoint_interval = checkpoint_interval

        self.trackers: dict[str, Tracker] = {}
        self.params = ParamSet()
        self.graph = SceneGraph()
        self.effects: dict[str, Effect] = {}
        self._counters = {"color": 0, "body": 0, "stationary": 0}

        self.cursor = 0
        self.state = "paused"
        self._windows: dict[str, SampleWindow] = {}
        self._holds: dict[str, ObjectHold] = {}
        self._registry: VariableRegistry | None = None
        self._tracked: dict[str, TrackedPoint] = {}
        self._checkpoints: dict[int, _Checkpoint] = {}
        self._snapshot: dict | None = None
        self._cloud: tuple[int, PointCloud] | None = None
        self._deferred = False
        self._advance(0)
        self._maybe_checkpoint(0)

    # -- declared names ------------------------------------------------------

    def declared_names(self) -> set[str]:
        return declared_variables(self.trackers.keys(), self.params.specs)

    def _all_ids(self) -> set[str]:
        ids = set(self.trackers)
        ids.update(s.name for s in self.params.specs)
        ids.update(self.graph.objects)
        ids.update(self.effects)
        return ids

    def _claim_id(self, candidate: str) -> None:
        if not candidate.isidentifier():
            raise SessionError(f"id {candidate!r} is not a valid identifier")
        if candidate in self._all_ids():
            raise SessionError(f"id {candidate!r} already in use")

    def _next_name(self, kind: str) -> str:
        prefix = _NAME_PREFIX[kind]
        taken = self._all_ids()
        n = self._counters[kind] + 1
        while f"{prefix}_{n}" in taken:
            n += 1
        self._counters[kind] = n
        return f"{prefix}_{n}"

    # -- authoring mutations ---------------------------------------------------

    def select_color(self, click: tuple[int, int], name: str | None = None,
                     frame: int | None = None, tolerance: int = 10,
                     min_component_px: int = 25) -> str:
        name = self._resolve_name(name, "color")
        at = self.cursor if frame is None else frame
        state, _ = create_color_tracker(self._decode(at), click, self.k, name,
                                        tolerance=tolerance, min_component_px=min_component_px)
        self.trackers[name] = ColorTracker(name, state)
        self._rebuild()
        return name

    def select_body(self, keypoint_index: int, name: str | None = None,
                    confidence_floor: float = 0.5) -> str:
        if self.pose is None:
            raise SessionError("no pose sidecar attached")
        if not (0 <= keypoint_index < self.pose.k):
            raise SessionError(
                f"keypoint index {keypoint_index} out of range (sidecar has {self.pose.k})"
            )
        name = self._resolve_name(name, "body")
        self.trackers[name] = BodyTracker(name, keypoint_index, confidence_floor)
        self._rebuild()
        return name

    def select_stationary(self, click: tuple[int, int], name: str | None = None,
                          frame: int | None = None, nudge: Vec3 = (0.0, 0.0, 0.0)) -> str:
        name = self._resolve_name(name, "stationary")
        at = self.cursor if frame is None else frame
        world = create_stationary(self._decode(at), click, self.k, nudge=nudge)
        self.trackers[name] = StationaryTracker(name, world)
        self._rebuild()
        return name

    def nudge_stationary(self, name: str, delta: Vec3) -> None:
        tr = self.trackers.get(name)
        if not isinstance(tr, StationaryTracker):
            raise SessionError(f"{name!r} is not a stationary tracker")
        w = tr.world
        tr.world = (w[0] + delta[0], w[1] + delta[1], w[2] + delta[2])
        self._rebuild()

    def _resolve_name(self, name: str | None, kind: str) -> str:
        if name is None:
            return self._next_name(kind)
        self._claim_id(name)
        return name

    def add_param(self, kind: str, operands, name: str | None = None) -> str:
        if name is not None:
            self._claim_id(name)
        else:
            name = self.params.next_name(kind)
            self._claim_id(name)
        spec = self.params.register(kind, tuple(operands), name, set(self.trackers))
        self._rebuild()
        return spec.name

    def add_object(self, obj: VirtualObject, tracker: str | None = None,
                   offset: Vec3 | None = None) -> str:
        self._claim_id(obj.id)
        if isinstance(obj, ConnectedLink):
            for end in (obj.a, obj.b):
                if isinstance(end, str) and end not in self.trackers:
                    raise SceneError(f"unknown tracker {end!r}")
            self.graph.add_object(obj)
        else:
            if tracker is None:
                raise SceneError("objects must be attached to a tracker")
            self.graph.add_object(obj)
            try:
                self.graph.attach(obj.id, tracker, set(self.trackers), offset)
            except SceneError:
                self.graph.remove_object(obj.id)
                raise
        self._rebuild()
        return obj.id

    def set_template(self, object_id: str, src: str) -> None:
        self.graph.set_template(object_id, src, self.declared_names())
        self._snapshot = None  # compose-only change, no history impact

    def set_property_binding(self, object_id: str, prop: str, expr_src: str,
                             a: float = 1.0, b: float = 0.0) -> None:
        self.graph.set_property_binding(object_id, prop, expr_src, a, b, self.declared_names())
        self._snapshot = None

    def add_effect(self, effect: Effect) -> str:
        self._claim_id(effect.id)
        if isinstance(effect, (TrajectoryEffect, GhostEffect)):
            tr = self.trackers.get(effect.tracker)
            if tr is None:
                raise EffectError(f"unknown tracker {effect.tracker!r}")
            if isinstance(effect, GhostEffect) and isinstance(tr, StationaryTracker):
                raise EffectError("ghost effects need a color or body tracker")
        elif isinstance(effect, GraphSeries):
            if effect.variable not in self.declared_names():
                raise EffectError(f"unknown variable {effect.variable!r}")
        self.effects[effect.id] = effect
        self._rebuild()
        return effect.id

    def remove_entity(self, entity_id: str) -> None:
        if entity_id in self.trackers:
            used_by = [s.name for s in self.params.specs if entity_id in s.operands]
            used_by += [oid for oid, b in self.graph.bindings.items() if b.tracker == entity_id]
            used_by += [o.id for o in self.graph.objects.values()
                        if isinstance(o, ConnectedLink) and entity_id in (o.a, o.b)]
            used_by += [e.id for e in self.effects.values()
                        if getattr(e, "tracker", None) == entity_id]
            if used_by:
                raise SessionError(
                    f"tracker {entity_id!r} is referenced by {sorted(used_by)}; remove those first"
                )
            del self.trackers[entity_id]
            self._windows.pop(entity_id, None)
        elif entity_id in self.graph.objects:
            self.graph.remove_object(entity_id)
            self._holds.pop(entity_id, None)
        elif entity_id in self.effects:
            del self.effects[entity_id]
        elif any(s.name == entity_id for s in self.params.specs):
            used_by = [e.id for e in self.effects.values()
                       if isinstance(e, GraphSeries)
                       and e.variable in _spec_names(self.params, entity_id)]
            if used_by:
                raise SessionError(
                    f"parameter {entity_id!r} feeds {sorted(used_by)}; remove those first"
                )
            self.params.remove(entity_id)
        else:
            raise SessionError(f"unknown entity {entity_id!r}")
        self._rebuild()

    # -- pipeline ---------------------------------------------------------------

    def _decode(self, frame: int) -> RgbdFrame:
        if not (0 <= frame < self.length):
            raise SessionError(f"frame {frame} out of range (clip has {self.length})")
        return self.sequence.frame(frame)

    def _advance(self, f: int) -> None:
        frame = self._decode(f)
        pose_frame = self.pose.frame(f) if self.pose is not None else None
        tracked: dict[str, TrackedPoint] = {}
        details: dict[str, ComponentDetail | None] = {}
        for name, tr in self.trackers.items():
            tp, det = tr.resolve(frame, pose_frame, self.k)
            tracked[name] = tp
            details[name] = det
        for name in self.trackers:
            w = self._windows.get(name)
            if w is None:
                w = self._windows[name] = SampleWindow()
            tp = tracked[name]
            w.push(f, tp.world if tp.valid else None)
        registry = commit_frame(f, tracked, self._windows, self.params.specs)
        for eff in self.effects.values():
            if isinstance(eff, TrajectoryEffect):
                eff.update(f, tracked.get(eff.tracker))
            elif isinstance(eff, GhostEffect):
                tp = tracked.get(eff.tracker)
                valid = tp is not None and tp.valid
                eff.update(f, valid,
                           lambda e=eff, d=details, fr=frame, t=tp:
                           self._clone_points(e.tracker, d, fr, t))
            else:
                eff.update(f, registry)
        resolve_transforms(self.graph, tracked, self.camera.at(f), self._holds)
        self.cursor = f
        self._tracked = tracked
        self._registry = registry
        self._snapshot = None
        if self._cloud is not None and self._cloud[0] != f:
            self._cloud = None

    def _clone_points(self, tracker_name: str, details, frame: RgbdFrame,
                      tp: TrackedPoint | None) -> tuple[np.ndarray, np.ndarray]:
        tr = self.trackers[tracker_name]
        if isinstance(tr, ColorTracker):
            det = details.get(tracker_name)
            if det is None:
                return np.empty((0, 3), np.float32), np.empty((0, 3), np.uint8)
            mask = np.zeros(frame.depth.shape, dtype=bool)
            mask[det.rows, det.cols] = True
            cloud = unproject_pixels(frame, self.k, mask)
            return cloud.positions, cloud.colors
        # body tracker: everything within 0.5 m of the keypoint
        cloud = self.cloud(frame.index)
        center = np.asarray(tp.world, dtype=np.float64)
        d2 = np.sum((cloud.positions.astype(np.float64) - center) ** 2, axis=1)
        sel = d2 <= GHOST_BODY_RADIUS_M * GHOST_BODY_RADIUS_M
        return cloud.positions[sel], cloud.colors[sel]

    def _maybe_checkpoint(self, f: int) -> None:
        if f % self.checkpoint_interval == 0:
            trackers, windows, holds, effects = _clone_state(
                self.trackers, self._windows, self._holds, self.effects)
            self._checkpoints[f] = _Checkpoint(
                f, trackers, windows, holds, effects, self._registry, dict(self._tracked))

    def _restore(self, cp: _Checkpoint) -> None:
        trackers, windows, holds, effects = _clone_state(
            cp.trackers, cp.windows, cp.holds, cp.effects)
        self.trackers = trackers
        self._windows = windows
        self._holds = holds
        self.effects = effects
        self._registry = cp.registry
        self._tracked = dict(cp.tracked)
        self.cursor = cp.frame
        self._snapshot = None
        self._cloud = None

    def _rebuild(self) -> None:
        """Replay from frame 0 with the current spec; lands back on the cursor."""
        if self._deferred:
            return
        target = self.cursor
        self._checkpoints.clear()
        self._windows = {}
        self._holds = {}
        self.trackers = {n: t.clone() for n, t in self.trackers.items()}
        for tr in self.trackers.values():
            if isinstance(tr, ColorTracker):
                tr.state.last_world = None
                tr.state.lost = False
        self.effects = {eid: _fresh_effect(e) for eid, e in self.effects.items()}
        for f in range(target + 1):
            self._advance(f)
            self._maybe_checkpoint(f)

    def batch(self):
        """Context manager deferring rebuilds while loading many entities."""
        return _BatchContext(self)

    # -- playback -----------------------------------------------------------------

    def play(self) -> None:
        self.state = "playing"

    def pause(self) -> None:
        self.state = "paused"

    def step(self) -> dict:
        """Advance one frame; at the end of the clip, pause and hold the last frame."""
        if self.cursor >= self.length - 1:
            self.state = "paused"
            return self.current_snapshot()
        self._advance(self.cursor + 1)
        self._maybe_checkpoint(self.cursor)
        return self.current_snapshot()

    def seek(self, n: int) -> dict:
        if not (0 <= n < self.length):
            raise SessionError(f"seek target {n} out of range (clip has {self.length})")
        if n == self.cursor:
            return self.current_snapshot()
        if n > self.cursor:
            while self.cursor < n:
                self._advance(self.cursor + 1)
                self._maybe_checkpoint(self.cursor)
            return self.current_snapshot()
        candidates = [f for f in self._checkpoints if f <= n]
        if not candidates:
            raise AssertionError("checkpoint 0 always exists")
        cp = self._checkpoints[max(candidates)]
        self._restore(cp)
        while self.cursor < n:
            self._advance(self.cursor + 1)
            self._maybe_checkpoint(self.cursor)
        return self.current_snapshot()

    def current_snapshot(self) -> dict:
        if self._snapshot is None:
            geo = {eid: self.effects[eid].geometry() for eid in sorted(self.effects)}
            self._snapshot = evaluate(self.graph, self._registry, self._tracked,
                                      self._holds, geo, self.camera.at(self.cursor),
                                      self.cursor)
        return self._snapshot

    def current_snapshot_bytes(self) -> bytes:
        return snapshot_bytes(self.current_snapshot())

    def cloud(self, frame: int | None = None) -> PointCloud:
        f = self.cursor if frame is None else frame
        if self._cloud is not None and self._cloud[0] == f:
            return self._cloud[1]
        cloud = unproject(self._decode(f), self.k)
        self._cloud = (f, cloud)
        return cloud

    def tracked_point(self, name: str) -> TrackedPoint:
        if name not in self._tracked:
            raise SessionError(f"unknown tracker {name!r}")
        return self._tracked[name]

    # -- metrics --------------------------------------------------------------------

    def tracking_metrics(self, tracker: str, frame_range: tuple[int, int] | None = None) -> dict:
        """Valid fraction over the range (inclusive), Table-1 style."""
        tr = self.trackers.get(tracker)
        if tr is None:
            raise SessionError(f"unknown tracker {tracker!r}")
        a, b = frame_range if frame_range is not None else (0, self.length - 1)
        if not (0 <= a <= b < self.length):
            raise SessionError(f"bad frame range {a}..{b}")
        probe = tr.clone()
        if isinstance(probe, ColorTracker):
            probe.state.last_world = None
            probe.state.lost = False
        flags = []
        for f in range(a, b + 1):
            frame = self._decode(f)
            pose_frame = self.pose.frame(f) if self.pose is not None else None
            tp, _ = probe.resolve(frame, pose_frame, self.k)
            flags.append(tp.valid)
        return {
            "tracker": tracker,
            "first_frame": a,
            "last_frame": b,
            "frames": len(flags),
            "valid_frames": sum(flags),
            "fraction": loss_metric(flags),
        }

    # -- project loading ---------------------------------------------------------------

    @classmethod
    def from_project(cls, project: Project, base_dir: str | Path) -> "Session":
        base = Path(base_dir)
        problems = validate(project, base)
        if problems:
            raise ProjectError("invalid project: " + "; ".join(problems))
        sequence = load_sequence(base / project.sequence)
        pose = None
        if project.pose_sidecar:
            pose = PoseTrack.load(base / project.pose_sidecar,
                                  expected_frames=sequence.frame_count)
        background = None
        if project.background_ply:
            background = read_ply(base / project.background_ply)
        camera = CameraPath.from_json(project.camera)
        session = cls(sequence, pose=pose, camera=camera, background=background)
        with session.batch():
            for t in project.trackers:
                kind = t["kind"]
                if kind == "color":
                    session.select_color(tuple(t["click"]), name=t["name"],
                                         frame=int(t.get("frame", 0)),
                                         tolerance=int(t.get("tolerance", 10)),
                                         min_component_px=int(t.get("min_component_px", 25)))
                elif kind == "body":
                    session.select_body(int(t["keypoint"]), name=t["name"],
                                        confidence_floor=float(t.get("confidence_floor", 0.5)))
                else:
                    session.select_stationary(tuple(t["click"]), name=t["name"],
                                              frame=int(t.get("frame", 0)),
                                              nudge=tuple(t.get("nudge", (0.0, 0.0, 0.0))))
            for p in project.params:
                session.add_param(p["kind"], tuple(p["operands"]), p["name"])
            binding_by_object = {b["object"]: b for b in project.bindings}
            for o in project.objects:
                obj = _object_from_json(o)
                if isinstance(obj, ConnectedLink):
                    session.add_object(obj)
                    continue
                b = binding_by_object.get(obj.id)
                if b is None:
                    raise ProjectError(f"object {obj.id!r} has no binding")
                session.add_object(obj, tracker=b["tracker"],
                                   offset=tuple(b["offset"]) if "offset" in b else None)
            for pb in project.property_bindings:
                session.set_property_binding(pb["object"], pb["property"], pb["expr"],
                                             float(pb.get("a", 1.0)), float(pb.get("b", 0.0)))
            for e in project.effects:
                session.add_effect(_effect_from_json(e))
        return session


class _BatchContext:
    def __init__(self, session: Session):
        self.session = session

    def __enter__(self):
        self.session._deferred = True
        return self.session

    def __exit__(self, exc_type, exc, tb):
        self.session._deferred = False
        if exc_type is None:
            self.session._rebuild()
        return False


def _fresh_effect(e: Effect) -> Effect:
    if isinstance(e, TrajectoryEffect):
        return TrajectoryEffect(e.id, e.tracker, e.ttl_frames, e.radius_m, e.style)
    if isinstance(e, GhostEffect):
        return GhostEffect(e.id, e.tracker, e.cadence_frames, e.max_ghosts, e.start_frame)
    return GraphSeries(e.id, e.variable, e.window, e.chart)


def _spec_names(params: ParamSet, name: str) -> set[str]:
    for s in params.specs:
        if s.name == name:
            return set(s.variable_names())
    return set()


def _object_from_json(doc: dict) -> VirtualObject:
    kind = doc.get("kind")
    oid = doc["id"]
    if kind == "text":
        return TextAnnotation(
            id=oid,
            template_src=doc.get("template", ""),
            offset=tuple(doc.get("offset", (0.0, 0.15, 0.0))),
            billboard=bool(doc.get("billboard", True)),
            precision=int(doc.get("precision", 2)),
            orientation=tuple(doc.get("orientation", (1.0, 0.0, 0.0, 0.0))),
        )
    if kind == "highlight":
        return ObjectHighlight(
            id=oid,
            shape=doc.get("shape", "sphere"),
            scale=tuple(doc.get("scale", (0.1, 0.1, 0.1))),
            color=tuple(doc.get("color", (255, 220, 0, 160))),
            offset=tuple(doc.get("offset", (0.0, 0.0, 0.0))),
            orientation=tuple(doc.get("orientation", (1.0, 0.0, 0.0, 0.0))),
        )
    if kind == "visual":
        return EmbeddedVisual(
            id=oid,
            source=doc["source"],
            size=tuple(doc.get("size", (0.4, 0.3))),
            opacity=float(doc.get("opacity", 1.0)),
            billboard=bool(doc.get("billboard", True)),
            orientation=tuple(doc.get("orientation", (1.0, 0.0, 0.0, 0.0))),
        )
    if kind == "link":
        return ConnectedLink(
            id=oid,
            a=_endpoint_from_json(doc["a"]),
            b=_endpoint_from_json(doc["b"]),
            thickness=float(doc.get("thickness", 0.005)),
            color=tuple(doc.get("color", (255, 255, 255, 255))),
        )
    raise ProjectError(f"unknown object kind {kind!r}")


def _endpoint_from_json(doc) -> str | Vec3:
    if isinstance(doc, dict) and "tracker" in doc:
        return doc["tracker"]
    if isinstance(doc, dict) and "fixed" in doc:
        return tuple(float(v) for v in doc["fixed"])
    raise ProjectError(f"bad link endpoint {doc!r}")


def _effect_from_json(doc: dict) -> Effect:
    kind = doc.get("kind")
    eid = doc["id"]
    if kind == "trajectory":
        return TrajectoryEffect(
            id=eid, tracker=doc["tracker"],
            ttl_frames=int(doc.get("ttl_frames", 150)),
            radius_m=float(doc.get("radius", 0.01)),
            style=doc.get("style", "markers"),
        )
    if kind == "ghost":
        return GhostEffect(
            id=eid, tracker=doc["tracker"],
            cadence_frames=int(doc.get("cadence_frames", 30)),
            max_ghosts=doc.get("max_ghosts"),
            start_frame=int(doc.get("start_frame", 0)),
        )
    if kind == "graph":
        return GraphSeries(
            id=eid, variable=doc["variable"],
            window=int(doc.get("window", 300)),
            chart=doc.get("chart", "line"),
        )
    raise ProjectError(f"unknown effect kind {kind!r}")
