"""Authoring session served over WebSocket: JSON text frames for commands
and snapshots, binary frames for point clouds.

One authoring client mutates the session; any number of read-only viewers
receive the same stream. Every inbound command gets exactly one Ack or
Error echoing its sequence number. Per frame the cloud goes out first,
then the snapshot; slow consumers lose stale clouds but never snapshots.

FrameCloud binary layout (little-endian):
    "FCLD" | u32 frame index | u32 point count | per point f32 x y z + u8 r g b
"""

from __future__ import annotations

import asyncio
import json
import struct
import threading
from collections import deque
from pathlib import Path

import numpy as np
from websockets.asyncio.server import serve as ws_serve

from .effects import EffectError, pack_points
from .expressions import TemplateError
from .kinematics import ParamError
from .project import Project, ProjectError
from .scene import SceneError
from .session import Session, SessionError, _effect_from_json, _object_from_json
from .tracking import SidecarError, TrackingError

PROTOCOL_VERSION = 1
FCLD_MAGIC = b"FCLD"
DEFAULT_STREAM_STRIDE = 4
_BACKPRESSURE_ITEMS = 8

_POINT_DTYPE = np.dtype([("pos", "<f4", (3,)), ("rgb", "u1", (3,))])


def encode_frame_cloud(frame: int, positions: np.ndarray, colors: np.ndarray,
                       stride: int = 1) -> bytes:
    if stride > 1:
        positions = positions[::stride]
        colors = colors[::stride]
    rec = np.empty(positions.shape[0], dtype=_POINT_DTYPE)
    rec["pos"] = positions
    rec["rgb"] = colors
    return FCLD_MAGIC + struct.pack("<II", frame, positions.shape[0]) + rec.tobytes()


def decode_frame_cloud(data: bytes) -> tuple[int, np.ndarray, np.ndarray]:
    if data[:4] != FCLD_MAGIC:
        raise ValueError(f"bad FrameCloud magic {data[:4]!r}")
    frame, count = struct.unpack_from("<II", data, 4)
    rec = np.frombuffer(data, dtype=_POINT_DTYPE, offset=12, count=count)
    return frame, rec["pos"].copy(), rec["rgb"].copy()


class _Client:
    def __init__(self, ws):
        self.ws = ws
        self.role: str | None = None  # set by hello
        self.pending: deque = deque()
        self.wake = asyncio.Event()
        self.closed = False

    def enqueue_text(self, payload: str) -> None:
        self.pending.append(payload)
        self.wake.set()

    def enqueue_bundle(self, cloud: bytes | None, snapshot: str) -> None:
        if len(self.pending) > _BACKPRESSURE_ITEMS:
            # drop stale clouds for this slow consumer; snapshots always flow
            self.pending = deque(p for p in self.pending if not isinstance(p, bytes))
        if cloud is not None:
            self.pending.append(cloud)
        self.pending.append(snapshot)
        self.wake.set()

    async def sender(self) -> None:
        try:
            while True:
                await self.wake.wait()
                self.wake.clear()
                while self.pending:
                    await self.ws.send(self.pending.popleft())
        except Exception:
            self.closed = True


class SessionService:
    """One session, one pipeline task, many connections."""

    def __init__(self, session: Session | None = None,
                 base_dir: str | Path | None = None,
                 stride: int = DEFAULT_STREAM_STRIDE):
        self.session = session
        self.base_dir = Path(base_dir) if base_dir else Path.cwd()
        self.stride = max(1, stride)
        self.clients: list[_Client] = []
        self.author: _Client | None = None
        self.port: int | None = None
        self._commands: deque = deque()
        self._wake: asyncio.Event | None = None
        self._stop: asyncio.Event | None = None
        self._loop: asyncio.AbstractEventLoop | None = None
        self._play_epoch: tuple[float, int] | None = None

    @classmethod
    def from_project_path(cls, project_path: str | Path,
                          stride: int = DEFAULT_STREAM_STRIDE) -> "SessionService":
        path = Path(project_path)
        project = Project.load(path)
        session = Session.from_project(project, path.parent)
        return cls(session, base_dir=path.parent, stride=stride)

    # -- lifecycle -------------------------------------------------------------

    async def run(self, host: str, port: int, on_ready=None) -> None:
        self._loop = asyncio.get_running_loop()
        self._wake = asyncio.Event()
        self._stop = asyncio.Event()
        async with ws_serve(self._handler, host, port, max_size=64 * 1024 * 1024) as server:
            self.port = server.sockets[0].getsockname()[1]
            if on_ready is not None:
                on_ready(self.port)
            pipeline = asyncio.create_task(self._pipeline())
            await self._stop.wait()
            pipeline.cancel()

    def stop(self) -> None:
        if self._loop is not None and self._stop is not None:
            self._loop.call_soon_threadsafe(self._stop.set)

    # -- connections -------------------------------------------------------------

    async def _handler(self, ws) -> None:
        client = _Client(ws)
        self.clients.append(client)
        sender = asyncio.create_task(client.sender())
        try:
            async for message in ws:
                if isinstance(message, bytes):
                    client.enqueue_text(_error_text(0, "parse", "binary frames are not commands"))
                    continue
                try:
                    doc = json.loads(message)
                    if not isinstance(doc, dict):
                        raise ValueError("command must be a JSON object")
                except ValueError as e:
                    client.enqueue_text(_error_text(0, "parse", str(e)))
                    continue
                self._commands.append((client, doc))
                if self._wake is not None:
                    self._wake.set()
        finally:
            client.closed = True
            sender.cancel()
            self.clients.remove(client)
            if self.author is client:
                self.author = None

    # -- pipeline ----------------------------------------------------------------

    async def _pipeline(self) -> None:
        assert self._wake is not None
        loop = asyncio.get_running_loop()
        while True:
            mutated = False
            while self._commands:
                client, doc = self._commands.popleft()
                mutated |= self._handle(client, doc)
            s = self.session
            timeout = None
            if s is not None and s.state == "playing" and s.length > 1:
                now = loop.time()
                if self._play_epoch is None:
                    self._play_epoch = (now, s.cursor)
                epoch_t, epoch_f = self._play_epoch
                due = epoch_t + (s.cursor - epoch_f + 1) / 30.0
                if now >= due:
                    before = s.cursor
                    s.step()
                    if s.state != "playing" or s.cursor == before:
                        self._play_epoch = None  # clip ended
                    self._broadcast_frame()
                    continue
                timeout = due - now
            else:
                self._play_epoch = None
                if mutated and s is not None:
                    self._broadcast_frame()
            try:
                await asyncio.wait_for(self._wake.wait(), timeout)
            except asyncio.TimeoutError:
                pass
            self._wake.clear()

    def _frame_bundle(self) -> tuple[bytes, str]:
        s = self.session
        cloud = s.cloud()
        cloud_bytes = encode_frame_cloud(s.cursor, cloud.positions, cloud.colors, self.stride)
        snap_text = s.current_snapshot_bytes().decode("utf-8")
        return cloud_bytes, snap_text

    def _broadcast_frame(self) -> None:
        if self.session is None or not self.clients:
            return
        cloud_bytes, snap_text = self._frame_bundle()
        for client in self.clients:
            if client.role is not None:
                client.enqueue_bundle(cloud_bytes, snap_text)

    # -- command handling -------------------------------------------------------------

    def _handle(self, client: _Client, doc: dict) -> bool:
        """Applies one command; sends exactly one Ack or Error. Returns
        True when session state changed (snapshot needs rebroadcast)."""
        seq = doc.get("seq") if isinstance(doc.get("seq"), int) else 0
        cmd = doc.get("cmd")
        try:
            if cmd == "hello":
                return self._cmd_hello(client, seq, doc)
            if client.role is None:
                client.enqueue_text(_error_text(seq, "bad-state", "say hello first"))
                return False
            if cmd == "query_metrics":
                return self._cmd_metrics(client, seq, doc)
            if client.role != "author":
                client.enqueue_text(_error_text(seq, "read-only", "viewers cannot mutate"))
                return False
            if cmd == "load_project":
                return self._cmd_load_project(client, seq, doc)
            if self.session is None:
                client.enqueue_text(_error_text(seq, "bad-state", "no project loaded"))
                return False
            handler = {
                "play": self._cmd_play,
                "pause": self._cmd_pause,
                "seek": self._cmd_seek,
                "select_at": self._cmd_select_at,
                "create_param": self._cmd_create_param,
                "attach_object": self._cmd_attach_object,
                "set_template": self._cmd_set_template,
                "set_property_binding": self._cmd_set_property_binding,
                "add_effect": self._cmd_add_effect,
                "remove_entity": self._cmd_remove_entity,
                "export": self._cmd_export,
            }.get(cmd)
            if handler is None:
                client.enqueue_text(_error_text(seq, "unknown-command", f"unknown cmd {cmd!r}"))
                return False
            return handler(client, seq, doc)
        except (KeyError, TypeError, ValueError) as e:
            code, detail, offset = _classify_error(e)
            client.enqueue_text(_error_text(seq, code, detail, offset))
            return False
        except Exception as e:  # never kill the pipeline from one command
            client.enqueue_text(_error_text(seq, "internal", f"{type(e).__name__}: {e}"))
            return False

    def _ack(self, client: _Client, seq: int, result: dict | None = None) -> None:
        doc = {"type": "ack", "seq": seq}
        if result:
            doc["result"] = result
        client.enqueue_text(json.dumps(doc, sort_keys=True))

    def _cmd_hello(self, client: _Client, seq: int, doc: dict) -> bool:
        protover = doc.get("protover")
        if protover != PROTOCOL_VERSION:
            client.enqueue_text(_error_text(
                seq, "protover", f"server speaks protover {PROTOCOL_VERSION}, got {protover!r}"))
            return False
        role = doc.get("role", "author")
        if role not in ("author", "viewer"):
            client.enqueue_text(_error_text(seq, "parse", f"unknown role {role!r}"))
            return False
        if role == "author":
            if self.author is not None and self.author is not client:
                client.enqueue_text(_error_text(
                    seq, "busy", "an authoring client is already connected"))
                client.role = "viewer"
                self._send_current(client)
                return False
            self.author = client
        client.role = role
        result = {"protover": PROTOCOL_VERSION, "role": client.role,
                  "project_loaded": self.session is not None}
        if self.session is not None:
            result["frames"] = self.session.length
            result["frame"] = self.session.cursor
            if self.session.background is not None:
                # static scenery ships once, packed like ghost point sets
                positions, colors = self.session.background
                result["background"] = {
                    "count": int(positions.shape[0]),
                    "points_b64": pack_points(positions.astype(np.float32, copy=False),
                                              colors),
                }
        self._ack(client, seq, result)
        self._send_current(client)
        return False

    def _send_current(self, client: _Client) -> None:
        if self.session is not None:
            cloud_bytes, snap_text = self._frame_bundle()
            client.enqueue_bundle(cloud_bytes, snap_text)

    def _cmd_load_project(self, client: _Client, seq: int, doc: dict) -> bool:
        path = self.base_dir / doc["path"]
        project = Project.load(path)
        self.session = Session.from_project(project, path.parent)
        self._play_epoch = None
        self._ack(client, seq, {"frames": self.session.length})
        return True

    def _cmd_play(self, client: _Client, seq: int, doc: dict) -> bool:
        self.session.play()
        self._play_epoch = None
        self._ack(client, seq)
        if self._wake is not None:
            self._wake.set()
        return False

    def _cmd_pause(self, client: _Client, seq: int, doc: dict) -> bool:
        self.session.pause()
        self._play_epoch = None
        self._ack(client, seq)
        return True

    def _cmd_seek(self, client: _Client, seq: int, doc: dict) -> bool:
        self.session.seek(int(doc["frame"]))
        self._play_epoch = None
        self._ack(client, seq, {"frame": self.session.cursor})
        return True

    def _cmd_select_at(self, client: _Client, seq: int, doc: dict) -> bool:
        mode = doc.get("mode", "color")
        name = doc.get("name")
        if mode == "color":
            tracker = self.session.select_color((int(doc["u"]), int(doc["v"])), name=name)
        elif mode == "body":
            tracker = self.session.select_body(int(doc["keypoint"]), name=name)
        elif mode == "stationary":
            tracker = self.session.select_stationary((int(doc["u"]), int(doc["v"])), name=name)
        else:
            client.enqueue_text(_error_text(seq, "parse", f"unknown selection mode {mode!r}"))
            return False
        self._ack(client, seq, {"tracker": tracker})
        client.enqueue_text(json.dumps(self._tracker_update(tracker), sort_keys=True))
        return True

    def _tracker_update(self, name: str) -> dict:
        tp = self.session.tracked_point(name)
        tracker = self.session.trackers[name]
        return {
            "type": "tracker_update",
            "tracker": {
                "name": name,
                "kind": tracker.kind,
                "frame": tp.frame,
                "valid": tp.valid,
                "world": list(tp.world) if tp.world is not None else None,
            },
        }

    def _cmd_create_param(self, client: _Client, seq: int, doc: dict) -> bool:
        name = self.session.add_param(doc["kind"], tuple(doc["operands"]), doc.get("name"))
        self._ack(client, seq, {"name": name})
        return True

    def _cmd_attach_object(self, client: _Client, seq: int, doc: dict) -> bool:
        obj = _object_from_json(doc["object"])
        offset = tuple(doc["offset"]) if "offset" in doc else None
        oid = self.session.add_object(obj, tracker=doc.get("tracker"), offset=offset)
        self._ack(client, seq, {"id": oid})
        return True

    def _cmd_set_template(self, client: _Client, seq: int, doc: dict) -> bool:
        self.session.set_template(doc["object"], doc["src"])
        self._ack(client, seq)
        return True

    def _cmd_set_property_binding(self, client: _Client, seq: int, doc: dict) -> bool:
        self.session.set_property_binding(
            doc["object"], doc["property"], doc["expr"],
            float(doc.get("a", 1.0)), float(doc.get("b", 0.0)))
        self._ack(client, seq)
        return True

    def _cmd_add_effect(self, client: _Client, seq: int, doc: dict) -> bool:
        eid = self.session.add_effect(_effect_from_json(doc["effect"]))
        self._ack(client, seq, {"id": eid})
        return True

    def _cmd_remove_entity(self, client: _Client, seq: int, doc: dict) -> bool:
        self.session.remove_entity(doc["id"])
        self._ack(client, seq)
        return True

    def _cmd_export(self, client: _Client, seq: int, doc: dict) -> bool:
        from .export import export_range

        out = self.base_dir / doc["path"]
        rng = tuple(doc["range"]) if "range" in doc else None
        n = export_range(self.session, out, frame_range=rng, ply=bool(doc.get("ply", False)))
        self._ack(client, seq, {"frames": n, "path": str(out)})
        return True

    def _cmd_metrics(self, client: _Client, seq: int, doc: dict) -> bool:
        if self.session is None:
            client.enqueue_text(_error_text(seq, "bad-state", "no project loaded"))
            return False
        rng = tuple(doc["range"]) if "range" in doc else None
        report = self.session.tracking_metrics(doc["tracker"], rng)
        self._ack(client, seq)
        client.enqueue_text(json.dumps({"type": "metrics", **report}, sort_keys=True))
        return False


def _classify_error(e: Exception) -> tuple[str, str, int | None]:
    if isinstance(e, TemplateError):
        return "invalid", str(e), e.offset
    if isinstance(e, (SceneError, ParamError, EffectError, SessionError,
                      TrackingError, SidecarError, ProjectError)):
        return "invalid", str(e), None
    if isinstance(e, KeyError):
        return "parse", f"missing field {e}", None
    return "parse", str(e), None


def _error_text(seq: int, code: str, detail: str, offset: int | None = None) -> str:
    doc = {"type": "error", "seq": seq, "code": code, "detail": detail}
    if offset is not None:
        doc["offset"] = offset
    return json.dumps(doc, sort_keys=True)


# -- entry points ---------------------------------------------------------------

def serve_blocking(project_path: str | Path, host: str, port: int,
                   stride: int = DEFAULT_STREAM_STRIDE) -> None:
    service = SessionService.from_project_path(project_path, stride=stride)

    def ready(bound_port: int) -> None:
        print(f"serving on ws://{host}:{bound_port}", flush=True)

    asyncio.run(service.run(host, port, on_ready=ready))


class ServiceThread:
    """Runs a service on an ephemeral port in a daemon thread (tests, demos)."""

    def __init__(self, session: Session | None = None, base_dir=None,
                 stride: int = DEFAULT_STREAM_STRIDE):
        self.service = SessionService(session, base_dir=base_dir, stride=stride)
        self._ready = threading.Event()
        self.port: int | None = None
        self.thread = threading.Thread(target=self._run, daemon=True)

    def _run(self) -> None:
        def ready(port: int) -> None:
            self.port = port
            self._ready.set()

        asyncio.run(self.service.run("127.0.0.1", 0, on_ready=ready))

    def __enter__(self) -> "ServiceThread":
        self.thread.start()
        if not self._ready.wait(timeout=10):
            raise RuntimeError("service failed to start")
        return self

    def __exit__(self, *exc) -> None:
        self.service.stop()
        self.thread.join(timeout=10)

    @property
    def url(self) -> str:
        return f"ws://127.0.0.1:{self.port}"
