"""Motion-derived effects: trajectory trails, ghost clones, graph series.

All effect state is history-bearing and participates in checkpoint/replay,
so every class exposes clone(). Geometry lands inside the frame snapshot;
ghost point sets are packed binary (f32 position + u8 RGB per point,
little-endian) and base64-encoded to keep 30 FPS serialization viable.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field

import numpy as np

from .camera import Vec3
from .kinematics import VariableRegistry
from .tracking import TrackedPoint

TRAJECTORY_TTL_FRAMES = 150  # 5 s at 30 FPS
TRAJECTORY_RADIUS_M = 0.01
GHOST_CADENCE_FRAMES = 30  # one clone per second
GHOST_OPACITY_NEWEST = 0.6
GHOST_OPACITY_OLDEST = 0.2
GRAPH_WINDOW_FRAMES = 300
GHOST_BODY_RADIUS_M = 0.5  # clone region around a body keypoint

_POINT_DTYPE = np.dtype([("pos", "<f4", (3,)), ("rgb", "u1", (3,))])


class EffectError(ValueError):
    pass


def pack_points(positions: np.ndarray, colors: np.ndarray) -> str:
    rec = np.empty(positions.shape[0], dtype=_POINT_DTYPE)
    rec["pos"] = positions
    rec["rgb"] = colors
    return base64.b64encode(rec.tobytes()).decode("ascii")


def unpack_points(data: str) -> tuple[np.ndarray, np.ndarray]:
    rec = np.frombuffer(base64.b64decode(data), dtype=_POINT_DTYPE)
    return rec["pos"].copy(), rec["rgb"].copy()


@dataclass
class TrajectoryEffect:
    id: str
    tracker: str
    ttl_frames: int = TRAJECTORY_TTL_FRAMES
    radius_m: float = TRAJECTORY_RADIUS_M
    style: str = "markers"  # or "trail" for a polyline
    markers: list[tuple[int, Vec3]] = field(default_factory=list)  # (birth, world)

    def __post_init__(self) -> None:
        if self.ttl_frames < 1:
            raise EffectError("ttl_frames must be >= 1")
        if self.style not in ("markers", "trail"):
            raise EffectError(f"unknown trajectory style {self.style!r}")

    def update(self, frame: int, tp: TrackedPoint | None) -> None:
        if tp is not None and tp.valid:
            self.markers.append((frame, tp.world))
        # age >= ttl expires; markers are in birth order so one scan suffices
        cutoff = frame - self.ttl_frames
        while self.markers and self.markers[0][0] <= cutoff:
            self.markers.pop(0)

    def geometry(self) -> dict:
        return {
            "kind": "trajectory",
            "tracker": self.tracker,
            "style": self.style,
            "radius": self.radius_m,
            "markers": [[p[0], p[1], p[2], birth] for birth, p in self.markers],
        }

    def clone(self) -> "TrajectoryEffect":
        c = TrajectoryEffect(self.id, self.tracker, self.ttl_frames, self.radius_m, self.style)
        c.markers = list(self.markers)
        return c


@dataclass(frozen=True)
class GhostSnapshot:
    frame: int
    positions: np.ndarray  # (n, 3) float32
    colors: np.ndarray  # (n, 3) uint8

    def __post_init__(self) -> None:
        self.positions.setflags(write=False)
        self.colors.setflags(write=False)


@dataclass
class GhostEffect:
    id: str
    tracker: str
    cadence_frames: int = GHOST_CADENCE_FRAMES
    max_ghosts: int | None = None
    start_frame: int = 0
    snapshots: list[GhostSnapshot] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.cadence_frames < 1:
            raise EffectError("cadence_frames must be >= 1")

    def due(self, frame: int) -> bool:
        return frame >= self.start_frame and (frame - self.start_frame) % self.cadence_frames == 0

    def update(self, frame: int, valid: bool, clone_points) -> None:
        """clone_points: lazy () -> (positions, colors); invalid frames skip the spawn."""
        if not self.due(frame) or not valid:
            return
        positions, colors = clone_points()
        if positions.shape[0] == 0:
            return
        self.snapshots.append(GhostSnapshot(frame, positions.astype(np.float32, copy=False),
                                            np.asarray(colors, dtype=np.uint8)))
        if self.max_ghosts is not None and len(self.snapshots) > self.max_ghosts:
            del self.snapshots[: len(self.snapshots) - self.max_ghosts]

    def opacities(self) -> list[float]:
        """Oldest -> newest, linear 0.2 -> 0.6; a single ghost shows at 0.6."""
        n = len(self.snapshots)
        if n == 0:
            return []
        if n == 1:
            return [GHOST_OPACITY_NEWEST]
        span = GHOST_OPACITY_NEWEST - GHOST_OPACITY_OLDEST
        return [GHOST_OPACITY_OLDEST + span * i / (n - 1) for i in range(n)]

    def geometry(self) -> dict:
        ops = self.opacities()
        return {
            "kind": "ghost",
            "tracker": self.tracker,
            "snapshots": [
                {
                    "frame": snap.frame,
                    "opacity": ops[i],
                    "count": int(snap.positions.shape[0]),
                    "points_b64": pack_points(snap.positions, snap.colors),
                }
                for i, snap in enumerate(self.snapshots)
            ],
        }

    def clone(self) -> "GhostEffect":
        c = GhostEffect(self.id, self.tracker, self.cadence_frames, self.max_ghosts,
                        self.start_frame)
        c.snapshots = list(self.snapshots)  # snapshots are frozen, share them
        return c


@dataclass
class GraphSeries:
    id: str
    variable: str
    window: int = GRAPH_WINDOW_FRAMES
    chart: str = "line"
    samples: list[tuple[int, float | None]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.window < 1:
            raise EffectError("window must be >= 1")
        if self.chart not in ("line", "bar", "pie"):
            raise EffectError(f"unknown chart kind {self.chart!r}")

    def update(self, frame: int, registry: VariableRegistry) -> None:
        self.samples.append((frame, registry.get(self.variable)))
        if len(self.samples) > self.window:
            del self.samples[: len(self.samples) - self.window]

    def geometry(self) -> dict:
        return {
            "kind": "graph",
            "variable": self.variable,
            "chart": self.chart,
            "window": self.window,
            "samples": [[f, v] for f, v in self.samples],
        }

    def clone(self) -> "GraphSeries":
        c = GraphSeries(self.id, self.variable, self.window, self.chart)
        c.samples = list(self.samples)
        return c


Effect = TrajectoryEffect | GhostEffect | GraphSeries
