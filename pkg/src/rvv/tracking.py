"""Per-frame 3D tracking: color-component tracking, body keypoints, stationary anchors.

Color tracking follows the click-to-track recipe: sample the clicked RGB,
threshold every channel at +/- tolerance, keep the largest 8-connected
component, average its pixel coordinates, and unproject through the median
of its nonzero depths.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from .camera import CameraIntrinsics, Vec3, pixel_to_world
from .frames import RgbdFrame

DEFAULT_TOLERANCE = 10
DEFAULT_MIN_COMPONENT_PX = 25
CONFIDENCE_FLOOR = 0.5
BODY_DEPTH_WINDOW = 5  # pixels, square window for keypoint depth sampling
STATIONARY_SEARCH_RADIUS = 10  # pixels, ring search for nonzero depth
STATIONARY_DEFAULT_DEPTH_MM = 1000

_EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


class TrackingError(ValueError):
    pass


class SidecarError(ValueError):
    """Malformed pose sidecar; carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class TrackedPoint:
    tracker: str
    frame: int
    world: Vec3 | None
    valid: bool


@dataclass(frozen=True)
class ComponentDetail:
    """Pixels of the winning component, for ghost cloning and oracle checks."""

    rows: np.ndarray
    cols: np.ndarray
    centroid_px: tuple[float, float]
    depth_mm: float


@dataclass
class ColorTrackerState:
    reference_rgb: tuple[int, int, int]
    tolerance: int = DEFAULT_TOLERANCE
    min_component_px: int = DEFAULT_MIN_COMPONENT_PX
    last_world: Vec3 | None = None
    lost: bool = False

    def __post_init__(self) -> None:
        if not (0 <= self.tolerance <= 255):
            raise ValueError(f"tolerance {self.tolerance} outside [0, 255]")
        if self.min_component_px < 1:
            raise ValueError("min_component_px must be >= 1")

    def clone(self) -> "ColorTrackerState":
        return replace(self)


def color_mask(color: np.ndarray, reference: tuple[int, int, int], tolerance: int) -> np.ndarray:
    """Inclusive per-channel threshold: |channel - reference| <= tolerance."""
    mask = np.ones(color.shape[:2], dtype=bool)
    for c in range(3):
        ref = int(reference[c])
        lo = max(0, ref - tolerance)
        hi = min(255, ref + tolerance)
        ch = color[:, :, c]
        mask &= (ch >= lo) & (ch <= hi)
    return mask


def largest_component(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
    """Largest 8-connected True region; ties go to the smallest (row, col)
    bounding-box corner. Returns (rows, cols) or None for an empty mask."""
    # restrict labeling to the mask's bounding box; connectivity is unchanged
    row_any = mask.any(axis=1)
    rows_nz = np.flatnonzero(row_any)
    if rows_nz.size == 0:
        return None
    cols_nz = np.flatnonzero(mask.any(axis=0))
    r_off, c_off = int(rows_nz[0]), int(cols_nz[0])
    window = mask[r_off:rows_nz[-1] + 1, c_off:cols_nz[-1] + 1]
    labels, n = ndimage.label(window, structure=_EIGHT_CONNECTED)
    if n == 0:
        return None
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    best_size = sizes.max()
    candidates = np.nonzero(sizes == best_size)[0]
    if len(candidates) == 1:
        best = int(candidates[0])
        box = ndimage.find_objects(labels, max_label=best)[best - 1]
    else:
        boxes = ndimage.find_objects(labels)
        best, box = min(
            ((int(lab), boxes[lab - 1]) for lab in candidates),
            key=lambda it: (it[1][0].start, it[1][1].start),
        )
    sub = labels[box] == best
    rows, cols = np.nonzero(sub)
    return rows + (box[0].start + r_off), cols + (box[1].start + c_off)


def track_color(frame: RgbdFrame, state: ColorTrackerState, k: CameraIntrinsics,
                name: str = "obj", commit: bool = True,
                ) -> tuple[TrackedPoint, ComponentDetail | None]:
    """Resolves one frame. With commit=True updates last_world/lost on the state."""
    comp = largest_component(color_mask(frame.color, state.reference_rgb, state.tolerance))
    tp = TrackedPoint(name, frame.index, None, False)
    detail = None
    if comp is not None and comp[0].size >= state.min_component_px:
        rows, cols = comp
        centroid = (float(cols.mean()), float(rows.mean()))
        depths = frame.depth[rows, cols]
        nz = depths[depths > 0]
        if nz.size:
            depth_mm = float(np.median(nz))
            world = pixel_to_world(centroid, depth_mm, k)
            tp = TrackedPoint(name, frame.index, world, True)
            detail = ComponentDetail(rows, cols, centroid, depth_mm)
    if commit:
        if tp.valid:
            state.last_world = tp.world
            state.lost = False
        else:
            state.lost = True  # last_world intentionally retained
    return tp, detail


def create_color_tracker(frame: RgbdFrame, click: tuple[int, int], k: CameraIntrinsics,
                         name: str, tolerance: int = DEFAULT_TOLERANCE,
                         min_component_px: int = DEFAULT_MIN_COMPONENT_PX,
                         ) -> tuple[ColorTrackerState, TrackedPoint]:
    """Samples the clicked color (depth may be a hole) and resolves the click frame."""
    u, v = click
    if not (0 <= u < frame.width and 0 <= v < frame.height):
        raise TrackingError(f"click ({u}, {v}) outside {frame.width}x{frame.height} frame")
    ref = tuple(int(c) for c in frame.color[int(v), int(u)])
    state = ColorTrackerState(ref, tolerance=tolerance, min_component_px=min_component_px)
    tp, _ = track_color(frame, state, k, name)
    return state, tp


# --- body keypoints ------------------------------------------------------

@dataclass(frozen=True)
class PoseFrame:
    frame: int
    keypoints: np.ndarray  # (K, 3) float64: u, v, confidence

    @property
    def k(self) -> int:
        return self.keypoints.shape[0]


class PoseTrack:
    """Sidecar of per-frame keypoint estimates, constant K across the clip."""

    def __init__(self, k: int, data: np.ndarray):
        self.k = k
        self._data = data  # (frames, K, 3)
        self._data.setflags(write=False)

    @property
    def frame_count(self) -> int:
        return self._data.shape[0]

    def frame(self, index: int) -> PoseFrame:
        return PoseFrame(index, self._data[index])

    @classmethod
    def load(cls, path: str | Path, expected_frames: int | None = None) -> "PoseTrack":
        records: list[np.ndarray] = []
        k = None
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    doc = json.loads(line)
                except json.JSONDecodeError as e:
                    raise SidecarError(f"invalid JSON: {e.msg}", lineno) from e
                if k is None:
                    if not isinstance(doc, dict) or "k" not in doc:
                        raise SidecarError('expected header record {"k": N}', lineno)
                    k = int(doc["k"])
                    if k < 1:
                        raise SidecarError(f"k must be >= 1, got {k}", lineno)
                    continue
                try:
                    idx = int(doc["frame"])
                    kp = np.asarray(doc["kp"], dtype=np.float64)
                except (KeyError, TypeError, ValueError) as e:
                    raise SidecarError(f"bad record: {e}", lineno) from e
                if idx != len(records):
                    raise SidecarError(f"expected frame {len(records)}, got {idx}", lineno)
                if kp.shape != (k, 3):
                    raise SidecarError(
                        f"expected {k} keypoints of [u, v, conf], got shape {kp.shape}", lineno
                    )
                conf = kp[:, 2]
                if np.any((conf < 0) | (conf > 1)):
                    raise SidecarError("confidence outside [0, 1]", lineno)
                records.append(kp)
        if k is None:
            raise SidecarError(f"{path}: empty sidecar")
        if expected_frames is not None and len(records) != expected_frames:
            raise SidecarError(
                f"{path}: sidecar has {len(records)} frames, sequence has {expected_frames}"
            )
        return cls(k, np.stack(records) if records else np.empty((0, k, 3)))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"k": self.k}) + "\n")
            for i in range(self.frame_count):
                kp = [[float(u), float(v), float(c)] for u, v, c in self._data[i]]
                fh.write(json.dumps({"frame": i, "kp": kp}) + "\n")


def attach_pose_sidecar(sequence, path: str | Path) -> PoseTrack:
    return PoseTrack.load(path, expected_frames=sequence.frame_count)


def resolve_body(frame: RgbdFrame, pose: PoseFrame, keypoint_index: int, k: CameraIntrinsics,
                 name: str = "body", confidence_floor: float = CONFIDENCE_FLOOR) -> TrackedPoint:
    """Keypoint pixel + median depth of the nonzero samples in a 5x5 window."""
    u, v, conf = pose.keypoints[keypoint_index]
    if conf < confidence_floor:
        return TrackedPoint(name, frame.index, None, False)
    half = BODY_DEPTH_WINDOW // 2
    r = int(round(v))
    c = int(round(u))
    r0, r1 = max(0, r - half), min(frame.height, r + half + 1)
    c0, c1 = max(0, c - half), min(frame.width, c + half + 1)
    if r0 >= r1 or c0 >= c1:
        return TrackedPoint(name, frame.index, None, False)
    window = frame.depth[r0:r1, c0:c1]
    nz = window[window > 0]
    if nz.size == 0:
        return TrackedPoint(name, frame.index, None, False)
    depth_mm = float(np.median(nz))
    return TrackedPoint(name, frame.index, pixel_to_world((float(u), float(v)), depth_mm, k), True)


# --- stationary anchors ---------------------------------------------------

def nearest_nonzero_depth(depth: np.ndarray, click: tuple[int, int],
                          radius: int = STATIONARY_SEARCH_RADIUS) -> float | None:
    """First nonzero depth on expanding square rings around the click,
    scanning each ring top-left to bottom-right (row-major)."""
    u, v = int(click[0]), int(click[1])
    h, w = depth.shape
    if depth[v, u] > 0:
        return float(depth[v, u])
    for ring in range(1, radius + 1):
        for r in range(v - ring, v + ring + 1):
            if not (0 <= r < h):
                continue
            if r == v - ring or r == v + ring:
                cols = range(u - ring, u + ring + 1)
            else:
                cols = (u - ring, u + ring)
            for c in cols:
                if 0 <= c < w and depth[r, c] > 0:
                    return float(depth[r, c])
    return None


def create_stationary(frame: RgbdFrame, click: tuple[int, int], k: CameraIntrinsics,
                      nudge: Vec3 = (0.0, 0.0, 0.0)) -> Vec3:
    """Raycast the click to a frozen world point; falls back to 1 m along the ray."""
    u, v = click
    if not (0 <= u < frame.width and 0 <= v < frame.height):
        raise TrackingError(f"click ({u}, {v}) outside {frame.width}x{frame.height} frame")
    depth = nearest_nonzero_depth(frame.depth, click)
    if depth is None:
        depth = STATIONARY_DEFAULT_DEPTH_MM
    p = pixel_to_world((float(u), float(v)), depth, k)
    return (p[0] + nudge[0], p[1] + nudge[1], p[2] + nudge[2])


# --- runtime tracker objects ---------------------------------------------

@dataclass
class ColorTracker:
    name: str
    state: ColorTrackerState
    kind: str = "color"

    def resolve(self, frame: RgbdFrame, pose: PoseFrame | None, k: CameraIntrinsics,
                ) -> tuple[TrackedPoint, ComponentDetail | None]:
        return track_color(frame, self.state, k, self.name)

    def clone(self) -> "ColorTracker":
        return ColorTracker(self.name, self.state.clone())


@dataclass
class BodyTracker:
    name: str
    keypoint_index: int
    confidence_floor: float = CONFIDENCE_FLOOR
    kind: str = "body"

    def resolve(self, frame: RgbdFrame, pose: PoseFrame | None, k: CameraIntrinsics,
                ) -> tuple[TrackedPoint, ComponentDetail | None]:
        if pose is None:
            return TrackedPoint(self.name, frame.index, None, False), None
        tp = resolve_body(frame, pose, self.keypoint_index, k, self.name, self.confidence_floor)
        return tp, None

    def clone(self) -> "BodyTracker":
        return BodyTracker(self.name, self.keypoint_index, self.confidence_floor)


@dataclass
class StationaryTracker:
    name: str
    world: Vec3
    kind: str = "stationary"

    def resolve(self, frame: RgbdFrame, pose: PoseFrame | None, k: CameraIntrinsics,
                ) -> tuple[TrackedPoint, ComponentDetail | None]:
        return TrackedPoint(self.name, frame.index, self.world, True), None

    def clone(self) -> "StationaryTracker":
        return StationaryTracker(self.name, self.world)


Tracker = ColorTracker | BodyTracker | StationaryTracker


def loss_metric(valid_flags) -> float:
    """Fraction of frames with a valid resolution; the Table-1 style accuracy number."""
    flags = list(valid_flags)
    if not flags:
        raise TrackingError("loss metric over an empty frame range")
    return sum(bool(f) for f in flags) / len(flags)
