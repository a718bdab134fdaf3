"""Scripted synthetic RGB-D scenes with exact per-frame ground truth.

Primitives are colored disks on a background depth plane, moving along
piecewise-linear world-space paths, optionally hidden during occlusion
windows. The generator records, per primitive and frame, the rasterized
mask centroid, the drawn depth, and the world point a perfect tracker
should report.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .camera import CameraIntrinsics, Vec3, pixel_to_world, world_to_pixel
from .container import ArraySequence, SequenceWriter
from .frames import RgbdFrame


class SynthSpecError(ValueError):
    """Invalid synthetic-scene description."""


@dataclass(frozen=True)
class PathKey:
    frame: int
    pos: Vec3


@dataclass(frozen=True)
class Primitive:
    name: str
    color: tuple[int, int, int]
    radius_px: float
    path: tuple[PathKey, ...]
    occlusion: tuple[tuple[int, int], ...] = ()  # inclusive [start, end] frame windows
    shape: str = "disk"

    def occluded(self, frame: int) -> bool:
        return any(a <= frame <= b for a, b in self.occlusion)

    def center(self, frame: int) -> Vec3:
        keys = self.path
        if frame <= keys[0].frame:
            return keys[0].pos
        if frame >= keys[-1].frame:
            return keys[-1].pos
        for a, b in zip(keys, keys[1:]):
            if a.frame <= frame <= b.frame:
                t = (frame - a.frame) / (b.frame - a.frame)
                return (
                    a.pos[0] + t * (b.pos[0] - a.pos[0]),
                    a.pos[1] + t * (b.pos[1] - a.pos[1]),
                    a.pos[2] + t * (b.pos[2] - a.pos[2]),
                )
        raise AssertionError("unreachable: path keys are ordered")


@dataclass(frozen=True)
class SyntheticSpec:
    intrinsics: CameraIntrinsics
    frames: int
    primitives: tuple[Primitive, ...]
    background_depth_mm: int = 2500
    background_color: tuple[int, int, int] = (40, 40, 40)
    depth_noise_mm: float = 0.0
    hole_rects: tuple[tuple[int, int, int, int], ...] = ()  # (r0, c0, r1, c1) exclusive end
    seed: int = 0

    @classmethod
    def from_json(cls, doc: dict) -> "SyntheticSpec":
        try:
            kd = doc.get("intrinsics", {})
            k = CameraIntrinsics(
                fx=float(kd.get("fx", 500.0)), fy=float(kd.get("fy", 500.0)),
                cx=float(kd.get("cx", doc.get("width", 640) / 2)),
                cy=float(kd.get("cy", doc.get("height", 576) / 2)),
                width=int(doc.get("width", 640)), height=int(doc.get("height", 576)),
            )
            prims = []
            for p in doc["primitives"]:
                keys = tuple(
                    PathKey(int(kf["frame"]), tuple(float(v) for v in kf["pos"]))
                    for kf in p["path"]
                )
                prims.append(Primitive(
                    name=str(p["name"]),
                    color=tuple(int(c) for c in p["color"]),
                    radius_px=float(p["radius_px"]),
                    path=keys,
                    occlusion=tuple((int(a), int(b)) for a, b in p.get("occlusion", [])),
                    shape=str(p.get("shape", "disk")),
                ))
            bg = doc.get("background", {})
            return cls(
                intrinsics=k,
                frames=int(doc["frames"]),
                primitives=tuple(prims),
                background_depth_mm=int(bg.get("depth_mm", 2500)),
                background_color=tuple(int(c) for c in bg.get("color", (40, 40, 40))),
                depth_noise_mm=float(doc.get("depth_noise_mm", 0.0)),
                hole_rects=tuple(tuple(int(v) for v in r) for r in doc.get("hole_rects", [])),
                seed=int(doc.get("seed", 0)),
            )
        except (KeyError, TypeError) as e:
            raise SynthSpecError(f"bad synthetic spec: {e}") from e

    @classmethod
    def load(cls, path: str | Path) -> "SyntheticSpec":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    def validate(self) -> None:
        if self.frames <= 0:
            raise SynthSpecError("frames must be positive")
        names = [p.name for p in self.primitives]
        if len(set(names)) != len(names):
            raise SynthSpecError(f"duplicate primitive names in {names}")
        for p in self.primitives:
            if p.shape != "disk":
                raise SynthSpecError(f"unsupported shape {p.shape!r} for {p.name}")
            if not p.path:
                raise SynthSpecError(f"{p.name}: empty motion path")
            fs = [kf.frame for kf in p.path]
            if fs != sorted(set(fs)):
                raise SynthSpecError(f"{p.name}: path keyframes must strictly increase")
            for f in range(self.frames):
                self._check_in_frustum(p, f)

    def _check_in_frustum(self, p: Primitive, frame: int) -> None:
        pos = p.center(frame)
        if pos[2] <= 0:
            raise SynthSpecError(f"{p.name}: behind camera at frame {frame}")
        (u, v), _ = world_to_pixel(pos, self.intrinsics)
        r = p.radius_px
        if not (u - r >= 0 and u + r < self.intrinsics.width
                and v - r >= 0 and v + r < self.intrinsics.height):
            raise SynthSpecError(
                f"{p.name}: outside frustum at frame {frame} (center px {u:.1f},{v:.1f})"
            )


@dataclass(frozen=True)
class TruthRecord:
    frame: int
    visible: bool
    centroid_px: tuple[float, float] | None
    depth_mm: int | None
    world: Vec3 | None  # tracker target: unprojected mask centroid
    center_world: Vec3  # scripted path position


@dataclass
class GroundTruth:
    frames: int
    tracks: dict[str, list[TruthRecord]] = field(default_factory=dict)

    def visible_fraction(self, name: str) -> float:
        recs = self.tracks[name]
        return sum(r.visible for r in recs) / len(recs)

    def save(self, path: str | Path) -> None:
        doc = {
            "frames": self.frames,
            "tracks": {
                name: [
                    {
                        "frame": r.frame,
                        "visible": r.visible,
                        "centroid_px": list(r.centroid_px) if r.centroid_px else None,
                        "depth_mm": r.depth_mm,
                        "world": list(r.world) if r.world else None,
                        "center_world": list(r.center_world),
                    }
                    for r in recs
                ]
                for name, recs in self.tracks.items()
            },
        }
        Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "GroundTruth":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        gt = cls(frames=doc["frames"])
        for name, recs in doc["tracks"].items():
            gt.tracks[name] = [
                TruthRecord(
                    frame=r["frame"], visible=r["visible"],
                    centroid_px=tuple(r["centroid_px"]) if r["centroid_px"] else None,
                    depth_mm=r["depth_mm"],
                    world=tuple(r["world"]) if r["world"] else None,
                    center_world=tuple(r["center_world"]),
                )
                for r in recs
            ]
        return gt


def iter_frames(spec: SyntheticSpec) -> Iterator[tuple[RgbdFrame, dict[str, TruthRecord]]]:
    """Yields (frame, per-primitive truth) in index order. Deterministic per spec+seed."""
    spec.validate()
    k = spec.intrinsics
    h, w = k.height, k.width
    rng = np.random.default_rng(spec.seed)
    for f in range(spec.frames):
        depth = np.full((h, w), spec.background_depth_mm, dtype=np.uint16)
        if spec.depth_noise_mm > 0:
            noise = rng.normal(0.0, spec.depth_noise_mm, (h, w))
            depth = np.clip(depth.astype(np.float64) + noise, 1, 65535).astype(np.uint16)
        color = np.empty((h, w, 3), dtype=np.uint8)
        color[:] = np.array(spec.background_color, dtype=np.uint8)
        for r0, c0, r1, c1 in spec.hole_rects:
            depth[r0:r1, c0:c1] = 0
        owner = np.full((h, w), -1, dtype=np.int16)
        centers: list[tuple[float, float, int, Vec3] | None] = []
        for idx, p in enumerate(spec.primitives):
            pos = p.center(f)
            if p.occluded(f):
                centers.append(None)
                continue
            (u0, v0), dmm = world_to_pixel(pos, k)
            rows, cols = _disk_pixels(u0, v0, p.radius_px, h, w)
            depth[rows, cols] = dmm
            color[rows, cols] = np.array(p.color, dtype=np.uint8)
            owner[rows, cols] = idx
            centers.append((u0, v0, dmm, pos))
        truth: dict[str, TruthRecord] = {}
        for idx, p in enumerate(spec.primitives):
            pos = p.center(f)
            info = centers[idx]
            rows, cols = np.nonzero(owner == idx)
            if info is None or rows.size == 0:
                truth[p.name] = TruthRecord(f, False, None, None, None, pos)
                continue
            cu = float(cols.mean())
            cv = float(rows.mean())
            dmm = info[2]
            truth[p.name] = TruthRecord(
                f, True, (cu, cv), dmm, pixel_to_world((cu, cv), dmm, k), pos
            )
        yield RgbdFrame(index=f, depth=depth, color=color), truth


def _disk_pixels(u0: float, v0: float, radius: float, h: int, w: int):
    r0 = max(0, int(math.floor(v0 - radius)))
    r1 = min(h - 1, int(math.ceil(v0 + radius)))
    c0 = max(0, int(math.floor(u0 - radius)))
    c1 = min(w - 1, int(math.ceil(u0 + radius)))
    vs, us = np.mgrid[r0:r1 + 1, c0:c1 + 1]
    inside = (us - u0) ** 2 + (vs - v0) ** 2 <= radius * radius
    return vs[inside], us[inside]


def generate(spec: SyntheticSpec) -> tuple[ArraySequence, GroundTruth]:
    """Materializes the whole clip in memory; use iter_frames + SequenceWriter for long clips."""
    frames: list[RgbdFrame] = []
    gt = GroundTruth(frames=spec.frames)
    for p in spec.primitives:
        gt.tracks[p.name] = []
    for frame, truth in iter_frames(spec):
        frames.append(frame)
        for name, rec in truth.items():
            gt.tracks[name].append(rec)
    return ArraySequence(spec.intrinsics, frames), gt


def write_synthetic(spec: SyntheticSpec, seq_path: str | Path,
                    truth_path: str | Path | None = None) -> GroundTruth:
    gt = GroundTruth(frames=spec.frames)
    for p in spec.primitives:
        gt.tracks[p.name] = []
    with SequenceWriter(seq_path, spec.intrinsics) as wr:
        for frame, truth in iter_frames(spec):
            wr.add_frame(frame.depth, frame.color)
            for name, rec in truth.items():
                gt.tracks[name].append(rec)
    if truth_path is not None:
        gt.save(truth_path)
    return gt
