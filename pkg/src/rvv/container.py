"""Recorded-sequence container (RVV1) and PLY point-cloud I/O.

Container layout, little-endian:
    magic "RVV1" | u16 width | u16 height | u16 fps (=30) | f32 fx fy cx cy |
    u32 frame_count | per frame: w*h u16 depth (mm, row-major) then w*h*3 u8 RGB.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

from .camera import CameraIntrinsics
from .frames import FPS, RgbdFrame

MAGIC = b"RVV1"
_HEADER = struct.Struct("<4sHHHffffI")


class ContainerError(ValueError):
    """Malformed or unreadable sequence container."""


class Sequence:
    """Random access to the frames of an open container file."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._fh = open(self.path, "rb")
        try:
            self.intrinsics, self.fps, self.frame_count = _read_header(self._fh, self.path)
        except Exception:
            self._fh.close()
            raise
        self._frame_size = self.intrinsics.width * self.intrinsics.height * 5
        size = self.path.stat().st_size
        expected = _HEADER.size + self.frame_count * self._frame_size
        if size < expected:
            missing = (size - _HEADER.size) // self._frame_size
            raise ContainerError(
                f"{self.path}: truncated at frame {missing} "
                f"({size} bytes, expected {expected} for {self.frame_count} frames)"
            )
        if size > expected:
            raise ContainerError(f"{self.path}: {size - expected} trailing bytes after last frame")

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "Sequence":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def frame(self, index: int) -> RgbdFrame:
        if not (0 <= index < self.frame_count):
            raise IndexError(f"frame {index} out of range (sequence has {self.frame_count})")
        w, h = self.intrinsics.width, self.intrinsics.height
        self._fh.seek(_HEADER.size + index * self._frame_size)
        buf = self._fh.read(self._frame_size)
        if len(buf) != self._frame_size:
            raise ContainerError(f"{self.path}: truncated payload at frame {index}")
        npx = w * h
        depth = np.frombuffer(buf, dtype="<u2", count=npx).reshape(h, w)
        color = np.frombuffer(buf, dtype=np.uint8, offset=npx * 2).reshape(h, w, 3)
        return RgbdFrame(index=index, depth=depth, color=color)


class ArraySequence:
    """In-memory sequence with the same access protocol as Sequence."""

    def __init__(self, intrinsics: CameraIntrinsics, frames: list[RgbdFrame], fps: int = FPS):
        self.intrinsics = intrinsics
        self.fps = fps
        self._frames = frames
        self.frame_count = len(frames)
        for i, f in enumerate(frames):
            if f.index != i:
                raise ValueError(f"frame at position {i} has index {f.index}")
            if not f.matches(intrinsics):
                raise ValueError(f"frame {i} dimensions do not match intrinsics")

    def frame(self, index: int) -> RgbdFrame:
        if not (0 <= index < self.frame_count):
            raise IndexError(f"frame {index} out of range (sequence has {self.frame_count})")
        return self._frames[index]

    def close(self) -> None:
        pass


def _read_header(fh: io.BufferedReader, path: Path) -> tuple[CameraIntrinsics, int, int]:
    raw = fh.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise ContainerError(f"{path}: file too short for header")
    magic, w, h, fps, fx, fy, cx, cy, count = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise ContainerError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if fps != FPS:
        raise ContainerError(f"{path}: unsupported fps {fps}, expected {FPS}")
    try:
        k = CameraIntrinsics(fx=fx, fy=fy, cx=cx, cy=cy, width=w, height=h)
    except ValueError as e:
        raise ContainerError(f"{path}: intrinsics do not fit the {w}x{h} grid: {e}") from e
    return k, fps, count


class SequenceWriter:
    """Streams frames into a container; patches the frame count on close."""

    def __init__(self, path: str | Path, intrinsics: CameraIntrinsics, fps: int = FPS):
        self.path = Path(path)
        self.intrinsics = intrinsics
        self._fh = open(self.path, "wb")
        self._count = 0
        # float32 round trip now so the header readback is bit-exact
        fx, fy, cx, cy = (float(np.float32(v)) for v in
                          (intrinsics.fx, intrinsics.fy, intrinsics.cx, intrinsics.cy))
        self._fh.write(_HEADER.pack(MAGIC, intrinsics.width, intrinsics.height, fps,
                                    fx, fy, cx, cy, 0))

    def add_frame(self, depth: np.ndarray, color: np.ndarray) -> None:
        w, h = self.intrinsics.width, self.intrinsics.height
        if depth.shape != (h, w) or depth.dtype != np.uint16:
            raise ValueError(f"depth must be ({h}, {w}) uint16")
        if color.shape != (h, w, 3) or color.dtype != np.uint8:
            raise ValueError(f"color must be ({h}, {w}, 3) uint8")
        self._fh.write(np.ascontiguousarray(depth).astype("<u2", copy=False).tobytes())
        self._fh.write(np.ascontiguousarray(color).tobytes())
        self._count += 1

    def close(self) -> None:
        self._fh.seek(_HEADER.size - 4)
        self._fh.write(struct.pack("<I", self._count))
        self._fh.close()

    def __enter__(self) -> "SequenceWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def load_sequence(path: str | Path) -> Sequence:
    return Sequence(path)


def write_sequence(path: str | Path, intrinsics: CameraIntrinsics,
                   frames: list[RgbdFrame], fps: int = FPS) -> None:
    with SequenceWriter(path, intrinsics, fps) as w:
        for f in frames:
            w.add_frame(f.depth, f.color)


# --- PLY ---------------------------------------------------------------

_PLY_POINT = np.dtype([("pos", "<f4", (3,)), ("rgb", "u1", (3,))])


def write_ply(path: str | Path, positions: np.ndarray, colors: np.ndarray) -> None:
    """Binary little-endian PLY with x y z (float) red green blue (uchar)."""
    n = positions.shape[0]
    header = (
        "ply\nformat binary_little_endian 1.0\n"
        f"element vertex {n}\n"
        "property float x\nproperty float y\nproperty float z\n"
        "property uchar red\nproperty uchar green\nproperty uchar blue\n"
        "end_header\n"
    )
    rec = np.empty(n, dtype=_PLY_POINT)
    rec["pos"] = positions.astype(np.float32, copy=False)
    rec["rgb"] = colors
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(rec.tobytes())


def read_ply(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Reads binary-little-endian or ascii PLY; requires x y z red green blue."""
    with open(path, "rb") as fh:
        if fh.readline().strip() != b"ply":
            raise ContainerError(f"{path}: not a PLY file")
        fmt = None
        n = None
        props: list[str] = []
        while True:
            line = fh.readline()
            if not line:
                raise ContainerError(f"{path}: unterminated PLY header")
            parts = line.decode("ascii", "replace").split()
            if not parts:
                continue
            if parts[0] == "format":
                fmt = parts[1]
            elif parts[0] == "element":
                if parts[1] != "vertex":
                    raise ContainerError(f"{path}: unsupported element {parts[1]}")
                n = int(parts[2])
            elif parts[0] == "property":
                props.append(parts[2])
            elif parts[0] == "end_header":
                break
        if n is None or fmt not in ("binary_little_endian", "ascii"):
            raise ContainerError(f"{path}: unsupported PLY format {fmt}")
        if props != ["x", "y", "z", "red", "green", "blue"]:
            raise ContainerError(f"{path}: unsupported vertex properties {props}")
        if fmt == "binary_little_endian":
            raw = fh.read(n * _PLY_POINT.itemsize)
            if len(raw) != n * _PLY_POINT.itemsize:
                raise ContainerError(f"{path}: truncated PLY payload")
            rec = np.frombuffer(raw, dtype=_PLY_POINT)
            return rec["pos"].copy(), rec["rgb"].copy()
        pos = np.empty((n, 3), np.float32)
        rgb = np.empty((n, 3), np.uint8)
        for i in range(n):
            vals = fh.readline().split()
            if len(vals) != 6:
                raise ContainerError(f"{path}: bad ascii vertex at row {i}")
            pos[i] = [float(v) for v in vals[:3]]
            rgb[i] = [int(v) for v in vals[3:]]
        return pos, rgb
