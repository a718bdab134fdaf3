"""RGB-D frame containers and point-cloud reconstruction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import CameraIntrinsics

FPS = 30


@dataclass(frozen=True)
class RgbdFrame:
    """One timestamped depth+color pair. Arrays are frozen after construction.

    depth: (h, w) uint16, millimeters, 0 = hole.
    color: (h, w, 3) uint8 RGB.
    """

    index: int
    depth: np.ndarray
    color: np.ndarray

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError(f"frame index must be >= 0, got {self.index}")
        if self.depth.ndim != 2 or self.depth.dtype != np.uint16:
            raise ValueError("depth must be a (h, w) uint16 grid")
        if self.color.shape != (*self.depth.shape, 3) or self.color.dtype != np.uint8:
            raise ValueError(
                f"color shape {self.color.shape} does not match depth {self.depth.shape}"
            )
        self.depth.setflags(write=False)
        self.color.setflags(write=False)

    @property
    def timestamp(self) -> float:
        return self.index / FPS

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    def matches(self, k: CameraIntrinsics) -> bool:
        return self.width == k.width and self.height == k.height


@dataclass(frozen=True)
class PointCloud:
    """Unprojected frame: float32 positions in meters plus uint8 RGB, row-major pixel order."""

    positions: np.ndarray  # (n, 3) float32
    colors: np.ndarray  # (n, 3) uint8

    def __post_init__(self) -> None:
        if self.positions.shape != (len(self), 3) or self.positions.dtype != np.float32:
            raise ValueError("positions must be (n, 3) float32")
        if self.colors.shape != (len(self), 3) or self.colors.dtype != np.uint8:
            raise ValueError("colors must be (n, 3) uint8")
        self.positions.setflags(write=False)
        self.colors.setflags(write=False)

    def __len__(self) -> int:
        return self.positions.shape[0]


# Cache of normalized ray grids per intrinsics: (u - cx)/fx and (v - cy)/fy,
# materialized (h, w) so boolean indexing stays contiguous and fast.
_grid_cache: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}


def _grids(k: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    key = (k.fx, k.fy, k.cx, k.cy, k.width, k.height)
    g = _grid_cache.get(key)
    if g is None:
        xn = (np.arange(k.width, dtype=np.float64) - k.cx) / k.fx
        yn = (np.arange(k.height, dtype=np.float64) - k.cy) / k.fy
        g = (np.ascontiguousarray(np.broadcast_to(xn, (k.height, k.width))),
             np.ascontiguousarray(np.broadcast_to(yn[:, None], (k.height, k.width))))
        _grid_cache[key] = g
    return g


def unproject(frame: RgbdFrame, k: CameraIntrinsics) -> PointCloud:
    """Unproject every pixel with depth > 0; holes are omitted.

    x = (u - cx) * z / fx, y = (v - cy) * z / fy, z = depth / 1000.
    """
    if not frame.matches(k):
        raise ValueError(
            f"frame is {frame.width}x{frame.height} but intrinsics expect {k.width}x{k.height}"
        )
    return unproject_pixels(frame, k, frame.depth > 0)


def unproject_pixels(frame: RgbdFrame, k: CameraIntrinsics, select: np.ndarray) -> PointCloud:
    """Unproject the selected pixels (a (h, w) bool mask); zero-depth pixels are dropped."""
    xn, yn = _grids(k)
    valid = select & (frame.depth > 0)
    if valid.all():
        # dense path: no holes, no selection — avoids three boolean gathers
        z = frame.depth.astype(np.float64)
        z *= 1e-3
        pos = np.empty((z.size, 3), dtype=np.float32)
        pos[:, 0] = (xn * z).ravel()
        pos[:, 1] = (yn * z).ravel()
        pos[:, 2] = z.ravel()
        return PointCloud(pos, frame.color.reshape(-1, 3))
    idx = np.flatnonzero(valid.ravel())
    z = frame.depth.ravel().take(idx).astype(np.float64)
    z *= 1e-3
    pos = np.empty((idx.size, 3), dtype=np.float32)
    pos[:, 0] = xn.ravel().take(idx) * z
    pos[:, 1] = yn.ravel().take(idx) * z
    pos[:, 2] = z
    return PointCloud(pos, frame.color.reshape(-1, 3).take(idx, axis=0))
