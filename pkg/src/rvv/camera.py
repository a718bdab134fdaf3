"""Pinhole camera model: pixel+depth <-> 3D point conversions.

World space coincides with camera space (single sensor, no extrinsics):
x right, y down, z forward, meters. Depth is stored in millimeters with
0 reserved for holes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

Vec3 = tuple[float, float, float]


class ProjectionError(ValueError):
    """Raised for points/depths a pinhole camera cannot resolve."""


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"bad grid size {self.width}x{self.height}")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got fx={self.fx} fy={self.fy}")
        if not (0 <= self.cx < self.width) or not (0 <= self.cy < self.height):
            raise ValueError(
                f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height} grid"
            )

    def contains_pixel(self, u: float, v: float) -> bool:
        return 0 <= u < self.width and 0 <= v < self.height


# Plausible defaults for a 640x576 depth sensor; carried in every container
# header so sequences are self-describing.
DEFAULT_INTRINSICS = CameraIntrinsics(fx=500.0, fy=500.0, cx=320.0, cy=288.0, width=640, height=576)


def pixel_to_world(px: tuple[float, float], depth_mm: float, k: CameraIntrinsics) -> Vec3:
    """Unproject one pixel at the given depth. Raises on non-positive depth."""
    if depth_mm <= 0:
        raise ProjectionError(f"invalid depth {depth_mm} mm at pixel {px}")
    u, v = px
    z = depth_mm / 1000.0
    return ((u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z)


def world_to_pixel(p: Vec3, k: CameraIntrinsics) -> tuple[tuple[float, float], int]:
    """Project a world point to (pixel coords, depth in mm). Raises behind the camera."""
    x, y, z = p
    if z <= 0:
        raise ProjectionError(f"point {p} is behind the camera")
    u = k.fx * x / z + k.cx
    v = k.fy * y / z + k.cy
    return (u, v), round(1000.0 * z)


def vec_add(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def vec_sub(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def vec_scale(a: Vec3, s: float) -> Vec3:
    return (a[0] * s, a[1] * s, a[2] * s)


def vec_dot(a: Vec3, b: Vec3) -> float:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def vec_cross(a: Vec3, b: Vec3) -> Vec3:
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def vec_norm(a: Vec3) -> float:
    return math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])


def vec_finite(a: Vec3) -> bool:
    return math.isfinite(a[0]) and math.isfinite(a[1]) and math.isfinite(a[2])
