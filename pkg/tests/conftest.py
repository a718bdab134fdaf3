from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rvv.camera import CameraIntrinsics, DEFAULT_INTRINSICS
from rvv.frames import RgbdFrame
from rvv.synthetic import PathKey, Primitive, SyntheticSpec


@pytest.fixture
def k640() -> CameraIntrinsics:
    return DEFAULT_INTRINSICS


@pytest.fixture
def k_small() -> CameraIntrinsics:
    # tiny grid for pure-Python oracle comparisons
    return CameraIntrinsics(fx=100.0, fy=100.0, cx=40.0, cy=30.0, width=80, height=60)


def make_frame(k: CameraIntrinsics, index: int = 0, depth_mm: int = 1000,
               color=(40, 40, 40)) -> tuple[np.ndarray, np.ndarray]:
    depth = np.full((k.height, k.width), depth_mm, dtype=np.uint16)
    col = np.empty((k.height, k.width, 3), dtype=np.uint8)
    col[:] = np.array(color, dtype=np.uint8)
    return depth, col


def frame_of(depth: np.ndarray, color: np.ndarray, index: int = 0) -> RgbdFrame:
    return RgbdFrame(index=index, depth=depth, color=color)


def paint_disk(depth: np.ndarray, color: np.ndarray, u0: float, v0: float,
               radius: float, rgb, depth_mm: int) -> None:
    h, w = depth.shape
    vs, us = np.mgrid[0:h, 0:w]
    m = (us - u0) ** 2 + (vs - v0) ** 2 <= radius * radius
    depth[m] = depth_mm
    color[m] = np.array(rgb, dtype=np.uint8)


def small_disk_spec(k: CameraIntrinsics, frames: int = 30, *, occlusion=(),
                    start=(0.0, 0.0, 1.0), end=None, radius_px: float = 6.0,
                    name: str = "disk", color=(255, 0, 0), seed: int = 0) -> SyntheticSpec:
    path = [PathKey(0, start)]
    if end is not None:
        path.append(PathKey(frames - 1, end))
    return SyntheticSpec(
        intrinsics=k,
        frames=frames,
        primitives=(Primitive(name=name, color=color, radius_px=radius_px,
                              path=tuple(path), occlusion=tuple(occlusion)),),
        background_depth_mm=2000,
        seed=seed,
    )
