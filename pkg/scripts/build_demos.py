#!/usr/bin/env python3
"""Generates the demo clips (and the training pose sidecar) into demos/build/,
then validates both demo projects.

    python scripts/build_demos.py
    rvv render --project demos/training.rvvproj --out /tmp/training_out
    rvv serve  --project demos/training.rvvproj --listen 127.0.0.1:8765
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from rvv.camera import world_to_pixel
from rvv.cli import run as cli_run
from rvv.synthetic import SyntheticSpec, write_synthetic
from rvv.tracking import PoseTrack

DEMOS = REPO / "demos"
BUILD = DEMOS / "build"

SHOULDER, ELBOW, WRIST = 11, 13, 15  # keypoint columns used by training.rvvproj


def build_training_pose(spec: SyntheticSpec, gt) -> PoseTrack:
    k = spec.intrinsics
    n_kp = 33
    frames = []
    shoulder_world = np.array([0.05, -0.05, 1.8])
    for rec in gt.tracks["dumbbell"]:
        wrist_world = np.array(rec.center_world)
        elbow_world = (shoulder_world + wrist_world) / 2 + np.array([0.08, 0.05, 0.0])
        kp = np.tile(np.array([12.0, 12.0, 0.6]), (n_kp, 1))
        for idx, world in ((SHOULDER, shoulder_world), (ELBOW, elbow_world),
                           (WRIST, wrist_world)):
            (u, v), _ = world_to_pixel(tuple(world), k)
            kp[idx] = (u, v, 0.95)
        frames.append(kp)
    return PoseTrack(n_kp, np.asarray(frames))


def main() -> int:
    BUILD.mkdir(parents=True, exist_ok=True)

    spec = SyntheticSpec.load(DEMOS / "product_showcase.scene.json")
    write_synthetic(spec, BUILD / "product_showcase.rvv",
                    BUILD / "product_showcase.truth.json")
    print(f"wrote {BUILD / 'product_showcase.rvv'} ({spec.frames} frames)")

    spec = SyntheticSpec.load(DEMOS / "training.scene.json")
    gt = write_synthetic(spec, BUILD / "training.rvv", BUILD / "training.truth.json")
    pose = build_training_pose(spec, gt)
    pose.save(BUILD / "training_pose.ndjson")
    print(f"wrote {BUILD / 'training.rvv'} ({spec.frames} frames) + pose sidecar")

    failures = 0
    for name in ("product_showcase", "training"):
        code = cli_run(["validate", "--project", str(DEMOS / f"{name}.rvvproj")])
        print(f"validate {name}: {'ok' if code == 0 else 'FAILED'}")
        failures += code
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
