"""Builds the e2e fixture: a small synthetic clip plus an empty project
(the scripted client authors everything over the protocol)."""

import json
import sys
from pathlib import Path

from rvv.camera import CameraIntrinsics
from rvv.synthetic import PathKey, Primitive, SyntheticSpec, write_synthetic

out = Path(sys.argv[1])
out.mkdir(parents=True, exist_ok=True)
k = CameraIntrinsics(fx=120.0, fy=120.0, cx=80.0, cy=60.0, width=160, height=120)
spec = SyntheticSpec(
    intrinsics=k,
    frames=60,
    primitives=(
        Primitive(
            name="ball", color=(255, 0, 0), radius_px=8.0,
            path=(PathKey(0, (0.0, 0.0, 1.0)), PathKey(59, (0.25, 0.1, 1.3))),
        ),
    ),
    background_depth_mm=2000,
    seed=2,
)
write_synthetic(spec, out / "clip.rvv")
(out / "e2e.rvvproj").write_text(json.dumps({
    "projver": 1,
    "sequence": "clip.rvv",
    "pose_sidecar": None,
    "background_ply": None,
    "camera": {"kind": "static", "position": [0.0, 0.0, 0.0]},
    "trackers": [],
    "params": [],
    "objects": [],
    "bindings": [],
    "property_bindings": [],
    "effects": [],
}, indent=2))
print("fixture ready")
