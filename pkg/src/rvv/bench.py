"""Throughput benchmark: full-resolution end-to-end stepping.

Builds a 640x576 clip with three tracked disks, five parameters, six bound
objects, and two motion effects, then measures the per-frame cost of
decode + unproject + tracking + registry + effects + scene evaluation +
snapshot serialization (the complete per-frame streaming workload).
"""

from __future__ import annotations

import json
import time
from pathlib import Path

from .camera import DEFAULT_INTRINSICS
from .project import Project
from .session import Session
from .synthetic import PathKey, Primitive, SyntheticSpec, write_synthetic

BENCH_FRAMES = 300


def benchmark_spec(frames: int = BENCH_FRAMES) -> SyntheticSpec:
    k = DEFAULT_INTRINSICS
    last = frames - 1
    return SyntheticSpec(
        intrinsics=k,
        frames=frames,
        primitives=(
            Primitive(name="red", color=(255, 40, 40), radius_px=12.0,
                      path=(PathKey(0, (-0.4, 0.0, 1.5)), PathKey(last, (0.4, 0.1, 1.8)))),
            Primitive(name="green", color=(40, 255, 40), radius_px=14.0,
                      path=(PathKey(0, (0.3, -0.25, 2.0)), PathKey(last, (-0.3, -0.1, 1.6)))),
            Primitive(name="blue", color=(60, 60, 255), radius_px=10.0,
                      path=(PathKey(0, (0.0, 0.3, 2.4)),)),
        ),
        background_depth_mm=3000,
        seed=17,
    )


def benchmark_project_doc() -> dict:
    # clicks at the scripted frame-0 pixel centers of the three disks
    return {
        "projver": 1,
        "sequence": "bench.rvv",
        "pose_sidecar": None,
        "camera": {"kind": "orbit", "target": [0.0, 0.0, 1.8], "radius": 2.0,
                   "height": -0.5, "period_frames": 300},
        "trackers": [
            {"kind": "color", "name": "obj_1", "click": [187, 288], "frame": 0},
            {"kind": "color", "name": "obj_2", "click": [395, 225], "frame": 0},
            {"kind": "color", "name": "obj_3", "click": [320, 350], "frame": 0},
        ],
        "params": [
            {"kind": "distance", "operands": ["obj_1", "obj_2"], "name": "distance_1"},
            {"kind": "distance", "operands": ["obj_1", "obj_3"], "name": "distance_2"},
            {"kind": "angle", "operands": ["obj_1", "obj_3", "obj_2"], "name": "angle_1"},
            {"kind": "area3", "operands": ["obj_1", "obj_2", "obj_3"], "name": "area_1"},
            {"kind": "speed", "operands": ["obj_1"], "name": "pace_1"},
        ],
        "objects": [
            {"kind": "text", "id": "label_1", "template": "speed ${obj_1.speed} m/s"},
            {"kind": "text", "id": "label_2", "template": "d ${distance_1} a ${angle_1}"},
            {"kind": "highlight", "id": "hl_1", "shape": "sphere",
             "scale": [0.08, 0.08, 0.08]},
            {"kind": "highlight", "id": "hl_2", "shape": "box", "scale": [0.1, 0.1, 0.1]},
            {"kind": "visual", "id": "vis_1", "source": "https://example.net/panel",
             "size": [0.4, 0.3]},
            {"kind": "link", "id": "link_1", "a": {"tracker": "obj_1"},
             "b": {"tracker": "obj_2"}, "thickness": 0.004},
        ],
        "bindings": [
            {"object": "label_1", "tracker": "obj_1"},
            {"object": "label_2", "tracker": "obj_2"},
            {"object": "hl_1", "tracker": "obj_1"},
            {"object": "hl_2", "tracker": "obj_3"},
            {"object": "vis_1", "tracker": "obj_2"},
        ],
        "property_bindings": [
            {"object": "hl_1", "property": "scale", "expr": "distance_1 / 4"},
            {"object": "vis_1", "property": "opacity", "expr": "angle_1 / 180"},
        ],
        "effects": [
            {"kind": "trajectory", "id": "traj_1", "tracker": "obj_1"},
            {"kind": "ghost", "id": "ghost_1", "tracker": "obj_3", "cadence_frames": 30},
        ],
    }


def build_benchmark_project(workdir: str | Path, frames: int = BENCH_FRAMES) -> Path:
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    write_synthetic(benchmark_spec(frames), workdir / "bench.rvv")
    proj = workdir / "bench.rvvproj"
    proj.write_text(json.dumps(benchmark_project_doc(), indent=2), encoding="utf-8")
    return proj


def run_benchmark(project_path: str | Path) -> dict:
    """Steps the whole clip measuring per-frame wall time; returns stats in ms."""
    path = Path(project_path)
    session = Session.from_project(Project.load(path), path.parent)
    times = []
    # frame 0 was evaluated during construction; measure it as a full redo
    session.cloud()
    session.current_snapshot_bytes()
    while session.cursor < session.length - 1:
        t0 = time.perf_counter()
        session.step()
        session.cloud()
        session.current_snapshot_bytes()
        times.append((time.perf_counter() - t0) * 1000.0)
    times.sort()
    n = len(times)
    return {
        "frames": n,
        "mean_ms": sum(times) / n,
        "p50_ms": times[n // 2],
        "p95_ms": times[min(n - 1, int(n * 0.95))],
        "max_ms": times[-1],
        "fps_at_p95": 1000.0 / times[min(n - 1, int(n * 0.95))],
    }


def main() -> None:
    import argparse
    import sys
    import tempfile

    parser = argparse.ArgumentParser(description="end-to-end per-frame throughput")
    parser.add_argument("--frames", type=int, default=BENCH_FRAMES)
    parser.add_argument("--keep", action="store_true", help="keep the generated clip")
    args = parser.parse_args()
    with tempfile.TemporaryDirectory(prefix="rvv-bench-") as td:
        proj = build_benchmark_project(td, args.frames)
        print(f"clip: {args.frames} frames at 640x576", file=sys.stderr)
        stats = run_benchmark(proj)
        print(json.dumps(stats))
        print(
            f"p50 {stats['p50_ms']:.2f} ms | p95 {stats['p95_ms']:.2f} ms | "
            f"max {stats['max_ms']:.2f} ms | {stats['fps_at_p95']:.1f} fps at p95",
            file=sys.stderr,
        )
        if args.keep:
            print(f"kept at {td}", file=sys.stderr)


if __name__ == "__main__":
    main()
