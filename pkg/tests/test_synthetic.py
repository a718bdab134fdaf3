from __future__ import annotations

import numpy as np
import pytest

from rvv.camera import pixel_to_world, world_to_pixel
import dataclasses

from rvv.synthetic import (
    GroundTruth,
    SynthSpecError,
    SyntheticSpec,
    generate,
    write_synthetic,
)
from rvv.container import load_sequence

import oracles
from conftest import small_disk_spec


def test_static_disk_truth_is_center(k_small):
    # disk centered exactly on an integer pixel: rasterization is symmetric,
    # so the mask centroid equals the scripted center
    center_px = (40.0, 30.0)
    world = pixel_to_world(center_px, 1000, k_small)
    spec = small_disk_spec(k_small, frames=5, start=world)
    seq, gt = generate(spec)
    for rec in gt.tracks["disk"]:
        assert rec.visible
        assert rec.centroid_px == pytest.approx(center_px, abs=1e-9)
        assert rec.depth_mm == 1000
        assert rec.world == pytest.approx(world, abs=1e-12)


def test_truth_centroid_matches_bruteforce_rasterization(k_small):
    spec = small_disk_spec(k_small, frames=8, start=(0.03, -0.05, 1.1),
                           end=(-0.06, 0.04, 0.9), radius_px=5.5)
    seq, gt = generate(spec)
    for i, rec in enumerate(gt.tracks["disk"]):
        (u0, v0), _ = world_to_pixel(rec.center_world, k_small)
        pixels = oracles.brute_disk_pixels(u0, v0, 5.5, k_small.height, k_small.width)
        cu = sum(p[1] for p in pixels) / len(pixels)
        cv = sum(p[0] for p in pixels) / len(pixels)
        assert rec.centroid_px == pytest.approx((cu, cv), abs=1e-9)
        # and the frame itself contains exactly those pixels in the disk color
        frame = seq.frame(i)
        mask = np.all(frame.color == np.array([255, 0, 0], np.uint8), axis=2)
        got = set(zip(*np.nonzero(mask)))
        assert got == set(pixels)


def test_linear_motion_truth_is_scripted_line(k_small):
    start = (0.0, 0.0, 1.0)
    end = (0.29, 0.0, 1.0)
    spec = small_disk_spec(k_small, frames=30, start=start, end=end)
    _, gt = generate(spec)
    for i, rec in enumerate(gt.tracks["disk"]):
        t = i / 29
        assert rec.center_world == pytest.approx((0.29 * t, 0.0, 1.0), abs=1e-12)


def test_occlusion_window_visibility(k_small):
    spec = small_disk_spec(k_small, frames=100, occlusion=[(40, 59)])
    seq, gt = generate(spec)
    for rec in gt.tracks["disk"]:
        assert rec.visible == (not 40 <= rec.frame <= 59)
    # occluded frames show pure background
    f = seq.frame(45)
    assert int(f.depth.max()) == int(f.depth.min()) == 2000


def test_out_of_frustum_rejected(k_small):
    spec = small_disk_spec(k_small, frames=10, start=(0.0, 0.0, 1.0), end=(2.0, 0.0, 1.0))
    with pytest.raises(SynthSpecError, match="frustum"):
        generate(spec)
    behind = small_disk_spec(k_small, frames=3, start=(0.0, 0.0, -1.0))
    with pytest.raises(SynthSpecError):
        generate(behind)


def test_deterministic_given_spec_and_seed(k_small):
    spec = small_disk_spec(k_small, frames=6, seed=42)
    spec = dataclasses.replace(spec, depth_noise_mm=2.0)
    a, _ = generate(spec)
    b, _ = generate(spec)
    for i in range(6):
        assert np.array_equal(a.frame(i).depth, b.frame(i).depth)
        assert np.array_equal(a.frame(i).color, b.frame(i).color)


def test_write_synthetic_and_truth_roundtrip(tmp_path, k_small):
    spec = small_disk_spec(k_small, frames=7, occlusion=[(2, 3)])
    seq_path = tmp_path / "clip.rvv"
    truth_path = tmp_path / "truth.json"
    gt = write_synthetic(spec, seq_path, truth_path)
    with load_sequence(seq_path) as seq:
        assert seq.frame_count == 7
        mem, gt2 = generate(spec)
        for i in range(7):
            assert np.array_equal(seq.frame(i).depth, mem.frame(i).depth)
    loaded = GroundTruth.load(truth_path)
    assert loaded.frames == 7
    for a, b in zip(loaded.tracks["disk"], gt.tracks["disk"]):
        assert a == b
    assert gt.visible_fraction("disk") == pytest.approx(5 / 7)


def test_spec_json_parsing(k_small):
    doc = {
        "width": 80, "height": 60,
        "intrinsics": {"fx": 100, "fy": 100, "cx": 40, "cy": 30},
        "frames": 4,
        "seed": 9,
        "background": {"depth_mm": 1500, "color": [10, 20, 30]},
        "primitives": [
            {"name": "ball", "color": [0, 200, 0], "radius_px": 4,
             "path": [{"frame": 0, "pos": [0, 0, 1.0]}],
             "occlusion": [[1, 2]]},
        ],
    }
    spec = SyntheticSpec.from_json(doc)
    assert spec.intrinsics == k_small
    seq, gt = generate(spec)
    assert gt.tracks["ball"][0].visible
    assert not gt.tracks["ball"][1].visible


def test_hole_rects_punch_depth(k_small):
    spec = small_disk_spec(k_small, frames=2)
    spec = dataclasses.replace(spec, hole_rects=((0, 0, 5, 5),))
    seq, _ = generate(spec)
    assert int(seq.frame(0).depth[2, 2]) == 0
    assert int(seq.frame(0).depth[10, 10]) == 2000
