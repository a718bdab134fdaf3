from __future__ import annotations

import numpy as np
import pytest

from rvv.camera import CameraIntrinsics
from rvv.container import (
    ContainerError,
    SequenceWriter,
    load_sequence,
    read_ply,
    write_ply,
    write_sequence,
)
from rvv.frames import RgbdFrame


def _write_clip(path, k, n_frames, seed=0):
    rng = np.random.default_rng(seed)
    frames = []
    for i in range(n_frames):
        depth = rng.integers(0, 5000, (k.height, k.width)).astype(np.uint16)
        color = rng.integers(0, 256, (k.height, k.width, 3)).astype(np.uint8)
        frames.append(RgbdFrame(index=i, depth=depth, color=color))
    write_sequence(path, k, frames)
    return frames


def test_round_trip_single_frame(tmp_path, k_small):
    p = tmp_path / "one.rvv"
    frames = _write_clip(p, k_small, 1)
    with load_sequence(p) as seq:
        assert seq.frame_count == 1
        assert seq.intrinsics == k_small
        got = seq.frame(0)
        assert np.array_equal(got.depth, frames[0].depth)
        assert np.array_equal(got.color, frames[0].color)


def test_decode_encode_bit_exact(tmp_path, k_small):
    p = tmp_path / "clip.rvv"
    _write_clip(p, k_small, 4, seed=3)
    original = p.read_bytes()
    q = tmp_path / "rewritten.rvv"
    with load_sequence(p) as seq:
        with SequenceWriter(q, seq.intrinsics) as wr:
            for i in range(seq.frame_count):
                f = seq.frame(i)
                wr.add_frame(f.depth, f.color)
    assert q.read_bytes() == original


def test_out_of_range_frame(tmp_path, k_small):
    p = tmp_path / "clip.rvv"
    _write_clip(p, k_small, 100)
    with load_sequence(p) as seq:
        seq.frame(99)
        with pytest.raises(IndexError, match="100"):
            seq.frame(100)


def test_bad_magic(tmp_path, k_small):
    p = tmp_path / "clip.rvv"
    _write_clip(p, k_small, 1)
    data = bytearray(p.read_bytes())
    data[:4] = b"JUNK"
    p.write_bytes(bytes(data))
    with pytest.raises(ContainerError, match="magic"):
        load_sequence(p)


def test_truncation_names_frame_index(tmp_path, k_small):
    p = tmp_path / "clip.rvv"
    _write_clip(p, k_small, 3)
    data = p.read_bytes()
    frame_size = k_small.width * k_small.height * 5
    p.write_bytes(data[: 30 + 2 * frame_size + 100])  # partway into frame 2
    with pytest.raises(ContainerError, match="frame 2"):
        load_sequence(p)


def test_trailing_bytes_rejected(tmp_path, k_small):
    p = tmp_path / "clip.rvv"
    _write_clip(p, k_small, 1)
    p.write_bytes(p.read_bytes() + b"xx")
    with pytest.raises(ContainerError, match="trailing"):
        load_sequence(p)


def test_intrinsics_mismatch_diagnostic(tmp_path):
    # principal point outside the stored grid
    k = CameraIntrinsics(fx=100, fy=100, cx=40, cy=30, width=80, height=60)
    p = tmp_path / "clip.rvv"
    _write_clip(p, k, 1)
    data = bytearray(p.read_bytes())
    data[4:6] = (32).to_bytes(2, "little")  # shrink width below cx
    p.write_bytes(bytes(data))
    with pytest.raises(ContainerError, match="intrinsics"):
        load_sequence(p)


def test_ply_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    pos = rng.normal(size=(57, 3)).astype(np.float32)
    rgb = rng.integers(0, 256, (57, 3)).astype(np.uint8)
    p = tmp_path / "cloud.ply"
    write_ply(p, pos, rgb)
    pos2, rgb2 = read_ply(p)
    assert np.array_equal(pos, pos2)
    assert np.array_equal(rgb, rgb2)


def test_ply_ascii(tmp_path):
    p = tmp_path / "cloud.ply"
    p.write_text(
        "ply\nformat ascii 1.0\nelement vertex 2\n"
        "property float x\nproperty float y\nproperty float z\n"
        "property uchar red\nproperty uchar green\nproperty uchar blue\n"
        "end_header\n"
        "0.5 -1.0 2.0 255 0 0\n"
        "0 0 1 0 255 0\n"
    )
    pos, rgb = read_ply(p)
    assert pos[0] == pytest.approx((0.5, -1.0, 2.0))
    assert tuple(rgb[1]) == (0, 255, 0)
