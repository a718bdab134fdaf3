"""Headless export: one snapshot JSON per frame, optionally an augmented PLY
(frame cloud plus effect geometry points). Outputs are byte-deterministic."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .effects import GhostEffect, TrajectoryEffect
from .scene import snapshot_bytes
from .session import Session, SessionError

TRAJECTORY_MARKER_RGB = (255, 255, 0)


def snapshot_filename(frame: int) -> str:
    return f"{frame:06d}.snapshot.json"


def ply_filename(frame: int) -> str:
    return f"{frame:06d}.ply"


def augmented_cloud(session: Session) -> tuple[np.ndarray, np.ndarray]:
    """Current frame cloud + ghost clones + trajectory marker centers,
    in a fixed deterministic order."""
    cloud = session.cloud()
    parts_pos = [cloud.positions]
    parts_rgb = [cloud.colors]
    for eid in sorted(session.effects):
        eff = session.effects[eid]
        if isinstance(eff, TrajectoryEffect) and eff.markers:
            pos = np.array([m[1] for m in eff.markers], dtype=np.float32)
            rgb = np.tile(np.array(TRAJECTORY_MARKER_RGB, np.uint8), (len(eff.markers), 1))
            parts_pos.append(pos)
            parts_rgb.append(rgb)
        elif isinstance(eff, GhostEffect):
            for snap in eff.snapshots:
                parts_pos.append(snap.positions)
                parts_rgb.append(snap.colors)
    return np.concatenate(parts_pos), np.concatenate(parts_rgb)


def export_range(session: Session, out_dir: str | Path,
                 frame_range: tuple[int, int] | None = None,
                 ply: bool = False, stride: int = 1) -> int:
    """Writes NNNNNN.snapshot.json (+ NNNNNN.ply) for each frame in the range.

    The snapshot bytes equal the streamed Snapshot frames for the same
    project; stride applies to the PLY cloud only.
    """
    from .container import write_ply

    a, b = frame_range if frame_range is not None else (0, session.length - 1)
    if not (0 <= a <= b < session.length):
        raise SessionError(f"bad export range {a}..{b} for clip of {session.length}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    session.seek(a)
    written = 0
    for f in range(a, b + 1):
        if f != session.cursor:
            session.step()
        (out / snapshot_filename(f)).write_bytes(session.current_snapshot_bytes())
        if ply:
            pos, rgb = augmented_cloud(session)
            if stride > 1:
                pos = pos[::stride]
                rgb = rgb[::stride]
            write_ply(out / ply_filename(f), pos, rgb)
        written += 1
    return written
