"""Independent brute-force oracles the production code is checked against.

Everything here is deliberately naive: full-image scans, flood fill,
pure-Python arithmetic. Nothing imports the production implementations
beyond plain data types.
"""

from __future__ import annotations

import math
import statistics

import numpy as np


def brute_mask(color: np.ndarray, ref: tuple[int, int, int], tol: int) -> np.ndarray:
    h, w, _ = color.shape
    mask = np.zeros((h, w), dtype=bool)
    for r in range(h):
        for c in range(w):
            px = color[r, c]
            if all(abs(int(px[i]) - int(ref[i])) <= tol for i in range(3)):
                mask[r, c] = True
    return mask


def flood_components(mask: np.ndarray) -> list[list[tuple[int, int]]]:
    """8-connected components by BFS flood fill, scan order row-major."""
    h, w = mask.shape
    seen = np.zeros((h, w), dtype=bool)
    comps = []
    for r in range(h):
        for c in range(w):
            if not mask[r, c] or seen[r, c]:
                continue
            comp = []
            stack = [(r, c)]
            seen[r, c] = True
            while stack:
                cr, cc = stack.pop()
                comp.append((cr, cc))
                for dr in (-1, 0, 1):
                    for dc in (-1, 0, 1):
                        nr, nc = cr + dr, cc + dc
                        if 0 <= nr < h and 0 <= nc < w and mask[nr, nc] and not seen[nr, nc]:
                            seen[nr, nc] = True
                            stack.append((nr, nc))
            comps.append(comp)
    return comps


def brute_track(color: np.ndarray, depth: np.ndarray, ref: tuple[int, int, int],
                tol: int, min_px: int):
    """Returns (centroid_uv, depth_mm) or None, by the tracker's documented rules."""
    comps = flood_components(brute_mask(color, ref, tol))
    if not comps:
        return None
    best = None
    best_key = None
    for comp in comps:
        rows = [p[0] for p in comp]
        cols = [p[1] for p in comp]
        # larger first, then smallest bbox top-left corner in row-major order
        key = (-len(comp), min(rows), min(cols))
        if best_key is None or key < best_key:
            best_key = key
            best = comp
    if len(best) < min_px:
        return None
    cu = sum(p[1] for p in best) / len(best)
    cv = sum(p[0] for p in best) / len(best)
    depths = [int(depth[r, c]) for r, c in best if depth[r, c] > 0]
    if not depths:
        return None
    return (cu, cv), float(statistics.median(depths))


def brute_disk_pixels(u0: float, v0: float, radius: float, h: int, w: int):
    """Full-grid scan rasterization of a disk."""
    out = []
    for r in range(h):
        for c in range(w):
            if (c - u0) ** 2 + (r - v0) ** 2 <= radius * radius:
                out.append((r, c))
    return out


def shoelace_area(points_2d: list[tuple[float, float]]) -> float:
    s = 0.0
    n = len(points_2d)
    for i in range(n):
        x0, y0 = points_2d[i]
        x1, y1 = points_2d[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return abs(s) / 2.0


def planar_quad_area(a, b, c, d) -> float:
    """Area of a planar quad by projecting onto its own plane, then shoelace."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    c = np.asarray(c, float)
    d = np.asarray(d, float)
    n = np.cross(b - a, c - a)
    nn = np.linalg.norm(n)
    if nn == 0:
        n = np.cross(b - a, d - a)
        nn = np.linalg.norm(n)
    n = n / nn
    e1 = b - a
    e1 = e1 / np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    pts = [(float(np.dot(p - a, e1)), float(np.dot(p - a, e2))) for p in (a, b, c, d)]
    return shoelace_area(pts)


def angle_atan2_deg(a, v, c) -> float:
    """Vertex angle via atan2(|u x w|, u . w) — a formula independent of arccos."""
    u = np.asarray(a, float) - np.asarray(v, float)
    w = np.asarray(c, float) - np.asarray(v, float)
    return math.degrees(math.atan2(np.linalg.norm(np.cross(u, w)), float(np.dot(u, w))))


def kahan_triangle_area(p, q, r) -> float:
    """Triangle area from side lengths via Kahan's stable formula — no cross
    products involved, robust even for needle triangles."""
    sides = sorted(
        (
            math.dist(p, q),
            math.dist(q, r),
            math.dist(r, p),
        ),
        reverse=True,
    )
    a, b, c = sides
    t = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c))
    return 0.25 * math.sqrt(max(t, 0.0))


def quad_area_fan(a, b, c, d) -> float:
    """Selection-order fan triangulation using the Kahan oracle per triangle."""
    return kahan_triangle_area(a, b, c) + kahan_triangle_area(a, c, d)
