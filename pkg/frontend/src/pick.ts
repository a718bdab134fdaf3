/**
 * Click selection: cast the viewer ray into the streamed point cloud, take
 * the hit nearest the eye, and map it back to SOURCE-camera pixel
 * coordinates through the shared intrinsics. The server owns tracker
 * resolution; the client only supplies (u, v).
 */

export interface Intrinsics {
  fx: number;
  fy: number;
  cx: number;
  cy: number;
  width: number;
  height: number;
}

export interface Ray {
  origin: [number, number, number];
  dir: [number, number, number]; // unit length
}

export interface PickHit {
  index: number;
  point: [number, number, number];
  u: number; // source-camera pixel column
  v: number; // source-camera pixel row
}

/**
 * Nearest point along the ray whose perpendicular distance stays inside an
 * angular tolerance (so far points feel the same click size as near ones).
 */
export function pickCloudPoint(ray: Ray, positions: Float32Array,
                               angularTolRad = 0.01): { index: number; t: number } | null {
  const [ox, oy, oz] = ray.origin;
  const [dx, dy, dz] = ray.dir;
  let bestT = Infinity;
  let bestIndex = -1;
  const n = Math.floor(positions.length / 3);
  for (let i = 0; i < n; i++) {
    const px = positions[i * 3] - ox;
    const py = positions[i * 3 + 1] - oy;
    const pz = positions[i * 3 + 2] - oz;
    const t = px * dx + py * dy + pz * dz;
    if (t <= 0 || t >= bestT) continue;
    const qx = px - t * dx;
    const qy = py - t * dy;
    const qz = pz - t * dz;
    const perp2 = qx * qx + qy * qy + qz * qz;
    const tol = t * angularTolRad;
    if (perp2 <= tol * tol) {
      bestT = t;
      bestIndex = i;
    }
  }
  return bestIndex < 0 ? null : { index: bestIndex, t: bestT };
}

/** Project a world point through the source pinhole; null outside the grid. */
export function worldToSourcePixel(p: [number, number, number],
                                   k: Intrinsics): { u: number; v: number } | null {
  const [x, y, z] = p;
  if (z <= 0) return null;
  const u = Math.round((k.fx * x) / z + k.cx);
  const v = Math.round((k.fy * y) / z + k.cy);
  if (u < 0 || u >= k.width || v < 0 || v >= k.height) return null;
  return { u, v };
}

export function clickSelect(ray: Ray, positions: Float32Array,
                            k: Intrinsics): PickHit | null {
  const hit = pickCloudPoint(ray, positions);
  if (!hit) return null;
  const point: [number, number, number] = [
    positions[hit.index * 3],
    positions[hit.index * 3 + 1],
    positions[hit.index * 3 + 2],
  ];
  const px = worldToSourcePixel(point, k);
  if (!px) return null;
  return { index: hit.index, point, u: px.u, v: px.v };
}
