import { describe, expect, it } from "vitest";

import { clickSelect, pickCloudPoint, worldToSourcePixel, type Intrinsics } from "../src/pick.js";
import { defaultOrbit, eyePosition, pickRay } from "../src/orbit.js";

const K: Intrinsics = { fx: 500, fy: 500, cx: 320, cy: 288, width: 640, height: 576 };

function cloudOf(points: number[][]): Float32Array {
  const out = new Float32Array(points.length * 3);
  points.forEach((p, i) => out.set(p, i * 3));
  return out;
}

describe("worldToSourcePixel", () => {
  it("matches the pinhole formula", () => {
    expect(worldToSourcePixel([0, 0, 1], K)).toEqual({ u: 320, v: 288 });
    expect(worldToSourcePixel([-0.64, -0.576, 1], K)).toEqual({ u: 0, v: 0 });
    expect(worldToSourcePixel([2, 0, 2], K)).toBeNull(); // u = 820, off-grid
    expect(worldToSourcePixel([0, 0, -1], K)).toBeNull(); // behind the camera
  });
});

describe("pickCloudPoint", () => {
  it("selects the nearest point along the ray within tolerance", () => {
    const cloud = cloudOf([
      [0, 0, 3],     // behind the near point, same ray
      [0, 0, 1],     // nearest hit
      [0.5, 0.5, 1], // off the ray
    ]);
    const hit = pickCloudPoint({ origin: [0, 0, 0], dir: [0, 0, 1] }, cloud);
    expect(hit?.index).toBe(1);
  });

  it("returns null when nothing is near the ray", () => {
    const cloud = cloudOf([[1, 1, 1]]);
    expect(pickCloudPoint({ origin: [0, 0, 0], dir: [0, 0, 1] }, cloud)).toBeNull();
  });
});

describe("clickSelect through an oblique viewer", () => {
  it("maps a cloud point back to its source pixel", () => {
    // grid spacing far above the angular tolerance, so exactly one point
    // can fall inside the pick cylinder
    const points: number[][] = [];
    for (let du = -3; du <= 3; du++) {
      for (let dv = -3; dv <= 3; dv++) {
        points.push([0.1 + du * 0.05, -0.05 + dv * 0.05, 1.2]);
      }
    }
    const cloud = cloudOf(points);
    const target = points[24]; // some interior point
    // viewer orbiting off-axis: ray from the eye straight at the target point
    const orbit = { ...defaultOrbit(), azimuthRad: 0.9, elevationRad: 0.4, radius: 2.2 };
    const eye = eyePosition(orbit);
    const dir: [number, number, number] = [
      target[0] - eye[0], target[1] - eye[1], target[2] - eye[2]];
    const n = Math.hypot(...dir);
    const ray = { origin: eye, dir: dir.map((v) => v / n) as [number, number, number] };
    const hit = clickSelect(ray, cloud, K);
    expect(hit).not.toBeNull();
    const expected = worldToSourcePixel(target as [number, number, number], K)!;
    expect(hit!.u).toBe(expected.u);
    expect(hit!.v).toBe(expected.v);
  });

  it("works with rays built by pickRay", () => {
    const cloud = cloudOf([[0, 0, 1.2]]);
    const orbit = defaultOrbit();
    // search the screen for the NDC position that hits the point
    let found: { u: number; v: number } | null = null;
    for (let gx = -20; gx <= 20 && !found; gx++) {
      for (let gy = -20; gy <= 20 && !found; gy++) {
        const ray = pickRay(orbit, gx / 20, gy / 20, 1.0, 1.5);
        const hit = clickSelect(ray, cloud, K);
        if (hit) found = { u: hit.u, v: hit.v };
      }
    }
    expect(found).toEqual({ u: 320, v: 288 });
  });
});
