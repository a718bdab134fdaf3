/**
 * Orbit camera over the capture volume. The source camera convention is
 * x right, y DOWN, z forward, so "up" on screen is world -y and elevation
 * is measured toward -y.
 */

export interface OrbitState {
  azimuthRad: number;
  elevationRad: number;
  radius: number;
  target: [number, number, number];
}

const MIN_RADIUS = 0.05;
const MAX_ELEVATION = Math.PI / 2 - 0.01;

export function defaultOrbit(): OrbitState {
  return { azimuthRad: -Math.PI / 2, elevationRad: 0.25, radius: 2.5, target: [0, 0, 1.2] };
}

export function rotate(state: OrbitState, dAzimuth: number, dElevation: number): OrbitState {
  const elevation = Math.max(-MAX_ELEVATION,
    Math.min(MAX_ELEVATION, state.elevationRad + dElevation));
  return { ...state, azimuthRad: state.azimuthRad + dAzimuth, elevationRad: elevation };
}

export function zoom(state: OrbitState, factor: number): OrbitState {
  // the radius must stay positive no matter how hard the wheel spins
  return { ...state, radius: Math.max(MIN_RADIUS, state.radius * factor) };
}

export function pan(state: OrbitState, dx: number, dy: number): OrbitState {
  const [rt, , fwd] = basis(state);
  const up = cross(fwd, rt);
  const scale = state.radius * 0.002;
  const target: [number, number, number] = [
    state.target[0] + (rt[0] * dx + up[0] * dy) * scale,
    state.target[1] + (rt[1] * dx + up[1] * dy) * scale,
    state.target[2] + (rt[2] * dx + up[2] * dy) * scale,
  ];
  return { ...state, target };
}

export function eyePosition(state: OrbitState): [number, number, number] {
  const ce = Math.cos(state.elevationRad);
  return [
    state.target[0] + state.radius * ce * Math.cos(state.azimuthRad),
    state.target[1] - state.radius * Math.sin(state.elevationRad),
    state.target[2] + state.radius * ce * Math.sin(state.azimuthRad),
  ];
}

/** right / up / forward unit vectors of the viewer camera, world space. */
export function basis(state: OrbitState): [number, number, number][] {
  const eye = eyePosition(state);
  const fwd = normalize([
    state.target[0] - eye[0],
    state.target[1] - eye[1],
    state.target[2] - eye[2],
  ]);
  const worldUp: [number, number, number] = [0, -1, 0];
  let right = cross(worldUp, fwd);
  if (length(right) < 1e-9) right = cross([0, 0, 1], fwd);
  right = normalize(right);
  const up = cross(fwd, right);
  return [right, up, fwd];
}

/**
 * The world-space ray through a canvas position, for picking.
 * ndcX/ndcY in [-1, 1], +y up (standard NDC), vertical fov in radians.
 */
export function pickRay(state: OrbitState, ndcX: number, ndcY: number,
                        fovYRad: number, aspect: number):
    { origin: [number, number, number]; dir: [number, number, number] } {
  const [right, up, fwd] = basis(state);
  const halfH = Math.tan(fovYRad / 2);
  const halfW = halfH * aspect;
  const dir = normalize([
    fwd[0] + right[0] * ndcX * halfW + up[0] * ndcY * halfH,
    fwd[1] + right[1] * ndcX * halfW + up[1] * ndcY * halfH,
    fwd[2] + right[2] * ndcX * halfW + up[2] * ndcY * halfH,
  ]);
  return { origin: eyePosition(state), dir };
}

function cross(a: number[], b: number[]): [number, number, number] {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

function length(v: number[]): number {
  return Math.hypot(v[0], v[1], v[2]);
}

function normalize(v: [number, number, number]): [number, number, number] {
  const n = length(v);
  return [v[0] / n, v[1] / n, v[2] / n];
}
