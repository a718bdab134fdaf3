/**
 * Point-cloud viewer: renders the streamed cloud, snapshot objects, and
 * effect geometry with three.js, plus HTML overlays for text labels and
 * embedded visuals (labels stay DOM so they are crisp and selectable,
 * iframes stay DOM so they remain interactive and clickable).
 *
 * Every transform, color, and string drawn here comes straight from the
 * latest snapshot — the viewer holds no scene truth of its own.
 */

import * as THREE from "three";

import { defaultOrbit, eyePosition, pickRay, pan, rotate, zoom, type OrbitState } from "./orbit.js";
import { clickSelect, type Intrinsics, type PickHit } from "./pick.js";
import type { FrameCloud, Snapshot, SnapshotObject } from "./protocol.js";
import { unpackGhostPoints } from "./protocol.js";
import { barChart, lineChart, pieChart } from "./chart.js";

const FOV_Y = 55 * (Math.PI / 180);

export class CloudViewer {
  orbit: OrbitState = defaultOrbit();
  intrinsics: Intrinsics | null = null;
  onPick: ((hit: PickHit) => void) | null = null;
  pickEnabled = false;
  /** client-side cosmetic only (never serialized): brightens highlights */
  glow = true;

  private renderer: THREE.WebGLRenderer;
  private scene = new THREE.Scene();
  private camera: THREE.PerspectiveCamera;
  private points: THREE.Points;
  private positionsAttr: THREE.BufferAttribute | null = null;
  private colorsAttr: THREE.BufferAttribute | null = null;
  private cloud: FrameCloud | null = null;
  private snapshot: Snapshot | null = null;
  private objectMeshes = new Map<string, THREE.Object3D>();
  private effectNodes = new Map<string, THREE.Object3D>();
  private overlays = new Map<string, HTMLElement>();
  private dragging: "rotate" | "pan" | null = null;
  private lastPointer = { x: 0, y: 0 };

  constructor(private canvas: HTMLCanvasElement, private overlayRoot: HTMLElement) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: false });
    this.camera = new THREE.PerspectiveCamera(55, 1, 0.01, 100);
    const geometry = new THREE.BufferGeometry();
    const material = new THREE.PointsMaterial({ size: 0.008, vertexColors: true });
    this.points = new THREE.Points(geometry, material);
    this.points.frustumCulled = false;
    this.scene.add(this.points);
    this.bindInput();
    const draw = () => {
      this.renderFrame();
      requestAnimationFrame(draw);
    };
    requestAnimationFrame(draw);
  }

  setCloud(cloud: FrameCloud): void {
    this.cloud = cloud;
    const geometry = this.points.geometry as THREE.BufferGeometry;
    if (!this.positionsAttr || this.positionsAttr.count < cloud.count) {
      this.positionsAttr = new THREE.BufferAttribute(new Float32Array(cloud.count * 3), 3);
      this.colorsAttr = new THREE.BufferAttribute(new Float32Array(cloud.count * 3), 3);
      geometry.setAttribute("position", this.positionsAttr);
      geometry.setAttribute("color", this.colorsAttr);
    }
    (this.positionsAttr.array as Float32Array).set(cloud.positions);
    const colors = this.colorsAttr!.array as Float32Array;
    for (let i = 0; i < cloud.count * 3; i++) colors[i] = cloud.colors[i] / 255;
    this.positionsAttr.needsUpdate = true;
    this.colorsAttr!.needsUpdate = true;
    geometry.setDrawRange(0, cloud.count);
  }

  setBackground(positions: Float32Array, colors: Uint8Array): void {
    const geometry = new THREE.BufferGeometry();
    geometry.setAttribute("position", new THREE.BufferAttribute(positions, 3));
    const c = new Float32Array(colors.length);
    for (let i = 0; i < colors.length; i++) c[i] = colors[i] / 255;
    geometry.setAttribute("color", new THREE.BufferAttribute(c, 3));
    const mesh = new THREE.Points(geometry,
      new THREE.PointsMaterial({ size: 0.01, vertexColors: true }));
    mesh.frustumCulled = false;
    this.scene.add(mesh);
  }

  setSnapshot(snap: Snapshot): void {
    this.snapshot = snap;
    this.syncObjects(snap);
    this.syncEffects(snap);
  }

  pickAt(clientX: number, clientY: number): PickHit | null {
    if (!this.cloud || !this.intrinsics) return null;
    const rect = this.canvas.getBoundingClientRect();
    const ndcX = ((clientX - rect.left) / rect.width) * 2 - 1;
    const ndcY = 1 - ((clientY - rect.top) / rect.height) * 2;
    const ray = pickRay(this.orbit, ndcX, ndcY, FOV_Y, rect.width / rect.height);
    return clickSelect(ray, this.cloud.positions, this.intrinsics);
  }

  // -- internals ------------------------------------------------------------

  private bindInput(): void {
    this.canvas.addEventListener("pointerdown", (e) => {
      if (this.pickEnabled && e.button === 0 && this.onPick) {
        const hit = this.pickAt(e.clientX, e.clientY);
        if (hit) {
          this.onPick(hit);
          return;
        }
      }
      this.dragging = e.button === 2 || e.shiftKey ? "pan" : "rotate";
      this.lastPointer = { x: e.clientX, y: e.clientY };
      this.canvas.setPointerCapture(e.pointerId);
    });
    this.canvas.addEventListener("pointermove", (e) => {
      if (!this.dragging) return;
      const dx = e.clientX - this.lastPointer.x;
      const dy = e.clientY - this.lastPointer.y;
      this.lastPointer = { x: e.clientX, y: e.clientY };
      this.orbit = this.dragging === "rotate"
        ? rotate(this.orbit, dx * 0.008, dy * 0.008)
        : pan(this.orbit, -dx, dy);
    });
    this.canvas.addEventListener("pointerup", () => (this.dragging = null));
    this.canvas.addEventListener("wheel", (e) => {
      e.preventDefault();
      this.orbit = zoom(this.orbit, Math.exp(e.deltaY * 0.001));
    }, { passive: false });
    this.canvas.addEventListener("contextmenu", (e) => e.preventDefault());
  }

  private renderFrame(): void {
    const rect = this.canvas.getBoundingClientRect();
    const w = Math.max(1, Math.floor(rect.width));
    const h = Math.max(1, Math.floor(rect.height));
    if (this.canvas.width !== w || this.canvas.height !== h) {
      this.renderer.setSize(w, h, false);
      this.camera.aspect = w / h;
      this.camera.updateProjectionMatrix();
    }
    const eye = eyePosition(this.orbit);
    this.camera.position.set(eye[0], eye[1], eye[2]);
    this.camera.up.set(0, -1, 0);
    this.camera.lookAt(...this.orbit.target);
    this.renderer.render(this.scene, this.camera);
    this.placeOverlays();
  }

  private syncObjects(snap: Snapshot): void {
    const seen = new Set<string>();
    for (const obj of snap.objects) {
      seen.add(obj.id);
      if (obj.kind === "text" || obj.kind === "visual") {
        this.syncOverlay(obj);
        continue;
      }
      let node = this.objectMeshes.get(obj.id);
      if (!node || (node.userData.shape ?? null) !== (obj.shape ?? null)) {
        if (node) this.scene.remove(node);
        node = obj.kind === "link" ? this.makeLink() : this.makeHighlight(obj.shape ?? "sphere");
        node.userData.shape = obj.shape ?? null;
        this.objectMeshes.set(obj.id, node);
        this.scene.add(node);
      }
      if (obj.kind === "link") {
        this.updateLink(node as THREE.Line, obj);
      } else {
        this.updateHighlight(node as THREE.Mesh, obj);
      }
    }
    for (const [id, node] of this.objectMeshes) {
      if (!seen.has(id)) {
        this.scene.remove(node);
        this.objectMeshes.delete(id);
      }
    }
    for (const [id, el] of this.overlays) {
      if (!seen.has(id)) {
        el.remove();
        this.overlays.delete(id);
      }
    }
  }

  private makeHighlight(shape: string): THREE.Mesh {
    const geometry =
      shape === "box" ? new THREE.BoxGeometry(1, 1, 1)
      : shape === "cylinder" ? new THREE.CylinderGeometry(0.5, 0.5, 1, 24)
      : shape === "circle2d" ? new THREE.CircleGeometry(0.5, 32)
      : shape === "rect2d" ? new THREE.PlaneGeometry(1, 1)
      : new THREE.SphereGeometry(0.5, 20, 14);
    return new THREE.Mesh(geometry, new THREE.MeshBasicMaterial({
      transparent: true, depthWrite: false, side: THREE.DoubleSide,
    }));
  }

  private updateHighlight(mesh: THREE.Mesh, obj: SnapshotObject): void {
    const [x, y, z] = obj.position ?? [0, 0, 0];
    mesh.position.set(x, y, z);
    const [qw, qx, qy, qz] = obj.orientation ?? [1, 0, 0, 0];
    mesh.quaternion.set(qx, qy, qz, qw);
    const [sx, sy, sz] = obj.scale ?? [1, 1, 1];
    mesh.scale.set(sx, sy, sz);
    const material = mesh.material as THREE.MeshBasicMaterial;
    const [r, g, b] = obj.color ?? [1, 1, 0, 1];
    const boost = this.glow ? 1.25 : 1.0;
    material.color.setRGB(Math.min(1, r * boost), Math.min(1, g * boost), Math.min(1, b * boost));
    material.opacity = (obj.opacity ?? 1) * (obj.stale ? 0.45 : 1);
  }

  private makeLink(): THREE.Line {
    const geometry = new THREE.BufferGeometry();
    geometry.setAttribute("position", new THREE.BufferAttribute(new Float32Array(6), 3));
    return new THREE.Line(geometry, new THREE.LineBasicMaterial({ transparent: true }));
  }

  private updateLink(line: THREE.Line, obj: SnapshotObject): void {
    const attr = (line.geometry as THREE.BufferGeometry).getAttribute("position");
    const ends = obj.endpoints ?? [[0, 0, 0], [0, 0, 0]];
    (attr.array as Float32Array).set([...ends[0], ...ends[1]]);
    attr.needsUpdate = true;
    const material = line.material as THREE.LineBasicMaterial;
    const [r, g, b] = obj.color ?? [1, 1, 1, 1];
    material.color.setRGB(r, g, b);
    material.opacity = (obj.opacity ?? 1) * (obj.stale ? 0.45 : 1);
  }

  private syncOverlay(obj: SnapshotObject): void {
    let el = this.overlays.get(obj.id);
    if (!el) {
      el = document.createElement("div");
      el.className = `overlay overlay-${obj.kind}`;
      if (obj.kind === "visual") {
        const source = obj.source ?? "";
        if (source.startsWith("graph:")) {
          const canvasEl = document.createElement("canvas");
          canvasEl.width = 280;
          canvasEl.height = 180;
          canvasEl.dataset.graph = source.slice(6);
          el.appendChild(canvasEl);
        } else {
          const iframe = document.createElement("iframe");
          iframe.src = source;
          iframe.width = "280";
          iframe.height = "180";
          el.appendChild(iframe); // stays interactive and clickable
        }
      }
      this.overlayRoot.appendChild(el);
      this.overlays.set(obj.id, el);
    }
    if (obj.kind === "text") el.textContent = obj.text ?? "";
    el.style.opacity = String((obj.opacity ?? 1) * (obj.stale ? 0.55 : 1));
    el.dataset.x = String(obj.position?.[0] ?? 0);
    el.dataset.y = String(obj.position?.[1] ?? 0);
    el.dataset.z = String(obj.position?.[2] ?? 0);
  }

  private placeOverlays(): void {
    const rect = this.canvas.getBoundingClientRect();
    const v = new THREE.Vector3();
    for (const el of this.overlays.values()) {
      v.set(Number(el.dataset.x), Number(el.dataset.y), Number(el.dataset.z));
      v.project(this.camera);
      const visible = v.z > -1 && v.z < 1;
      el.style.display = visible ? "block" : "none";
      if (visible) {
        el.style.left = `${(v.x * 0.5 + 0.5) * rect.width}px`;
        el.style.top = `${(0.5 - v.y * 0.5) * rect.height}px`;
      }
      const graphCanvas = el.querySelector("canvas[data-graph]") as HTMLCanvasElement | null;
      if (graphCanvas && this.snapshot) this.drawGraph(graphCanvas);
    }
  }

  private drawGraph(canvasEl: HTMLCanvasElement): void {
    const geo = this.snapshot?.effects[canvasEl.dataset.graph ?? ""];
    const ctx = canvasEl.getContext("2d");
    if (!geo || !ctx || geo.kind !== "graph") return;
    const w = canvasEl.width;
    const h = canvasEl.height;
    ctx.clearRect(0, 0, w, h);
    ctx.fillStyle = "rgba(18, 20, 26, 0.92)";
    ctx.fillRect(0, 0, w, h);
    ctx.strokeStyle = "#6cf";
    ctx.fillStyle = "#6cf";
    const samples = geo.samples ?? [];
    if (geo.chart === "pie") {
      const pie = pieChart(samples);
      ctx.beginPath();
      ctx.moveTo(w / 2, h / 2);
      ctx.arc(w / 2, h / 2, Math.min(w, h) * 0.4, pie.startRad, pie.endRad);
      ctx.closePath();
      ctx.fill();
    } else if (geo.chart === "bar") {
      for (const bar of barChart(samples, { width: w, height: h, pad: 10 }).bars) {
        ctx.fillRect(bar.x, bar.y, bar.w, bar.h);
      }
    } else {
      for (const run of lineChart(samples, { width: w, height: h, pad: 10 }).segments) {
        ctx.beginPath();
        run.forEach((p, i) => (i === 0 ? ctx.moveTo(p.x, p.y) : ctx.lineTo(p.x, p.y)));
        ctx.stroke();
      }
    }
    ctx.fillStyle = "#9ab";
    ctx.font = "11px system-ui";
    ctx.fillText(`${geo.variable} (${geo.chart})`, 8, 14);
  }

  private syncEffects(snap: Snapshot): void {
    const seen = new Set<string>();
    for (const [id, geo] of Object.entries(snap.effects)) {
      if (geo.kind === "trajectory") {
        seen.add(id);
        this.syncTrajectory(id, geo.markers ?? [], geo.style ?? "markers");
      } else if (geo.kind === "ghost") {
        for (const ghost of geo.snapshots ?? []) {
          const key = `${id}:${ghost.frame}`;
          seen.add(key);
          this.syncGhost(key, ghost.points_b64, ghost.opacity, ghost.count);
        }
      }
    }
    for (const [key, node] of this.effectNodes) {
      if (!seen.has(key)) {
        this.scene.remove(node);
        this.effectNodes.delete(key);
      }
    }
  }

  private syncTrajectory(id: string, markers: [number, number, number, number][],
                         style: string): void {
    let node = this.effectNodes.get(id);
    if (!node) {
      const geometry = new THREE.BufferGeometry();
      node = style === "trail"
        ? new THREE.Line(geometry, new THREE.LineBasicMaterial({ color: 0xffe34d }))
        : new THREE.Points(geometry, new THREE.PointsMaterial({ color: 0xffe34d, size: 0.02 }));
      node.frustumCulled = false;
      this.effectNodes.set(id, node);
      this.scene.add(node);
    }
    const positions = new Float32Array(markers.length * 3);
    markers.forEach((m, i) => positions.set([m[0], m[1], m[2]], i * 3));
    const geometry = (node as THREE.Points | THREE.Line).geometry as THREE.BufferGeometry;
    geometry.setAttribute("position", new THREE.BufferAttribute(positions, 3));
  }

  private syncGhost(key: string, pointsB64: string, opacity: number, count: number): void {
    let node = this.effectNodes.get(key) as THREE.Points | undefined;
    if (!node) {
      const { positions, colors } = unpackGhostPoints(pointsB64);
      const geometry = new THREE.BufferGeometry();
      geometry.setAttribute("position", new THREE.BufferAttribute(positions, 3));
      const c = new Float32Array(count * 3);
      for (let i = 0; i < colors.length; i++) c[i] = colors[i] / 255;
      geometry.setAttribute("color", new THREE.BufferAttribute(c, 3));
      node = new THREE.Points(geometry, new THREE.PointsMaterial({
        size: 0.008, vertexColors: true, transparent: true,
      }));
      node.frustumCulled = false;
      this.effectNodes.set(key, node);
      this.scene.add(node);
    }
    (node.material as THREE.PointsMaterial).opacity = opacity; // age-ranked by the server
  }
}
