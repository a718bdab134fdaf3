/**
 * Snapshot-driven view state. The server snapshot is the single source of
 * truth: nothing here derives transforms, kinematics, or label text — the
 * store only indexes the latest snapshot plus tracker announcements so the
 * widgets can render. Reconnecting and replaying the same frame reproduces
 * the identical state.
 */

import type { FrameCloud, Snapshot, SnapshotObject, TrackerInfo } from "./protocol.js";

export interface StoreState {
  snapshot: Snapshot | null;
  cloud: FrameCloud | null;
  trackers: Map<string, TrackerInfo>;
  frames: number | null; // clip length, from the hello ack
}

export class SnapshotStore {
  state: StoreState = { snapshot: null, cloud: null, trackers: new Map(), frames: null };
  private listeners = new Set<() => void>();

  subscribe(fn: () => void): () => void {
    this.listeners.add(fn);
    return () => this.listeners.delete(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn();
  }

  applySnapshot(snap: Snapshot): void {
    this.state.snapshot = snap;
    // refresh tracker validity from the authoritative variables
    for (const [name, info] of this.state.trackers) {
      const x = snap.variables[`${name}.x`];
      this.state.trackers.set(name, {
        ...info,
        frame: snap.frame,
        valid: x !== null && x !== undefined,
        world: positionOf(snap, name),
      });
    }
    this.emit();
  }

  applyCloud(cloud: FrameCloud): void {
    this.state.cloud = cloud;
    this.emit();
  }

  announceTracker(info: TrackerInfo): void {
    this.state.trackers.set(info.name, info);
    this.emit();
  }

  setClipLength(frames: number): void {
    this.state.frames = frames;
    this.emit();
  }

  get frame(): number | null {
    return this.state.snapshot?.frame ?? null;
  }

  object(id: string): SnapshotObject | undefined {
    return this.state.snapshot?.objects.find((o) => o.id === id);
  }

  labelText(id: string): string | undefined {
    return this.object(id)?.text;
  }

  variable(name: string): number | null | undefined {
    return this.state.snapshot?.variables[name];
  }

  /** Names that publish both `.x` and `.speed` variables are trackers. */
  trackerNames(): string[] {
    const vars = this.state.snapshot?.variables ?? {};
    const names = new Set<string>(this.state.trackers.keys());
    for (const key of Object.keys(vars)) {
      if (key.endsWith(".speed") && `${key.slice(0, -6)}.x` in vars) {
        names.add(key.slice(0, -6));
      }
    }
    return [...names].sort();
  }

  graphEffects(): { id: string; variable: string; chart: string;
                    samples: [number, number | null][] }[] {
    const effects = this.state.snapshot?.effects ?? {};
    const out = [];
    for (const [id, geo] of Object.entries(effects)) {
      if (geo.kind === "graph") {
        out.push({
          id,
          variable: geo.variable ?? "",
          chart: geo.chart ?? "line",
          samples: geo.samples ?? [],
        });
      }
    }
    return out.sort((a, b) => a.id.localeCompare(b.id));
  }
}

function positionOf(snap: Snapshot, tracker: string): [number, number, number] | null {
  const x = snap.variables[`${tracker}.x`];
  const y = snap.variables[`${tracker}.y`];
  const z = snap.variables[`${tracker}.z`];
  if (x === null || y === null || z === null || x === undefined) return null;
  return [x as number, y as number, z as number];
}
