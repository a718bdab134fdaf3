/**
 * Wire protocol for the authoring session: JSON text frames for commands
 * and snapshots, binary frames for point clouds. Transport-agnostic so the
 * same client runs in the browser (native WebSocket) and in Node tests (ws).
 */

export const PROTOCOL_VERSION = 1;

export type SelectionMode = "color" | "body" | "stationary";

export interface Ack {
  type: "ack";
  seq: number;
  result?: Record<string, unknown>;
}

export interface ErrorMsg {
  type: "error";
  seq: number;
  code: string;
  detail: string;
  offset?: number;
}

export interface TrackerInfo {
  name: string;
  kind: string;
  frame: number;
  valid: boolean;
  world: [number, number, number] | null;
}

export interface TrackerUpdate {
  type: "tracker_update";
  tracker: TrackerInfo;
}

export interface MetricsReport {
  type: "metrics";
  tracker: string;
  frames: number;
  valid_frames: number;
  fraction: number;
}

export interface SnapshotObject {
  id: string;
  kind: "text" | "highlight" | "visual" | "link";
  stale: boolean;
  position?: [number, number, number];
  orientation?: [number, number, number, number];
  scale?: [number, number, number];
  opacity?: number;
  text?: string;
  shape?: string;
  color?: number[];
  source?: string;
  size?: [number, number];
  endpoints?: [number, number, number][];
  thickness?: number;
}

export interface GhostSnapshotGeo {
  frame: number;
  opacity: number;
  count: number;
  points_b64: string;
}

export interface EffectGeo {
  kind: "trajectory" | "ghost" | "graph";
  tracker?: string;
  style?: string;
  radius?: number;
  markers?: [number, number, number, number][];
  snapshots?: GhostSnapshotGeo[];
  variable?: string;
  chart?: "line" | "bar" | "pie";
  window?: number;
  samples?: [number, number | null][];
}

export interface Snapshot {
  type: "snapshot";
  frame: number;
  time: number;
  camera: { position: [number, number, number] };
  objects: SnapshotObject[];
  effects: Record<string, EffectGeo>;
  variables: Record<string, number | null>;
}

export type ServerMessage = Ack | ErrorMsg | TrackerUpdate | MetricsReport | Snapshot;

export interface FrameCloud {
  frame: number;
  count: number;
  positions: Float32Array; // xyz per point
  colors: Uint8Array; // rgb per point
}

const FCLD_MAGIC = 0x46434c44; // "FCLD" big-endian read of the 4 magic bytes

export function decodeFrameCloud(data: ArrayBuffer): FrameCloud {
  const view = new DataView(data);
  if (view.getUint32(0, false) !== FCLD_MAGIC) {
    throw new Error("bad FrameCloud magic");
  }
  const frame = view.getUint32(4, true);
  const count = view.getUint32(8, true);
  const positions = new Float32Array(count * 3);
  const colors = new Uint8Array(count * 3);
  let off = 12;
  for (let i = 0; i < count; i++) {
    positions[i * 3] = view.getFloat32(off, true);
    positions[i * 3 + 1] = view.getFloat32(off + 4, true);
    positions[i * 3 + 2] = view.getFloat32(off + 8, true);
    colors[i * 3] = view.getUint8(off + 12);
    colors[i * 3 + 1] = view.getUint8(off + 13);
    colors[i * 3 + 2] = view.getUint8(off + 14);
    off += 15;
  }
  return { frame, count, positions, colors };
}

/** Ghost point sets ride inside snapshots as base64 of the same 15-byte records. */
export function unpackGhostPoints(b64: string): { positions: Float32Array; colors: Uint8Array } {
  const binary = typeof atob === "function"
    ? Uint8Array.from(atob(b64), (c) => c.charCodeAt(0))
    : new Uint8Array(Buffer.from(b64, "base64"));
  const count = Math.floor(binary.byteLength / 15);
  const view = new DataView(binary.buffer, binary.byteOffset, binary.byteLength);
  const positions = new Float32Array(count * 3);
  const colors = new Uint8Array(count * 3);
  for (let i = 0; i < count; i++) {
    const off = i * 15;
    positions[i * 3] = view.getFloat32(off, true);
    positions[i * 3 + 1] = view.getFloat32(off + 4, true);
    positions[i * 3 + 2] = view.getFloat32(off + 8, true);
    colors[i * 3] = view.getUint8(off + 12);
    colors[i * 3 + 1] = view.getUint8(off + 13);
    colors[i * 3 + 2] = view.getUint8(off + 14);
  }
  return { positions, colors };
}

/** The slice of the WebSocket API the client needs (browser and `ws` both fit). */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  addEventListener(type: "message", handler: (ev: { data: unknown }) => void): void;
  addEventListener(type: "close" | "open" | "error", handler: () => void): void;
}

export interface ClientEvents {
  onSnapshot?: (snap: Snapshot) => void;
  onCloud?: (cloud: FrameCloud) => void;
  onTracker?: (info: TrackerInfo) => void;
  onMetrics?: (report: MetricsReport) => void;
  onClose?: () => void;
}

interface Pending {
  resolve: (msg: Ack | ErrorMsg) => void;
}

/**
 * Sequenced command client: every command resolves with its own ack/error.
 * All session truth stays server-side; this class only routes messages.
 */
export class SessionClient {
  private seq = 0;
  private pending = new Map<number, Pending>();

  constructor(private socket: SocketLike, private events: ClientEvents = {}) {
    socket.addEventListener("message", (ev) => this.onMessage(ev.data));
    socket.addEventListener("close", () => {
      this.events.onClose?.();
      this.pending.clear();
    });
  }

  private onMessage(data: unknown): void {
    if (typeof data === "string") {
      this.onText(data);
      return;
    }
    if (data instanceof ArrayBuffer) {
      this.events.onCloud?.(decodeFrameCloud(data));
      return;
    }
    // Node's ws delivers Buffer objects
    const buf = data as { buffer: ArrayBuffer; byteOffset: number; byteLength: number };
    if (buf && buf.buffer instanceof ArrayBuffer) {
      const copy = buf.buffer.slice(buf.byteOffset, buf.byteOffset + buf.byteLength);
      this.events.onCloud?.(decodeFrameCloud(copy));
    }
  }

  private onText(text: string): void {
    const msg = JSON.parse(text) as ServerMessage;
    switch (msg.type) {
      case "ack":
      case "error": {
        const waiter = this.pending.get(msg.seq);
        if (waiter) {
          this.pending.delete(msg.seq);
          waiter.resolve(msg);
        }
        break;
      }
      case "snapshot":
        this.events.onSnapshot?.(msg);
        break;
      case "tracker_update":
        this.events.onTracker?.(msg.tracker);
        break;
      case "metrics":
        this.events.onMetrics?.(msg);
        break;
    }
  }

  command(cmd: string, fields: Record<string, unknown> = {}): Promise<Ack | ErrorMsg> {
    const seq = ++this.seq;
    const payload = JSON.stringify({ cmd, seq, ...fields });
    return new Promise((resolve) => {
      this.pending.set(seq, { resolve });
      this.socket.send(payload);
    });
  }

  hello(role: "author" | "viewer" = "author"): Promise<Ack | ErrorMsg> {
    return this.command("hello", { protover: PROTOCOL_VERSION, role });
  }

  play() {
    return this.command("play");
  }

  pause() {
    return this.command("pause");
  }

  seek(frame: number) {
    return this.command("seek", { frame });
  }

  selectAt(u: number, v: number, mode: SelectionMode, keypoint?: number) {
    const fields: Record<string, unknown> = { u, v, mode };
    if (keypoint !== undefined) fields.keypoint = keypoint;
    return this.command("select_at", fields);
  }

  createParam(kind: string, operands: string[], name?: string) {
    const fields: Record<string, unknown> = { kind, operands };
    if (name) fields.name = name;
    return this.command("create_param", fields);
  }

  attachObject(object: Record<string, unknown>, tracker?: string,
               offset?: [number, number, number]) {
    const fields: Record<string, unknown> = { object };
    if (tracker) fields.tracker = tracker;
    if (offset) fields.offset = offset;
    return this.command("attach_object", fields);
  }

  setTemplate(object: string, src: string) {
    return this.command("set_template", { object, src });
  }

  setPropertyBinding(object: string, property: string, expr: string, a = 1, b = 0) {
    return this.command("set_property_binding", { object, property, expr, a, b });
  }

  addEffect(effect: Record<string, unknown>) {
    return this.command("add_effect", { effect });
  }

  removeEntity(id: string) {
    return this.command("remove_entity", { id });
  }

  queryMetrics(tracker: string) {
    return this.command("query_metrics", { tracker });
  }

  close(): void {
    this.socket.close();
  }
}

export function isError(msg: Ack | ErrorMsg): msg is ErrorMsg {
  return msg.type === "error";
}
