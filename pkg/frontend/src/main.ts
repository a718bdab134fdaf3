/** Bootstrap: connect to the session service and wire viewer + panels. */

import { SessionClient, isError, unpackGhostPoints } from "./protocol.js";
import { SnapshotStore } from "./store.js";
import { CloudViewer } from "./viewer.js";
import { AuthoringUI } from "./ui.js";
import type { Intrinsics } from "./pick.js";

function serverUrl(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("server") ?? "ws://127.0.0.1:8765";
}

function intrinsicsFromQuery(): Intrinsics {
  // the capture intrinsics the service resolves against; override per clip
  const params = new URLSearchParams(window.location.search);
  const num = (key: string, fallback: number) =>
    params.has(key) ? Number(params.get(key)) : fallback;
  return {
    fx: num("fx", 500), fy: num("fy", 500),
    cx: num("cx", 320), cy: num("cy", 288),
    width: num("w", 640), height: num("h", 576),
  };
}

async function start(): Promise<void> {
  const canvas = document.getElementById("cloud") as HTMLCanvasElement;
  const overlayRoot = document.getElementById("overlays") as HTMLElement;
  const panelRoot = document.getElementById("panels") as HTMLElement;
  const status = document.getElementById("status") as HTMLElement;

  const store = new SnapshotStore();
  const viewer = new CloudViewer(canvas, overlayRoot);
  viewer.intrinsics = intrinsicsFromQuery();

  const socket = new WebSocket(serverUrl());
  socket.binaryType = "arraybuffer";
  const client = new SessionClient(socket as unknown as never, {
    onSnapshot: (snap) => {
      store.applySnapshot(snap);
      viewer.setSnapshot(snap);
    },
    onCloud: (cloud) => {
      store.applyCloud(cloud);
      viewer.setCloud(cloud);
    },
    onTracker: (info) => store.announceTracker(info),
    onClose: () => (status.textContent = "disconnected"),
  });
  new AuthoringUI(panelRoot, client, store, viewer);

  socket.addEventListener("open", async () => {
    const reply = await client.hello("author");
    if (isError(reply)) {
      status.textContent = `hello failed — ${reply.code}: ${reply.detail}`;
      return;
    }
    const frames = reply.result?.frames;
    if (typeof frames === "number") store.setClipLength(frames);
    const background = reply.result?.background as { points_b64?: string } | undefined;
    if (background?.points_b64) {
      const { positions, colors } = unpackGhostPoints(background.points_b64);
      viewer.setBackground(positions, colors);
    }
    status.textContent = `connected (${String(reply.result?.role)})`;
  });
}

window.addEventListener("DOMContentLoaded", () => {
  void start();
});
