/**
 * Authoring panels: selection modes, the effect palette (one action per
 * taxonomy category), template and property-binding editors with inline
 * server-reported errors (byte offsets included), tracker chips, the
 * transport bar. All mutations travel as protocol commands; nothing is
 * computed locally.
 */

import { isError, type Ack, type ErrorMsg, type SessionClient } from "./protocol.js";
import type { SnapshotStore } from "./store.js";
import type { CloudViewer } from "./viewer.js";

type Mode = "color" | "body" | "stationary" | null;

export class AuthoringUI {
  private mode: Mode = null;
  private objectCounter = 0;

  constructor(private root: HTMLElement, private client: SessionClient,
              private store: SnapshotStore, private viewer: CloudViewer) {
    this.build();
    store.subscribe(() => this.refresh());
    viewer.onPick = (hit) => {
      if (!this.mode) return;
      const keypoint = this.mode === "body"
        ? Number((this.root.querySelector("#keypoint") as HTMLInputElement).value)
        : undefined;
      void this.run(this.client.selectAt(hit.u, hit.v, this.mode, keypoint));
      this.setMode(null);
    };
  }

  private build(): void {
    this.root.innerHTML = `
      <div class="panel" id="selection">
        <h3>Select &amp; track</h3>
        <button data-mode="color">Click object</button>
        <button data-mode="body">Body point</button>
        <input id="keypoint" type="number" value="0" min="0" max="32" title="keypoint index">
        <button data-mode="stationary">Stationary</button>
        <div id="chips"></div>
      </div>
      <div class="panel" id="palette">
        <h3>Attach</h3>
        <select id="attach-tracker"></select>
        <button id="add-label">Text label</button>
        <select id="hl-shape">
          <option>sphere</option><option>box</option><option>cylinder</option>
          <option>circle2d</option><option>rect2d</option>
        </select>
        <button id="add-highlight">Highlight</button>
        <input id="visual-url" placeholder="https://… or graph:id" size="18">
        <button id="add-visual">Embedded visual</button>
        <select id="link-b"></select>
        <button id="add-link">Connected link</button>
        <button id="add-trail">Trajectory</button>
        <button id="add-ghost">Ghost</button>
        <input id="graph-var" placeholder="variable" size="10">
        <select id="graph-chart"><option>line</option><option>bar</option><option>pie</option></select>
        <button id="add-graph">Graph</button>
      </div>
      <div class="panel" id="parameters">
        <h3>Parameters</h3>
        <select id="param-kind">
          <option>distance</option><option>angle</option><option>area3</option>
          <option>area4</option><option>speed</option><option>position</option>
        </select>
        <input id="param-operands" placeholder="obj_1, anchor_1" size="18">
        <button id="add-param">Create</button>
        <div id="param-error" class="error"></div>
      </div>
      <div class="panel" id="template">
        <h3>Label template</h3>
        <select id="template-target"></select>
        <input id="template-src" placeholder="speed \${obj_1.speed} m/s" size="26">
        <button id="apply-template">Apply</button>
        <div id="template-error" class="error"></div>
      </div>
      <div class="panel" id="binding">
        <h3>Property binding</h3>
        <select id="binding-target"></select>
        <select id="binding-prop">
          <option>scale</option><option>rotation</option><option>position-offset</option>
          <option>opacity</option><option>color-intensity</option>
        </select>
        <input id="binding-expr" placeholder="distance_1" size="14">
        a <input id="binding-a" type="number" value="1" step="0.1" size="4">
        b <input id="binding-b" type="number" value="0" step="0.1" size="4">
        <button id="apply-binding">Bind</button>
        <div id="binding-error" class="error"></div>
      </div>
      <div class="panel" id="transport">
        <button id="play">Play</button>
        <button id="pause">Pause</button>
        <input id="scrub" type="range" min="0" max="0" value="0">
        <span id="frame-readout">frame –</span>
      </div>`;
    for (const button of this.root.querySelectorAll<HTMLButtonElement>("[data-mode]")) {
      button.addEventListener("click", () => this.setMode(button.dataset.mode as Mode));
    }
    this.on("#add-label", () => this.attach("text", {}));
    this.on("#add-highlight", () => this.attach("highlight", {
      shape: this.value("#hl-shape"),
    }));
    this.on("#add-visual", () => this.attach("visual", {
      source: this.value("#visual-url") || "https://example.net",
    }));
    this.on("#add-link", () => {
      const a = this.value("#attach-tracker");
      const b = this.value("#link-b");
      void this.run(this.client.attachObject({
        kind: "link", id: this.freshId("link"), a: { tracker: a }, b: { tracker: b },
      }));
    });
    this.on("#add-trail", () => this.run(this.client.addEffect({
      kind: "trajectory", id: this.freshId("traj"), tracker: this.value("#attach-tracker"),
    })));
    this.on("#add-ghost", () => this.run(this.client.addEffect({
      kind: "ghost", id: this.freshId("ghost"), tracker: this.value("#attach-tracker"),
    })));
    this.on("#add-graph", () => this.run(this.client.addEffect({
      kind: "graph", id: this.freshId("graph"), variable: this.value("#graph-var"),
      chart: this.value("#graph-chart"),
    })));
    this.on("#add-param", () => {
      const operands = this.value("#param-operands").split(",").map((s) => s.trim())
        .filter(Boolean);
      void this.runInto(this.client.createParam(this.value("#param-kind"), operands),
        "#param-error");
    });
    this.on("#apply-template", () => this.runInto(
      this.client.setTemplate(this.value("#template-target"), this.value("#template-src")),
      "#template-error"));
    this.on("#apply-binding", () => this.runInto(
      this.client.setPropertyBinding(
        this.value("#binding-target"), this.value("#binding-prop"),
        this.value("#binding-expr"),
        Number(this.value("#binding-a")), Number(this.value("#binding-b"))),
      "#binding-error"));
    this.on("#play", () => this.run(this.client.play()));
    this.on("#pause", () => this.run(this.client.pause()));
    const scrub = this.root.querySelector("#scrub") as HTMLInputElement;
    scrub.addEventListener("change", () => this.run(this.client.seek(Number(scrub.value))));
  }

  private setMode(mode: Mode): void {
    this.mode = mode;
    this.viewer.pickEnabled = mode !== null;
    for (const button of this.root.querySelectorAll<HTMLButtonElement>("[data-mode]")) {
      button.classList.toggle("active", button.dataset.mode === mode);
    }
  }

  private attach(kind: string, extra: Record<string, unknown>): void {
    const tracker = this.value("#attach-tracker");
    if (!tracker) return;
    const id = this.freshId(kind);
    void this.run(this.client.attachObject({ kind, id, ...extra }, tracker)).then((reply) => {
      if (kind === "text" && !isError(reply)) {
        (this.root.querySelector("#template-target") as HTMLSelectElement).value = id;
      }
    });
  }

  private freshId(prefix: string): string {
    this.objectCounter += 1;
    return `${prefix}_u${this.objectCounter}`;
  }

  private refresh(): void {
    const chips = this.root.querySelector("#chips") as HTMLElement;
    const names = this.store.trackerNames();
    chips.innerHTML = names.map((n) => {
      const info = this.store.state.trackers.get(n);
      const lost = info && !info.valid ? " lost" : "";
      return `<span class="chip${lost}">${n}</span>`;
    }).join(" ");
    this.fillSelect("#attach-tracker", names);
    this.fillSelect("#link-b", names);
    const objectIds = (this.store.state.snapshot?.objects ?? []).map((o) => o.id);
    this.fillSelect("#template-target",
      (this.store.state.snapshot?.objects ?? []).filter((o) => o.kind === "text").map((o) => o.id));
    this.fillSelect("#binding-target", objectIds);
    const frame = this.store.frame;
    const readout = this.root.querySelector("#frame-readout") as HTMLElement;
    readout.textContent = frame === null ? "frame –" : `frame ${frame}`;
    const scrub = this.root.querySelector("#scrub") as HTMLInputElement;
    if (this.store.state.frames !== null) scrub.max = String(this.store.state.frames - 1);
    if (frame !== null && document.activeElement !== scrub) scrub.value = String(frame);
  }

  private fillSelect(selector: string, options: string[]): void {
    const el = this.root.querySelector(selector) as HTMLSelectElement;
    const current = el.value;
    if (options.join("\n") === el.dataset.options) return;
    el.dataset.options = options.join("\n");
    el.innerHTML = options.map((o) => `<option>${o}</option>`).join("");
    if (options.includes(current)) el.value = current;
  }

  private value(selector: string): string {
    return (this.root.querySelector(selector) as HTMLInputElement | HTMLSelectElement).value;
  }

  private on(selector: string, handler: () => void): void {
    (this.root.querySelector(selector) as HTMLElement).addEventListener("click", handler);
  }

  private async run(promise: Promise<Ack | ErrorMsg>): Promise<Ack | ErrorMsg> {
    const reply = await promise;
    if (isError(reply)) this.toast(formatError(reply));
    return reply;
  }

  private async runInto(promise: Promise<Ack | ErrorMsg>, selector: string): Promise<void> {
    const el = this.root.querySelector(selector) as HTMLElement;
    const reply = await promise;
    el.textContent = isError(reply) ? formatError(reply) : "";
  }

  private toast(message: string): void {
    const el = document.createElement("div");
    el.className = "toast";
    el.textContent = message;
    document.body.appendChild(el);
    setTimeout(() => el.remove(), 4000);
  }
}

export function formatError(err: ErrorMsg): string {
  const at = err.offset !== undefined ? ` (at byte ${err.offset})` : "";
  return `${err.code}: ${err.detail}${at}`;
}
