// Tuner state: schema-clamped parameters, undo history, debounced refresh,
// compare-panel mirroring and request-token staleness. Pure logic, no DOM;
// the UI layer supplies a sink that turns view requests into <img> loads.

import { Meta, ParamSpec, ParamValues, frameUrl, heatmapUrl } from "./api.js";
import { DEBOUNCE_MS, Debounced, debounce } from "./debounce.js";

export type Panel = "main" | "compare";
export type Kind = "frame" | "heatmap" | "prefetch";

export interface ViewRequest {
  panel: Panel;
  kind: Kind;
  url: string;
  token: number;
}

export type RequestSink = (req: ViewRequest) => void;

interface Snapshot {
  method: string;
  params: ParamValues;
  preset: string | null;
}

const NUMERIC_PARAMS = ["tau", "lambda0", "a", "r", "T_d", "patch_divisor", "hz"];

export class TunerSession {
  readonly meta: Meta;
  readonly base: string;
  method: string;
  params: ParamValues;
  k = 0;
  compare = false;
  showHeatmap = true;
  showGrid = false;
  preset: string | null = null;
  error: string | null = null;

  private sink: RequestSink;
  private undoStack: Snapshot[] = [];
  private tokens: Record<Panel, number> = { main: 0, compare: 0 };
  private refreshDebounced: Debounced<[]>;

  constructor(meta: Meta, sink: RequestSink, base = "",
              debounceMs: number = DEBOUNCE_MS, initial: ParamValues = {}) {
    this.meta = meta;
    this.base = base;
    this.sink = sink;
    this.method = "global_li";
    this.params = {};
    for (const name of NUMERIC_PARAMS) {
      const spec = this.spec(name);
      const fallback = name === "hz" ? meta.default_hz : 0;
      this.params[name] = spec ? (spec.default as number) : fallback;
    }
    for (const [name, value] of Object.entries(initial)) {
      if (name in this.params) this.params[name] = this.clampValue(name, value);
    }
    this.refreshDebounced = debounce(() => this.refresh(), debounceMs);
  }

  spec(name: string): ParamSpec | undefined {
    return this.meta.parameters.find((p) => p.name === name);
  }

  clampValue(name: string, value: number): number {
    const spec = this.spec(name);
    let v = value;
    if (spec) {
      if (spec.min !== undefined && v < spec.min) v = spec.min;
      if (spec.max !== undefined && v > spec.max) v = spec.max;
      if (spec.type === "int") v = Math.round(v);
    }
    return v;
  }

  /** Numeric parameters relevant to the active method (drives slider visibility). */
  visibleParams(): ParamSpec[] {
    return this.meta.parameters.filter(
      (p) => p.type !== "enum" && p.name !== "hz" && p.methods.includes(this.method));
  }

  maxFrame(): number {
    return Math.max(0, this.meta.frame_count - 1);
  }

  private snapshot(): void {
    this.undoStack.push({
      method: this.method,
      params: { ...this.params },
      preset: this.preset,
    });
    if (this.undoStack.length > 200) this.undoStack.shift();
  }

  canUndo(): boolean {
    return this.undoStack.length > 0;
  }

  setParam(name: string, value: number): void {
    this.snapshot();
    this.preset = null;
    this.params[name] = this.clampValue(name, value);
    this.refreshDebounced();
  }

  setMethod(method: string): void {
    if (!this.meta.methods.includes(method)) return;
    this.snapshot();
    const preset = this.preset;
    this.method = method;
    if (preset !== null) {
      // Keep tau in the preset's units for the newly selected method.
      const p = this.meta.presets[preset];
      this.params.tau = method === "lads_log" ? p.log_tau : p.tau;
      this.preset = preset;
    }
    this.refresh();
  }

  /** Apply a named preset ("fes-30", "blink-240", ...) atomically. */
  applyPreset(key: string): void {
    const p = this.meta.presets[key];
    if (!p) return;
    this.snapshot();
    this.preset = key;
    this.params.tau = this.method === "lads_log" ? p.log_tau : p.tau;
    this.params.lambda0 = p.lambda0;
    this.params.a = p.a;
    this.params.r = p.r;
    this.params.T_d = p.T_d;
    const hz = Number(key.split("-")[1]);
    if (Number.isFinite(hz)) this.params.hz = this.clampValue("hz", hz);
    this.refresh();
  }

  undo(): void {
    const prev = this.undoStack.pop();
    if (!prev) return;
    this.refreshDebounced.cancel();
    this.method = prev.method;
    this.params = { ...prev.params };
    this.preset = prev.preset;
    this.refresh();
  }

  scrub(k: number): void {
    const clamped = Math.min(Math.max(0, Math.round(k)), this.maxFrame());
    this.k = clamped;
    this.refresh();
    for (const neighbour of [clamped - 1, clamped + 1]) {
      if (neighbour >= 0 && neighbour <= this.maxFrame()) {
        this.sink({ panel: "main", kind: "prefetch",
                    url: this.frameUrlAt(neighbour), token: this.tokens.main });
      }
    }
  }

  setCompare(on: boolean): void {
    this.compare = on;
    this.refresh();
  }

  /** Parameters the server should see for a panel's method. */
  panelParams(panel: Panel): { method: string; params: ParamValues } {
    if (panel === "compare") {
      const tau = this.preset !== null
        ? this.meta.presets[this.preset].tau
        : this.params.tau;
      return { method: "global_li", params: { ...this.params, tau } };
    }
    return { method: this.method, params: this.params };
  }

  frameUrlFor(panel: Panel): string {
    const { method, params } = this.panelParams(panel);
    return frameUrl(this.base, method, params, this.k);
  }

  private frameUrlAt(k: number): string {
    const { method, params } = this.panelParams("main");
    return frameUrl(this.base, method, params, k);
  }

  heatmapUrlFor(panel: Panel): string {
    const { method, params } = this.panelParams(panel);
    return heatmapUrl(this.base, method, params, this.k, this.showGrid);
  }

  /** Issue the (token-tagged) requests for every visible panel. */
  refresh(): void {
    const panels: Panel[] = this.compare ? ["main", "compare"] : ["main"];
    for (const panel of panels) {
      const token = ++this.tokens[panel];
      this.sink({ panel, kind: "frame", url: this.frameUrlFor(panel), token });
      if (this.showHeatmap) {
        this.sink({ panel, kind: "heatmap", url: this.heatmapUrlFor(panel), token });
      }
    }
  }

  /** True when the response for `token` is still current for the panel. */
  acceptResponse(panel: Panel, token: number): boolean {
    return token === this.tokens[panel];
  }

  /** Server rejected the parameters (400): roll back to the previous vector. */
  handleRejected(): void {
    this.undo();
  }

  flushPending(): void {
    this.refreshDebounced.flush();
  }

  pendingRefresh(): boolean {
    return this.refreshDebounced.pending();
  }
}

export async function loadSession(base: string, sink: RequestSink,
                                  initial: ParamValues = {},
                                  fetchMetaImpl?: (b: string) => Promise<Meta>,
                                  debounceMs: number = DEBOUNCE_MS): Promise<TunerSession> {
  const impl = fetchMetaImpl ?? (await import("./api.js")).fetchMeta;
  const meta = await impl(base);
  return new TunerSession(meta, sink, base, debounceMs, initial);
}
