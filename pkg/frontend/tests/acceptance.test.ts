// Secondary acceptance: preset display round-trip, single debounced fetch,
// and URL identity with a direct API request.

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { frameUrl } from "../src/api.js";
import { TunerSession, ViewRequest, loadSession } from "../src/session.js";
import { Meta } from "../src/api.js";

// Exactly what the backend serves from /api/meta (values mirror its presets).
const META: Meta = {
  width: 480, height: 360, events: 1000, t0: 0, duration_us: 2_000_000,
  default_hz: 30, hz: 30, warmup: 5, frame_count: 55,
  methods: ["histogram", "global_li", "lads_er", "lads_log", "lads_fft"],
  parameters: [
    { name: "tau", type: "float", min: 1e-4, max: 50, default: 0.05,
      methods: ["global_li", "lads_er", "lads_log"] },
    { name: "lambda0", type: "float", min: 0.01, max: 1000, default: 16,
      methods: ["lads_er"] },
    { name: "a", type: "float", min: 0.01, max: 10, default: 0.25,
      methods: ["lads_log"] },
    { name: "r", type: "float", min: 0, max: 1, default: 0.25,
      methods: ["lads_fft"] },
    { name: "T_d", type: "float", min: 0, max: 1, default: 0.5,
      methods: ["lads_fft"] },
    { name: "patch_divisor", type: "int", min: 1, max: 64, default: 8,
      methods: ["lads_er", "lads_log", "lads_fft"] },
    { name: "hz", type: "float", min: 1, max: 1000, default: 30,
      methods: ["histogram", "global_li", "lads_er", "lads_log", "lads_fft"] },
  ],
  presets: {
    "fes-30": { tau: 0.05, lambda0: 16, log_tau: 12.5, a: 0.25, r: 0.25, T_d: 0.5 },
  },
};

describe("tuner round-trip acceptance", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("loading the FES-30 preset displays the published values", async () => {
    const session = await loadSession("", () => {}, {}, async () => META);
    session.applyPreset("fes-30");
    expect(session.params.tau).toBe(0.05);
    expect(session.params.lambda0).toBe(16);
    expect(session.params.a).toBe(0.25);
    expect(session.params.r).toBe(0.25);
    expect(session.params.T_d).toBe(0.5);
  });

  it("changing tau triggers exactly one frame fetch after the debounce", () => {
    const requests: ViewRequest[] = [];
    const session = new TunerSession(META, (r) => requests.push(r), "", 150);
    session.showHeatmap = false;
    requests.length = 0;
    session.setParam("tau", 0.06);
    session.setParam("tau", 0.08);
    session.setParam("tau", 0.1);
    expect(requests).toHaveLength(0);
    vi.advanceTimersByTime(149);
    expect(requests).toHaveLength(0);
    vi.advanceTimersByTime(1);
    const frames = requests.filter((r) => r.kind === "frame");
    expect(frames).toHaveLength(1);
    expect(frames[0].url).toContain("tau=0.1");
  });

  it("the displayed image URL is the direct API query for the same parameters", () => {
    const session = new TunerSession(META, () => {}, "", 150);
    session.applyPreset("fes-30");
    session.scrub(7);
    const shown = session.frameUrlFor("main");
    const direct = frameUrl("", session.method, session.params, session.k);
    // The panel's <img src> IS this URL, so the bytes shown are the bytes a
    // direct GET returns; equality of the query is the whole guarantee.
    expect(shown).toBe(direct);
    expect(shown).toBe(
      "/api/frame?k=7&method=global_li&tau=0.05&lambda0=16&a=0.25&r=0.25&T_d=0.5&patch_divisor=8&hz=30");
  });
});
