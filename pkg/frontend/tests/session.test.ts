import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { Meta } from "../src/api.js";
import { TunerSession, ViewRequest, loadSession } from "../src/session.js";

// Mirrors the backend's /api/meta payload shape.
const META: Meta = {
  width: 480, height: 360, events: 1000, t0: 0, duration_us: 2_000_000,
  default_hz: 30, hz: 30, warmup: 5, frame_count: 55,
  methods: ["histogram", "global_li", "lads_er", "lads_log", "lads_fft"],
  parameters: [
    { name: "method", type: "enum", default: "global_li",
      choices: ["histogram", "global_li", "lads_er", "lads_log", "lads_fft"],
      methods: ["histogram", "global_li", "lads_er", "lads_log", "lads_fft"] },
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
    "fes-240": { tau: 0.05, lambda0: 16, log_tau: 12.5, a: 0.25, r: 0.05, T_d: 0.5 },
    "blink-30": { tau: 0.2, lambda0: 2, log_tau: 7.5, a: 0.75, r: 0.01, T_d: 0.9 },
  },
};

function makeSession(initial = {}) {
  const requests: ViewRequest[] = [];
  const session = new TunerSession(META, (r) => requests.push(r), "", 150, initial);
  return { session, requests };
}

const frameFetches = (rs: ViewRequest[]) =>
  rs.filter((r) => r.kind === "frame" && r.panel === "main");

describe("session loading", () => {
  it("populates schema, defaults, and frame count", async () => {
    const fetchMeta = vi.fn(async () => META);
    const session = await loadSession("", () => {}, {}, fetchMeta);
    expect(fetchMeta).toHaveBeenCalledOnce();
    expect(session.params.tau).toBe(0.05);
    expect(session.maxFrame()).toBe(54); // scrubber max = frame count - 1
  });

  it("surfaces a connection error instead of crashing", async () => {
    const fetchMeta = vi.fn(async () => { throw new Error("unreachable"); });
    await expect(loadSession("", () => {}, {}, fetchMeta)).rejects.toThrow("unreachable");
  });

  it("clamps schema-violating initial params into range", () => {
    const { session } = makeSession({ tau: 99999, r: -3, patch_divisor: 7.6 });
    expect(session.params.tau).toBe(50);
    expect(session.params.r).toBe(0);
    expect(session.params.patch_divisor).toBe(8);
  });
});

describe("preset application", () => {
  it("fes-30 shows the published parameter set", () => {
    const { session } = makeSession();
    session.applyPreset("fes-30");
    expect(session.params.tau).toBe(0.05);
    expect(session.params.lambda0).toBe(16);
    expect(session.params.a).toBe(0.25);
    expect(session.params.r).toBe(0.25);
    expect(session.params.T_d).toBe(0.5);
    expect(session.params.hz).toBe(30);
  });

  it("uses the sigmoid-scale tau for the LoG method", () => {
    const { session } = makeSession();
    session.setMethod("lads_log");
    session.applyPreset("fes-30");
    expect(session.params.tau).toBe(12.5);
  });

  it("swaps both panels atomically", () => {
    const { session } = makeSession();
    session.setCompare(true);
    session.applyPreset("blink-30");
    const main = session.frameUrlFor("main");
    const cmp = session.frameUrlFor("compare");
    expect(main).toContain("tau=0.2");
    expect(cmp).toContain("method=global_li");
    expect(cmp).toContain("tau=0.2");
  });
});

describe("parameter updates", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("two rapid slider moves issue exactly one frame fetch after debounce", () => {
    const { session, requests } = makeSession();
    requests.length = 0;
    session.setParam("tau", 0.07);
    vi.advanceTimersByTime(60);
    session.setParam("tau", 0.09);
    expect(frameFetches(requests)).toHaveLength(0);
    vi.advanceTimersByTime(150);
    const frames = frameFetches(requests);
    expect(frames).toHaveLength(1);
    expect(frames[0].url).toContain("tau=0.09");
  });

  it("clamps values into schema range", () => {
    const { session } = makeSession();
    session.setParam("r", 4.2);
    expect(session.params.r).toBe(1);
  });

  it("undo restores the exact previous parameter vector", () => {
    const { session } = makeSession();
    session.applyPreset("fes-30");
    const before = { ...session.params };
    session.setParam("tau", 0.3);
    session.setParam("lambda0", 2);
    session.undo();
    session.undo();
    expect(session.params).toEqual(before);
    expect(session.preset).toBe("fes-30");
  });

  it("a server rejection rolls the vector back", () => {
    const { session } = makeSession();
    const before = { ...session.params };
    session.setParam("tau", 0.4);
    vi.advanceTimersByTime(150);
    session.handleRejected();
    expect(session.params).toEqual(before);
  });

  it("histogram hides every decay slider", () => {
    const { session } = makeSession();
    session.setMethod("histogram");
    expect(session.visibleParams()).toEqual([]);
    session.setMethod("lads_fft");
    const names = session.visibleParams().map((p) => p.name);
    expect(names).toEqual(["r", "T_d", "patch_divisor"]);
  });
});

describe("scrubbing and panels", () => {
  it("scrubbing updates both panels to the same k and prefetches neighbours", () => {
    const { session, requests } = makeSession();
    session.setCompare(true);
    requests.length = 0;
    session.scrub(10);
    const frames = requests.filter((r) => r.kind === "frame");
    expect(frames.map((r) => r.panel).sort()).toEqual(["compare", "main"]);
    for (const f of frames) expect(f.url).toContain("k=10");
    const prefetch = requests.filter((r) => r.kind === "prefetch");
    expect(prefetch.map((r) => r.url.match(/k=(\d+)/)![1]).sort()).toEqual(["11", "9"]);
  });

  it("scrub clamps to the frame range", () => {
    const { session } = makeSession();
    session.scrub(9999);
    expect(session.k).toBe(54);
    session.scrub(-5);
    expect(session.k).toBe(0);
  });

  it("stale responses are rejected by token", () => {
    const { session, requests } = makeSession();
    requests.length = 0;
    session.refresh();
    const first = requests[0].token;
    session.refresh();
    const second = requests.filter((r) => r.kind === "frame").at(-1)!.token;
    expect(session.acceptResponse("main", first)).toBe(false);
    expect(session.acceptResponse("main", second)).toBe(true);
  });

  it("compare panel mirrors tau at matching rank when a preset is active", () => {
    const { session } = makeSession();
    session.setMethod("lads_log");
    session.applyPreset("fes-30"); // main tau becomes 12.5 (LoG units)
    session.setCompare(true);
    expect(session.frameUrlFor("main")).toContain("tau=12.5");
    expect(session.frameUrlFor("compare")).toContain("tau=0.05");
  });

  it("frame url is exactly the direct API query for the same parameters", () => {
    const { session } = makeSession();
    session.applyPreset("fes-30");
    session.scrub(3);
    expect(session.frameUrlFor("main")).toBe(
      "/api/frame?k=3&method=global_li&tau=0.05&lambda0=16&a=0.25&r=0.25&T_d=0.5&patch_divisor=8&hz=30");
  });
});
