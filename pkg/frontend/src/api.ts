// HTTP client for the tuner backend. Every pixel the UI shows is fetched
// from these endpoints; the frontend never computes representations itself.

export interface ParamSpec {
  name: string;
  type: "enum" | "float" | "int";
  min?: number;
  max?: number;
  default: number | string;
  choices?: string[];
  methods: string[];
}

export interface Meta {
  width: number;
  height: number;
  events: number;
  t0: number;
  duration_us: number;
  default_hz: number;
  hz: number;
  warmup: number;
  frame_count: number;
  methods: string[];
  parameters: ParamSpec[];
  presets: Record<string, Record<string, number>>;
}

export type ParamValues = Record<string, number>;

// Parameter names the frame/heatmap endpoints understand, in a fixed order
// so equal parameter sets always serialize to the identical query string.
const QUERY_ORDER = ["method", "tau", "lambda0", "a", "r", "T_d", "patch_divisor", "hz"];

/** Serialize a value so it round-trips exactly: String(n) is the shortest
 * decimal that parses back to the same float64. */
export function encodeParam(value: number | string): string {
  return String(value);
}

export function buildQuery(method: string, params: ParamValues, k: number,
                           extra: Record<string, string> = {}): string {
  const parts: string[] = [`k=${k}`];
  for (const name of QUERY_ORDER) {
    if (name === "method") {
      parts.push(`method=${encodeURIComponent(method)}`);
    } else if (params[name] !== undefined) {
      parts.push(`${name}=${encodeURIComponent(encodeParam(params[name]))}`);
    }
  }
  for (const [key, value] of Object.entries(extra)) {
    parts.push(`${key}=${encodeURIComponent(value)}`);
  }
  return parts.join("&");
}

export function frameUrl(base: string, method: string, params: ParamValues,
                         k: number): string {
  return `${base}/api/frame?${buildQuery(method, params, k)}`;
}

export function heatmapUrl(base: string, method: string, params: ParamValues,
                           k: number, grid: boolean): string {
  const extra: Record<string, string> = grid ? { grid: "1" } : {};
  return `${base}/api/heatmap?${buildQuery(method, params, k, extra)}`;
}

export async function fetchMeta(base: string, hz?: number): Promise<Meta> {
  const url = hz === undefined ? `${base}/api/meta` : `${base}/api/meta?hz=${hz}`;
  const res = await fetch(url);
  if (!res.ok) throw new Error(`meta request failed: ${res.status}`);
  return (await res.json()) as Meta;
}

export async function fetchDefaults(base: string, dataset: string,
                                    hz: number): Promise<Record<string, number>> {
  const res = await fetch(`${base}/api/params/defaults?dataset=${dataset}&hz=${hz}`);
  if (!res.ok) throw new Error(`defaults request failed: ${res.status}`);
  return (await res.json()) as Record<string, number>;
}
