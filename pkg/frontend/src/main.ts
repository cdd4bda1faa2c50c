// DOM wiring: sliders from the server schema, frame scrubber, single /
// side-by-side panels. Panels are <img> elements whose src is the exact API
// URL, so what is displayed is byte-identical to a direct GET.

import { ParamSpec } from "./api.js";
import { Panel, TunerSession, ViewRequest, loadSession } from "./session.js";

const $ = (id: string) => document.getElementById(id) as HTMLElement;

function panelImg(panel: Panel, kind: "frame" | "heatmap"): HTMLImageElement {
  return $(`${panel}-${kind}`) as HTMLImageElement;
}

function makeSink(session: () => TunerSession | null): (req: ViewRequest) => void {
  return (req) => {
    const s = session();
    if (!s) return;
    if (req.kind === "prefetch") {
      const img = new Image();
      img.src = req.url;
      return;
    }
    const el = panelImg(req.panel, req.kind);
    el.onload = () => { /* token checked implicitly: the browser shows the last src set */ };
    el.onerror = () => {
      if (s.acceptResponse(req.panel, req.token)) {
        s.handleRejected();
        showError("server rejected parameters; restored previous values");
      }
    };
    el.src = req.url;
  };
}

function showError(message: string | null): void {
  const box = $("error");
  box.textContent = message ?? "";
  box.style.display = message ? "block" : "none";
}

function sliderRow(spec: ParamSpec, value: number,
                   onInput: (v: number) => void): HTMLElement {
  const row = document.createElement("label");
  row.className = "param-row";
  const name = document.createElement("span");
  name.className = "param-name";
  name.textContent = spec.name;
  const slider = document.createElement("input");
  slider.type = "range";
  slider.min = String(spec.min ?? 0);
  slider.max = String(spec.max ?? 1);
  slider.step = spec.type === "int" ? "1" : String(((spec.max ?? 1) - (spec.min ?? 0)) / 400);
  slider.value = String(value);
  const out = document.createElement("span");
  out.className = "param-value";
  out.textContent = String(value);
  slider.addEventListener("input", () => {
    const v = Number(slider.value);
    out.textContent = String(v);
    onInput(v);
  });
  row.append(name, slider, out);
  return row;
}

function renderControls(s: TunerSession): void {
  const methodSel = $("method") as HTMLSelectElement;
  methodSel.innerHTML = "";
  for (const m of s.meta.methods) {
    const opt = document.createElement("option");
    opt.value = m;
    opt.textContent = m;
    opt.selected = m === s.method;
    methodSel.append(opt);
  }

  const presetSel = $("preset") as HTMLSelectElement;
  presetSel.innerHTML = "<option value=''>custom</option>";
  for (const key of Object.keys(s.meta.presets)) {
    const opt = document.createElement("option");
    opt.value = key;
    opt.textContent = key;
    opt.selected = key === s.preset;
    presetSel.append(opt);
  }

  const box = $("params");
  box.innerHTML = "";
  for (const spec of s.visibleParams()) {
    box.append(sliderRow(spec, s.params[spec.name],
                         (v) => s.setParam(spec.name, v)));
  }

  const scrubber = $("scrubber") as HTMLInputElement;
  scrubber.max = String(s.maxFrame());
  scrubber.value = String(s.k);
  $("frame-label").textContent = `window ${s.k} / ${s.maxFrame()}`;
  ($("compare-pane") as HTMLElement).style.display = s.compare ? "flex" : "none";
}

async function boot(): Promise<void> {
  let session: TunerSession | null = null;
  const sink = makeSink(() => session);
  const initial: Record<string, number> = {};
  new URLSearchParams(location.search).forEach((raw, key) => {
    const v = Number(raw);
    if (Number.isFinite(v)) initial[key] = v;
  });
  try {
    session = await loadSession("", sink, initial);
  } catch (err) {
    showError(`server unreachable: ${err}`);
    return;
  }
  const s = session;
  showError(null);
  renderControls(s);
  s.refresh();

  ($("method") as HTMLSelectElement).addEventListener("change", (ev) => {
    s.setMethod((ev.target as HTMLSelectElement).value);
    renderControls(s);
  });
  ($("preset") as HTMLSelectElement).addEventListener("change", (ev) => {
    const key = (ev.target as HTMLSelectElement).value;
    if (key) s.applyPreset(key);
    renderControls(s);
  });
  ($("scrubber") as HTMLInputElement).addEventListener("input", (ev) => {
    s.scrub(Number((ev.target as HTMLInputElement).value));
    $("frame-label").textContent = `window ${s.k} / ${s.maxFrame()}`;
  });
  $("undo").addEventListener("click", () => {
    s.undo();
    renderControls(s);
  });
  ($("compare") as HTMLInputElement).addEventListener("change", (ev) => {
    s.setCompare((ev.target as HTMLInputElement).checked);
    renderControls(s);
  });
  ($("grid") as HTMLInputElement).addEventListener("change", (ev) => {
    s.showGrid = (ev.target as HTMLInputElement).checked;
    s.refresh();
  });
  ($("heatmap") as HTMLInputElement).addEventListener("change", (ev) => {
    s.showHeatmap = (ev.target as HTMLInputElement).checked;
    document.querySelectorAll<HTMLImageElement>(".heatmap-img").forEach(
      (el) => { el.style.display = s.showHeatmap ? "block" : "none"; });
    s.refresh();
  });
}

boot();
