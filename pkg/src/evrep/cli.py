"""Command-line entry point.

Subcommands: convert (stream -> tensor), render (stream -> PNGs), filter
(annotation cleaning), bench (construction timings), metrics (detection /
landmark scoring), serve (HTTP API for the tuner).

Exit codes: 0 ok, 1 usage, 2 I/O, 3 validation/config.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import render
from .annotations import (AnnotationError, read_annotations_csv,
                          read_annotations_jsonl, validate_annotations,
                          write_exclusions_csv, write_report_json)
from .events import (SensorGeometry, StreamFormatError, StreamValidationError,
                     read_event_array, window_stream)
from .metrics import Detection, LandmarkPrediction, dataset_nme, map50
from .surfaces import (METHODS, PRESETS, ConfigError, RepresentationConfig,
                       build_representation, clip_normalize, warm_up)
from .synth import bench_scene

DEFAULT_GEOMETRY = (480, 360)
DEFAULT_WARMUP = 5


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage()}")


def _add_stream_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", help="event stream file")
    p.add_argument("--format", choices=("csv", "packed_binary"), default="csv")
    p.add_argument("--polarity01", action="store_true",
                   help="on-disk polarity is {0,1} instead of {-1,1}")
    p.add_argument("--width", type=int, default=DEFAULT_GEOMETRY[0])
    p.add_argument("--height", type=int, default=DEFAULT_GEOMETRY[1])
    p.add_argument("--hz", type=float, default=30.0, help="window frequency")
    p.add_argument("--t0", type=int, default=None,
                   help="window origin in us (default: first event)")
    p.add_argument("--warmup", type=int, default=DEFAULT_WARMUP)


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", choices=METHODS, default=None)
    p.add_argument("--preset", choices=("fes", "blink"), default=None,
                   help="parameter preset (needs --hz 30 or 240)")
    p.add_argument("--config", default=None, help="key=value parameter file")
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--lambda0", type=float, default=None)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--td", type=float, default=None, dest="t_d")
    p.add_argument("--patch-divisor", type=int, default=None)
    p.add_argument("--er-ratio-mode", choices=("prose", "printed"), default=None)
    p.add_argument("--fft-invert", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--fft-recursive", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--clip", type=float, default=None)


_CONFIG_KEYS = {f.name: f.type for f in dataclasses.fields(RepresentationConfig)}


def _parse_config_file(path) -> dict:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key == "T_d":
                key = "t_d"
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown parameter {key!r}")
            out[key] = value
    return out


def _coerce(key: str, value):
    if isinstance(value, str):
        if key in ("method", "er_ratio_mode"):
            return value
        if key in ("fft_invert", "fft_recursive"):
            return value.lower() in ("1", "true", "yes", "on")
        if key in ("patch_divisor",):
            return int(value)
        return float(value)
    return value


def resolve_config(args) -> RepresentationConfig:
    """defaults < preset < config file < explicit flags."""
    values: dict = {}
    if args.preset is not None:
        hz = int(args.hz)
        if (args.preset, hz) not in PRESETS:
            raise ConfigError(f"no {args.preset!r} preset at {hz} Hz "
                              f"(available: {sorted(set(k[1] for k in PRESETS))})")
        p = PRESETS[(args.preset, hz)]
        method = args.method or "global_li"
        values.update(tau=p["log_tau"] if method == "lads_log" else p["tau"],
                      lambda0=p["lambda0"], a=p["a"], r=p["r"], t_d=p["T_d"])
    if args.config is not None:
        for key, raw in _parse_config_file(args.config).items():
            values[key] = _coerce(key, raw)
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    if args.method is not None:
        values["method"] = args.method
    return RepresentationConfig(**values).validate()


def _load_stream(args):
    geometry = SensorGeometry(args.width, args.height)
    file_geom, arrays = read_event_array(args.input, args.format,
                                         geometry=geometry if args.format == "csv" else None,
                                         polarity01=args.polarity01)
    if file_geom is not None:
        geometry = file_geom
    t0 = args.t0 if args.t0 is not None else (int(arrays.ts[0]) if len(arrays) else 0)
    return geometry, arrays, t0


def _write_manifest(outdir: Path, command: str, args, config: RepresentationConfig | None,
                    geometry: SensorGeometry | None, extra: dict | None = None) -> None:
    manifest = {
        "command": command,
        "input": getattr(args, "input", None),
        "output_dir": str(outdir),
    }
    if geometry is not None:
        manifest["geometry"] = [geometry.width, geometry.height]
    for key in ("format", "hz", "t0", "warmup", "frames", "seed"):
        if hasattr(args, key):
            manifest[key] = getattr(args, key)
    if config is not None:
        manifest["config"] = dataclasses.asdict(config)
    if extra:
        manifest.update(extra)
    with open(outdir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def load_manifest_config(path) -> RepresentationConfig:
    with open(path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    return RepresentationConfig(**manifest["config"]).validate()


def _pipeline_frames(geometry, arrays, t0, hz, warmup, config, limit=None):
    """Yield (k, normalized float32 surface, decay map) post warm-up."""
    windows = list(window_stream(arrays, hz, t0))
    if len(windows) < warmup:
        raise StreamValidationError(
            f"stream yields {len(windows)} windows, warm-up needs {warmup}")
    state, prev = warm_up(iter(windows[:warmup]), warmup, config, geometry=geometry)
    emitted = 0
    for window in windows[warmup:]:
        if limit is not None and emitted >= limit:
            break
        state, dmap, _ = build_representation(state, window, prev, config)
        prev = window
        yield emitted, clip_normalize(state.values, config.clip), dmap
        emitted += 1


def cmd_convert(args) -> int:
    config = resolve_config(args)
    geometry, arrays, t0 = _load_stream(args)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    frames = _pipeline_frames(geometry, arrays, t0, args.hz, args.warmup, config, args.frames)
    if args.png:
        collected = []

        def tee():
            for k, norm, dmap in frames:
                render.save_png(render.surface_to_gray(norm), outdir / f"frame_{k:05d}.png")
                yield norm

        count = render.write_surface_tensor(outdir / "surfaces.srf", tee(), geometry, config.clip)
    else:
        count = render.write_surface_tensor(outdir / "surfaces.srf",
                                            (norm for _, norm, _ in frames),
                                            geometry, config.clip)
    _write_manifest(outdir, "convert", args, config, geometry, {"emitted_frames": count})
    print(f"wrote {count} frames to {outdir / 'surfaces.srf'}")
    return 0


def cmd_render(args) -> int:
    config = resolve_config(args)
    geometry, arrays, t0 = _load_stream(args)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    patch = config.patch_size(geometry)

    count = 0
    for k, norm, dmap in _pipeline_frames(geometry, arrays, t0, args.hz,
                                          args.warmup, config, args.frames):
        gray = render.surface_to_gray(norm)
        if args.grid:
            gray = render.overlay_grid(gray, patch)
        render.save_png(gray, outdir / f"frame_{k:05d}.png")
        if args.heatmap:
            rgb = render.decay_to_rgb(dmap.values)
            if args.grid:
                rgb = render.overlay_grid(rgb, patch, value=(255, 255, 255))
            render.save_png(rgb, outdir / f"heatmap_{k:05d}.png")
        count += 1
    _write_manifest(outdir, "render", args, config, geometry, {"emitted_frames": count})
    print(f"wrote {count} frame PNGs to {outdir}")
    return 0


def cmd_filter(args) -> int:
    path = Path(args.input)
    fmt = args.annotation_format or ("csv" if path.suffix.lower() == ".csv" else "jsonl")
    samples = read_annotations_csv(path) if fmt == "csv" else read_annotations_jsonl(path)
    report = validate_annotations(samples, args.hz)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_report_json(report, outdir / "report.json")
    write_exclusions_csv(report, outdir / "exclusions.csv")
    _write_manifest(outdir, "filter", args, None, None,
                    {"counts": report.counts(), "clips": len(report.clips)})
    c = report.counts()
    print(f"{len(samples)} samples: {c['pass']} pass, {c['repaired']} repaired, "
          f"{c['fail']} excluded; {len(report.clips)} clips retained")
    return 0


def cmd_bench(args) -> int:
    geometry = SensorGeometry(args.width, args.height)
    frequencies = [float(f) for f in args.frequencies.split(",")]
    methods = args.methods.split(",") if args.methods else list(bench_mod.BENCH_METHODS)
    total = args.warmup + args.windows
    duration = args.duration if args.duration else 1.05 * total / min(frequencies)
    arrays = bench_scene(geometry, duration, args.seed)
    results = bench_mod.run_bench(arrays, geometry, methods, frequencies,
                                  args.warmup, args.windows,
                                  parallel_workers=args.parallel)
    print(bench_mod.format_table(results))
    if args.outdir:
        outdir = Path(args.outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        bench_mod.write_results_csv(results, outdir / "bench.csv")
        bench_mod.write_results_json(results, outdir / "bench.json")
        _write_manifest(outdir, "bench", args, None, geometry,
                        {"duration_s": duration, "methods": methods,
                         "frequencies": frequencies})
    return 0


def _read_jsonl(path):
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def cmd_metrics(args) -> int:
    out: dict = {"task": args.task}
    if args.task == "detection":
        dets: dict = {}
        gts: dict = {}
        for obj in _read_jsonl(args.pred):
            dets.setdefault(obj["image"], []).append(
                Detection(tuple(obj["box"]), float(obj.get("confidence", 1.0))))
        for obj in _read_jsonl(args.gt):
            gts.setdefault(obj["image"], []).append(tuple(obj["box"]))
        images = sorted(set(dets) | set(gts))
        out["map50"] = map50([dets.get(i, []) for i in images],
                             [gts.get(i, []) for i in images])
        out["images"] = len(images)
    else:
        preds, gt_points = [], []
        for obj in _read_jsonl(args.pred):
            preds.append(LandmarkPrediction(tuple(tuple(p) for p in obj["points"]),
                                            float(obj["crop_w"]), float(obj["crop_h"])))
        for obj in _read_jsonl(args.gt):
            gt_points.append(tuple(tuple(p) for p in obj["points"]))
        out["nme_percent"] = dataset_nme(preds, gt_points)
        out["samples"] = len(preds)
    text = json.dumps(out, indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    geometry, arrays, t0 = _load_stream(args)
    app = create_app(arrays, geometry, t0=t0, default_hz=args.hz, warmup=args.warmup,
                     cache_frames=args.cache, ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="evrep", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="stream -> normalized surface tensor")
    _add_stream_args(p)
    _add_config_args(p)
    p.add_argument("outdir")
    p.add_argument("--frames", type=int, default=None, help="max frames to emit")
    p.add_argument("--png", action="store_true", help="also write grayscale PNGs")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("render", help="stream -> grayscale PNGs (+ decay heatmaps)")
    _add_stream_args(p)
    _add_config_args(p)
    p.add_argument("outdir")
    p.add_argument("--frames", type=int, default=None)
    p.add_argument("--heatmap", action="store_true", help="also write decay-map PNGs")
    p.add_argument("--grid", action="store_true", help="overlay patch boundaries")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("filter", help="validate and segment face annotations")
    p.add_argument("input")
    p.add_argument("outdir")
    p.add_argument("--hz", type=float, default=30.0, help="annotation rate")
    p.add_argument("--annotation-format", choices=("jsonl", "csv"), default=None)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("bench", help="per-window construction timings")
    p.add_argument("--width", type=int, default=DEFAULT_GEOMETRY[0])
    p.add_argument("--height", type=int, default=DEFAULT_GEOMETRY[1])
    p.add_argument("--methods", default=None,
                   help=f"comma list from {','.join(bench_mod.BENCH_METHODS)}")
    p.add_argument("--frequencies", default="30,240")
    p.add_argument("--warmup", type=int, default=DEFAULT_WARMUP)
    p.add_argument("--windows", type=int, default=60)
    p.add_argument("--duration", type=float, default=None, help="scene seconds")
    p.add_argument("--seed", type=int, default=1234)
    p.add_argument("--parallel", type=int, default=0, metavar="N",
                   help="also time the non-recursive FFT grid on N threads")
    p.add_argument("--outdir", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("metrics", help="score detections or landmarks")
    p.add_argument("--task", choices=("detection", "landmarks"), required=True)
    p.add_argument("--pred", required=True, help="predictions JSONL")
    p.add_argument("--gt", required=True, help="ground-truth JSONL")
    p.add_argument("--out", default=None, help="summary JSON path")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("serve", help="HTTP API for the interactive tuner")
    _add_stream_args(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8710)
    p.add_argument("--cache", type=int, default=256, help="frame cache budget")
    p.add_argument("--ui", default=None, help="static frontend directory to mount")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    except (StreamFormatError, StreamValidationError, AnnotationError,
            ConfigError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
