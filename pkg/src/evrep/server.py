"""HTTP API serving surfaces and decay heatmaps for the interactive tuner.

Frames are indexed post warm-up: k=0 is the first window after the warm-up
prefix. Parameter changes replay the recurrence from the stream start (the
update is order-dependent, so there is nothing cheaper that stays correct);
a per-parameter-set checkpoint makes forward scrubbing incremental, and
rendered PNGs live in a bounded LRU keyed by (parameters, kind, k), so equal
requests return byte-identical images.
"""

from __future__ import annotations

import dataclasses
import threading
from collections import OrderedDict

from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from . import render
from .events import EventArrays, EventWindow, SensorGeometry, window_stream
from .surfaces import (METHODS, PRESETS, ConfigError, RepresentationConfig,
                       SurfaceState, build_representation, clip_normalize)

_BOOL_TRUE = ("1", "true", "yes", "on")
_BOOL_FALSE = ("0", "false", "no", "off")

PARAMETER_SCHEMA = [
    {"name": "method", "type": "enum", "choices": list(METHODS), "default": "global_li",
     "methods": list(METHODS)},
    {"name": "tau", "type": "float", "min": 1e-4, "max": 50.0, "default": 0.05,
     "methods": ["global_li", "lads_er", "lads_log"]},
    {"name": "lambda0", "type": "float", "min": 0.01, "max": 1000.0, "default": 16.0,
     "methods": ["lads_er"]},
    {"name": "a", "type": "float", "min": 0.01, "max": 10.0, "default": 0.25,
     "methods": ["lads_log"]},
    {"name": "r", "type": "float", "min": 0.0, "max": 1.0, "default": 0.25,
     "methods": ["lads_fft"]},
    {"name": "T_d", "type": "float", "min": 0.0, "max": 1.0, "default": 0.5,
     "methods": ["lads_fft"]},
    {"name": "patch_divisor", "type": "int", "min": 1, "max": 64, "default": 8,
     "methods": ["lads_er", "lads_log", "lads_fft"]},
    {"name": "hz", "type": "float", "min": 1.0, "max": 1000.0, "default": 30.0,
     "methods": list(METHODS)},
]


def _parse_config(params: dict) -> RepresentationConfig:
    kwargs: dict = {}
    mapping = {
        "method": ("method", str),
        "tau": ("tau", float),
        "lambda0": ("lambda0", float),
        "a": ("a", float),
        "sigma": ("sigma", float),
        "r": ("r", float),
        "td": ("t_d", float),
        "T_d": ("t_d", float),
        "patch_divisor": ("patch_divisor", int),
        "er_ratio_mode": ("er_ratio_mode", str),
        "clip": ("clip", float),
    }
    for key, (field, cast) in mapping.items():
        if key in params and params[key] is not None:
            try:
                kwargs[field] = cast(params[key])
            except (TypeError, ValueError):
                raise HTTPException(400, f"invalid value for {key!r}: {params[key]!r}")
    for key, field in (("fft_invert", "fft_invert"), ("fft_recursive", "fft_recursive")):
        if key in params and params[key] is not None:
            raw = str(params[key]).lower()
            if raw in _BOOL_TRUE:
                kwargs[field] = True
            elif raw in _BOOL_FALSE:
                kwargs[field] = False
            else:
                raise HTTPException(400, f"invalid value for {key!r}: {params[key]!r}")
    try:
        return RepresentationConfig(**kwargs).validate()
    except ConfigError as exc:
        raise HTTPException(400, str(exc))


def _parse_hz(params: dict, default_hz: float) -> float:
    raw = params.get("hz")
    if raw is None:
        return default_hz
    try:
        hz = float(raw)
    except (TypeError, ValueError):
        raise HTTPException(400, f"invalid hz {raw!r}")
    if hz <= 0:
        raise HTTPException(400, f"hz must be positive, got {hz}")
    return hz


class _Replay:
    """Sequential pipeline state for one (config, hz) parameter set."""

    def __init__(self, windows: list[EventWindow], geometry: SensorGeometry,
                 config: RepresentationConfig):
        self.windows = windows
        self.geometry = geometry
        self.config = config
        self.state = SurfaceState.zeros(geometry)
        self.prev: EventWindow | None = None
        self.next_index = 0
        self.last: tuple | None = None  # (index, state, decay map)

    def surface_at(self, window_index: int):
        if self.last is not None and self.last[0] == window_index:
            return self.last[1], self.last[2]
        if window_index < self.next_index:
            self.state = SurfaceState.zeros(self.geometry)
            self.prev = None
            self.next_index = 0
        dmap = None
        while self.next_index <= window_index:
            window = self.windows[self.next_index]
            self.state, dmap, _ = build_representation(self.state, window, self.prev, self.config)
            self.prev = window
            self.next_index += 1
        self.last = (window_index, self.state, dmap)
        return self.state, dmap


def create_app(arrays: EventArrays, geometry: SensorGeometry, *, t0: int = 0,
               default_hz: float = 30.0, warmup: int = 5, cache_frames: int = 256,
               ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="evrep tuner API")

    duration_us = int(arrays.ts[-1]) - t0 if len(arrays) else 0
    windows_by_hz: dict[float, list[EventWindow]] = {}
    replays: dict[tuple, _Replay] = {}
    png_cache: OrderedDict[tuple, bytes] = OrderedDict()
    lock = threading.Lock()

    @app.exception_handler(RequestValidationError)
    async def _bad_request(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    def get_windows(hz: float) -> list[EventWindow]:
        if hz not in windows_by_hz:
            windows_by_hz[hz] = list(window_stream(arrays, hz, t0))
        return windows_by_hz[hz]

    def frame_count(hz: float) -> int:
        return max(0, len(get_windows(hz)) - warmup)

    def config_key(config: RepresentationConfig, hz: float) -> tuple:
        return dataclasses.astuple(config) + (hz,)

    def render_window(config: RepresentationConfig, hz: float, k: int, kind: str,
                      grid: bool) -> bytes:
        n = frame_count(hz)
        if k < 0 or k >= n:
            raise HTTPException(404, f"frame {k} out of range [0, {n})")
        key = config_key(config, hz) + (kind, grid, k)
        with lock:
            if key in png_cache:
                png_cache.move_to_end(key)
                return png_cache[key]
            rkey = config_key(config, hz)
            replay = replays.get(rkey)
            if replay is None:
                replay = _Replay(get_windows(hz), geometry, config)
                replays[rkey] = replay
                if len(replays) > 64:
                    replays.pop(next(iter(replays)))
            state, dmap = replay.surface_at(warmup + k)
            if kind == "frame":
                img = render.surface_to_gray(clip_normalize(state.values, config.clip))
                if grid:
                    img = render.overlay_grid(img, config.patch_size(geometry))
            else:
                img = render.decay_to_rgb(dmap.values)
                if grid:
                    img = render.overlay_grid(img, config.patch_size(geometry),
                                              value=(255, 255, 255))
            png = render.png_bytes(img)
            png_cache[key] = png
            while len(png_cache) > cache_frames:
                png_cache.popitem(last=False)
            return png

    @app.get("/api/meta")
    def meta(request: Request):
        hz = _parse_hz(dict(request.query_params), default_hz)
        return {
            "width": geometry.width,
            "height": geometry.height,
            "events": len(arrays),
            "t0": t0,
            "duration_us": duration_us,
            "default_hz": default_hz,
            "hz": hz,
            "warmup": warmup,
            "frame_count": frame_count(hz),
            "methods": list(METHODS),
            "parameters": PARAMETER_SCHEMA,
            "presets": {f"{d}-{hz_}": dict(v) for (d, hz_), v in PRESETS.items()},
        }

    @app.get("/api/params/defaults")
    def defaults(dataset: str, hz: int):
        key = (dataset, hz)
        if key not in PRESETS:
            raise HTTPException(400, f"no preset for dataset={dataset!r} hz={hz}")
        return dict(PRESETS[key])

    @app.get("/api/frame")
    def frame(request: Request, k: int):
        params = dict(request.query_params)
        config = _parse_config(params)
        hz = _parse_hz(params, default_hz)
        return Response(render_window(config, hz, k, "frame",
                                      params.get("grid", "0").lower() in _BOOL_TRUE),
                        media_type="image/png")

    @app.get("/api/heatmap")
    def heatmap(request: Request, k: int):
        params = dict(request.query_params)
        config = _parse_config(params)
        hz = _parse_hz(params, default_hz)
        return Response(render_window(config, hz, k, "heatmap",
                                      params.get("grid", "0").lower() in _BOOL_TRUE),
                        media_type="image/png")

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
