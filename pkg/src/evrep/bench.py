"""Per-window construction-time benchmark across methods and frequencies.

Windows are materialized before the loop, so synthesis, windowing and I/O
never land inside the timed region; each measurement brackets exactly one
build step (histogram + scoring + interpolation + update). clip/normalize is
timed separately and reported as an inclusive mean alongside. An internal
``noop`` method measures pure harness overhead.

Absolute times are hardware-specific; consumers should compare orderings and
ratios, which is what the acceptance suite asserts.
"""

from __future__ import annotations

import csv
import json
import platform
import statistics
import time
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from ._kernels import warm_kernels
from .events import (EventArrays, EventWindow, SensorGeometry, window_count_for,
                     window_stream)
from .surfaces import (RepresentationConfig, SurfaceState, accumulate_histogram,
                       build_representation, clip_normalize,
                       interpolate_decay_map, preset_config, update_surface)

BENCH_METHODS = ("histogram", "global_li", "lads_er", "lads_log",
                 "lads_fft", "lads_fft_nonrecursive")
PARALLEL_METHOD = "lads_fft_nonrecursive_parallel"


@dataclass(frozen=True)
class BenchResult:
    method: str
    frequency_hz: float
    mean_ms: float
    median_ms: float
    p95_ms: float
    mean_inclusive_ms: float  # construction + clip/normalize
    windows: int
    machine: str


def machine_descriptor() -> str:
    return (f"{platform.platform()} | {platform.processor() or 'unknown-cpu'} | "
            f"python {platform.python_version()} | numpy {np.__version__}")


def bench_config(method: str, hz: float, dataset: str = "fes") -> RepresentationConfig:
    if method == "noop":
        return preset_config(dataset, int(hz), "histogram")
    if method in ("lads_fft_nonrecursive", PARALLEL_METHOD):
        return preset_config(dataset, int(hz), "lads_fft", fft_recursive=False)
    return preset_config(dataset, int(hz), method)


def _parallel_nonrecursive_step(state: SurfaceState, window: EventWindow,
                                config: RepresentationConfig,
                                workers: int) -> SurfaceState:
    """The non-recursive FFT construction with cells scored on a thread pool."""
    from .spectral import nonrecursive_fft_grid
    geometry = state.geometry
    hist = accumulate_histogram(window, geometry)
    grid = nonrecursive_fft_grid(hist, config, workers=workers)
    dmap = interpolate_decay_map(grid, geometry)
    return update_surface(state, hist, dmap)


def run_bench(source: EventArrays | Callable[[float], Sequence[EventWindow]],
              geometry: SensorGeometry,
              methods: Sequence[str] = BENCH_METHODS,
              frequencies: Sequence[float] = (30, 240),
              warmup_windows: int = 5,
              measured_windows: int = 60,
              dataset: str = "fes",
              repeats: int = 3,
              parallel_workers: int = 0) -> list[BenchResult]:
    """Time every method at every frequency; results sorted by mean.

    Each window's construction is run ``repeats`` times from the identical
    pre-window state (the step is pure) and the fastest run is kept, which
    strips scheduler interference out of the per-window numbers; the state
    then advances normally. Single-threaded by default: the optional torch
    FFT backend is pinned to one thread for the duration of the run. With
    ``parallel_workers > 1`` an extra row times the non-recursive FFT grid
    with cells scored on that many threads (values stay bit-identical to the
    sequential path).
    """
    if measured_windows < 30:
        raise ValueError(f"measured_windows must be >= 30, got {measured_windows}")
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    methods = list(methods)
    if parallel_workers > 1 and PARALLEL_METHOD not in methods:
        methods.append(PARALLEL_METHOD)
    for m in methods:
        if m not in BENCH_METHODS and m not in ("noop", PARALLEL_METHOD):
            raise ValueError(f"unknown method {m!r}; expected {BENCH_METHODS + ('noop',)}")

    warm_kernels()
    _pin_fft_threads()
    machine = machine_descriptor()
    total = warmup_windows + measured_windows
    results = []
    for hz in frequencies:
        if callable(source):
            windows = list(source(hz))[:total]
            covered = len(windows)
        else:
            covered = window_count_for(int(source.ts[-1]), hz) if len(source) else 0
            windows = list(window_stream(source, hz, 0, count=total))
        if covered < total:
            raise ValueError(f"need {total} windows at {hz} Hz, stream covers {covered}")
        for method in methods:
            config = bench_config(method, hz, dataset)
            results.append(_bench_one(method, config, windows, geometry, hz,
                                      warmup_windows, machine, repeats,
                                      parallel_workers))
    results.sort(key=lambda r: r.mean_ms)
    return results


def _pin_fft_threads() -> None:
    try:
        import torch
        torch.set_num_threads(1)
    except ImportError:
        pass


def _bench_one(method: str, config: RepresentationConfig,
               windows: Sequence[EventWindow], geometry: SensorGeometry,
               hz: float, warmup_windows: int, machine: str,
               repeats: int, parallel_workers: int = 0) -> BenchResult:
    state = SurfaceState.zeros(geometry)
    prev: EventWindow | None = None
    build_ms: list[float] = []
    clip_ms: list[float] = []
    for i, window in enumerate(windows):
        best_build = best_clip = float("inf")
        for _ in range(repeats):
            t0 = time.perf_counter_ns()
            if method == "noop":
                new_state = state
            elif method == PARALLEL_METHOD:
                new_state = _parallel_nonrecursive_step(state, window, config,
                                                        max(2, parallel_workers))
            else:
                new_state, _, _ = build_representation(state, window, prev, config)
            t1 = time.perf_counter_ns()
            clip_normalize(new_state.values, config.clip)
            t2 = time.perf_counter_ns()
            best_build = min(best_build, (t1 - t0) / 1e6)
            best_clip = min(best_clip, (t2 - t1) / 1e6)
        state = new_state
        if i >= warmup_windows:
            build_ms.append(best_build)
            clip_ms.append(best_clip)
        prev = window
    return BenchResult(
        method=method,
        frequency_hz=float(hz),
        mean_ms=statistics.fmean(build_ms),
        median_ms=statistics.median(build_ms),
        p95_ms=float(np.percentile(build_ms, 95)),
        mean_inclusive_ms=statistics.fmean(b + c for b, c in zip(build_ms, clip_ms)),
        windows=len(build_ms),
        machine=machine,
    )


def format_table(results: Sequence[BenchResult]) -> str:
    header = f"{'method':<24} {'hz':>6} {'mean ms':>9} {'median':>9} {'p95':>9} {'incl.':>9} {'n':>4}"
    lines = [header, "-" * len(header)]
    for r in results:
        lines.append(f"{r.method:<24} {r.frequency_hz:>6.0f} {r.mean_ms:>9.3f} "
                     f"{r.median_ms:>9.3f} {r.p95_ms:>9.3f} {r.mean_inclusive_ms:>9.3f} "
                     f"{r.windows:>4}")
    if results:
        lines.append(f"machine: {results[0].machine}")
    return "\n".join(lines)


def write_results_csv(results: Sequence[BenchResult], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "frequency_hz", "mean_ms", "median_ms", "p95_ms",
                         "mean_inclusive_ms", "windows", "machine"])
        for r in results:
            writer.writerow([r.method, r.frequency_hz, f"{r.mean_ms:.6f}",
                             f"{r.median_ms:.6f}", f"{r.p95_ms:.6f}",
                             f"{r.mean_inclusive_ms:.6f}", r.windows, r.machine])


def write_results_json(results: Sequence[BenchResult], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([asdict(r) for r in results], fh, indent=2)
        fh.write("\n")
