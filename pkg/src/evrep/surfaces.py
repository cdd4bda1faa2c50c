"""Dense representations of event windows.

Five methods share one update recurrence ``S_k = H_k + d_k * S_{k-1}``:

* ``histogram``      -- d = 0 everywhere (no memory),
* ``global_li``      -- d = exp(-dt/tau), one scalar per window,
* ``lads_er``        -- d per patch from the patch event rate,
* ``lads_log``       -- d per patch from the mean absolute response of a
                        3x3 Laplacian-of-Gaussian filter,
* ``lads_fft``       -- d per patch from the high-frequency share of the
                        patch power spectrum (see :mod:`evrep.spectral`).

Patch-wise decay values are bilinearly interpolated between patch centers to
a per-pixel field, with clamp-to-edge outside the outer ring of centers.
Surfaces are float64 internally; :func:`clip_normalize` emits float32.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache
from typing import Iterable

import numpy as np

from ._kernels import bilinear_apply, correlate3x3, leaky_update, leaky_update_scalar
from .events import EventWindow, SensorGeometry, elapsed_dt

US_PER_S = 1_000_000

METHODS = ("histogram", "global_li", "lads_er", "lads_log", "lads_fft")

# Fixed 3x3 edge filter: the 4-neighbour Laplacian convolved with the
# normalized 3x3 Gaussian at sigma=0.25, truncated to the central 3x3 of the
# full 5x5 product. With g0, g1, g2 the Gaussian center/edge/corner weights
# (g_i = exp(-8*i)/Z, Z = 1 + 4*exp(-8) + 4*exp(-16)):
#   center = -4*g0 + 4*g1, edge = g0 - 4*g1 + 2*g2, corner = 2*g1 - 4*g2.
# Truncation leaves a residual sum of -1.34e-3, which would stop the filter
# from annihilating constants, so the residual is folded back into the
# center tap (zero-sum correction). Frozen as literals for
# bit-reproducibility across libm implementations.
LOG_KERNEL_CENTER = -3.9919569922207345  # -4*g0 + 4*g1, minus the truncation residual
LOG_KERNEL_EDGE = 0.9973196717128386
LOG_KERNEL_CORNER = 0.0006695763423450462

LOG_KERNEL = np.array([
    [LOG_KERNEL_CORNER, LOG_KERNEL_EDGE, LOG_KERNEL_CORNER],
    [LOG_KERNEL_EDGE, LOG_KERNEL_CENTER, LOG_KERNEL_EDGE],
    [LOG_KERNEL_CORNER, LOG_KERNEL_EDGE, LOG_KERNEL_CORNER],
])
LOG_KERNEL.setflags(write=False)

DEFAULT_SIGMA = 0.25

# Tuned parameter sets per dataset profile and update frequency.
PRESETS = {
    ("fes", 30): {"tau": 0.05, "lambda0": 16.0, "log_tau": 12.5, "a": 0.25, "r": 0.25, "T_d": 0.5},
    ("fes", 240): {"tau": 0.05, "lambda0": 16.0, "log_tau": 12.5, "a": 0.25, "r": 0.05, "T_d": 0.5},
    ("blink", 30): {"tau": 0.2, "lambda0": 2.0, "log_tau": 7.5, "a": 0.75, "r": 0.01, "T_d": 0.9},
    ("blink", 240): {"tau": 0.2, "lambda0": 2.0, "log_tau": 7.5, "a": 0.75, "r": 0.01, "T_d": 0.9},
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RepresentationConfig:
    method: str = "global_li"
    tau: float = 0.05           # seconds for global_li / lads_er, score units for lads_log
    lambda0: float = 16.0       # reference event rate, ev / px / s
    a: float = 0.25             # sigmoid steepness for lads_log
    sigma: float = DEFAULT_SIGMA
    r: float = 0.25             # high-pass radius, fraction of the largest patch dim
    t_d: float = 0.5            # quadtree subdivision threshold
    patch_divisor: int = 8
    er_ratio_mode: str = "prose"   # or "printed": the equation exactly as typeset
    fft_invert: bool = False
    fft_recursive: bool = True
    clip: float = 5.0

    def validate(self) -> "RepresentationConfig":
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.tau <= 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if self.lambda0 <= 0:
            raise ConfigError(f"lambda0 must be positive, got {self.lambda0}")
        if self.a <= 0:
            raise ConfigError(f"a must be positive, got {self.a}")
        if not 0.0 <= self.r <= 1.0:
            raise ConfigError(f"r must be in [0, 1], got {self.r}")
        if not 0.0 <= self.t_d <= 1.0:
            raise ConfigError(f"T_d must be in [0, 1], got {self.t_d}")
        if self.patch_divisor < 1:
            raise ConfigError(f"patch_divisor must be >= 1, got {self.patch_divisor}")
        if self.er_ratio_mode not in ("prose", "printed"):
            raise ConfigError(f"er_ratio_mode must be 'prose' or 'printed', got {self.er_ratio_mode!r}")
        if self.clip <= 0:
            raise ConfigError(f"clip must be positive, got {self.clip}")
        return self

    def patch_size(self, geometry: SensorGeometry) -> int:
        return -(-max(geometry.width, geometry.height) // self.patch_divisor)


def preset_config(dataset: str, hz: int, method: str = "global_li",
                  **overrides) -> RepresentationConfig:
    key = (dataset, int(hz))
    if key not in PRESETS:
        raise ConfigError(f"no preset for dataset={dataset!r} hz={hz}")
    p = PRESETS[key]
    cfg = RepresentationConfig(
        method=method,
        tau=p["log_tau"] if method == "lads_log" else p["tau"],
        lambda0=p["lambda0"], a=p["a"], r=p["r"], t_d=p["T_d"])
    return replace(cfg, **overrides).validate()


@dataclass(frozen=True)
class Histogram:
    """Per-pixel signed polarity sum for one window; optional raw counts."""

    values: np.ndarray          # float64 (H, W)
    window_index: int
    counts: np.ndarray | None = None  # int64 (H, W) raw event counts


@dataclass(frozen=True)
class SurfaceState:
    values: np.ndarray          # float64 (H, W)
    last_window_index: int = -1
    warmup_remaining: int = 0

    @classmethod
    def zeros(cls, geometry: SensorGeometry, warmup_remaining: int = 0) -> "SurfaceState":
        return cls(np.zeros(geometry.shape), -1, warmup_remaining)

    @property
    def geometry(self) -> SensorGeometry:
        h, w = self.values.shape
        return SensorGeometry(w, h)


@dataclass(frozen=True)
class PatchGrid:
    """Non-overlapping patch tiling with per-patch scores and decay values."""

    patch_size: int
    rows: int
    cols: int
    image_shape: tuple[int, int]
    scores: np.ndarray                 # float64 (rows, cols)
    decays: np.ndarray | None = None   # float64 (rows, cols), each in [0, 1]

    def row_sizes(self) -> np.ndarray:
        h = self.image_shape[0]
        sizes = np.full(self.rows, self.patch_size, dtype=np.int64)
        sizes[-1] = h - (self.rows - 1) * self.patch_size
        return sizes

    def col_sizes(self) -> np.ndarray:
        w = self.image_shape[1]
        sizes = np.full(self.cols, self.patch_size, dtype=np.int64)
        sizes[-1] = w - (self.cols - 1) * self.patch_size
        return sizes

    def areas(self) -> np.ndarray:
        return np.outer(self.row_sizes(), self.col_sizes()).astype(np.float64)


@dataclass(frozen=True)
class DecayMap:
    values: np.ndarray  # float64 (H, W), all in [0, 1]

    @classmethod
    def constant(cls, geometry: SensorGeometry, value: float) -> "DecayMap":
        return cls(np.full(geometry.shape, float(value)))


def grid_dims(geometry: SensorGeometry, patch_size: int) -> tuple[int, int]:
    if patch_size < 1:
        raise ValueError(f"patch size must be >= 1, got {patch_size}")
    return (-(-geometry.height // patch_size), -(-geometry.width // patch_size))


def accumulate_histogram(window: EventWindow, geometry: SensorGeometry, *,
                         with_counts: bool = False) -> Histogram:
    """H(x, y) = sum of polarities at (x, y); zero where no events landed."""
    h, w = geometry.shape
    if window.count:
        flat = window.ys * w + window.xs
        values = np.bincount(flat, weights=window.ps, minlength=h * w).reshape(h, w)
        counts = np.bincount(flat, minlength=h * w).reshape(h, w) if with_counts else None
    else:
        values = np.zeros((h, w))
        counts = np.zeros((h, w), dtype=np.int64) if with_counts else None
    return Histogram(values=values, window_index=window.index, counts=counts)


def global_decay_factor(dt: float, tau: float) -> float:
    """exp(-dt / tau); 1 at dt=0, underflows to exactly 0 for dt >> tau."""
    if tau <= 0:
        raise ConfigError(f"tau must be positive, got {tau}")
    if dt < 0:
        raise ValueError(f"dt must be non-negative, got {dt}")
    return math.exp(-dt / tau)


def update_surface(state: SurfaceState, hist: Histogram, decay: DecayMap) -> SurfaceState:
    """S_k = H_k + d_k * S_{k-1}, elementwise."""
    if hist.values.shape != state.values.shape or decay.values.shape != state.values.shape:
        raise ValueError(
            f"shape mismatch: state {state.values.shape}, hist {hist.values.shape}, "
            f"decay {decay.values.shape}")
    values = leaky_update(np.ascontiguousarray(hist.values, dtype=np.float64),
                          np.ascontiguousarray(decay.values, dtype=np.float64),
                          np.ascontiguousarray(state.values, dtype=np.float64))
    return SurfaceState(values, hist.window_index, max(0, state.warmup_remaining - 1))


def patch_sums(values: np.ndarray, patch_size: int) -> np.ndarray:
    """Per-patch sums via row/column block reduction (edge patches truncated)."""
    h, w = values.shape
    rows = np.add.reduceat(values, np.arange(0, h, patch_size), axis=0)
    return np.add.reduceat(rows, np.arange(0, w, patch_size), axis=1)


def patch_event_rates(hist: Histogram, dt: float, patch_size: int) -> PatchGrid:
    """Events per pixel per second in each patch (raw counts, not signed sums)."""
    if hist.counts is None:
        raise ValueError("histogram was accumulated without counts; pass with_counts=True")
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    h, w = hist.counts.shape
    geometry = SensorGeometry(w, h)
    rows, cols = grid_dims(geometry, patch_size)
    grid = PatchGrid(patch_size, rows, cols, (h, w),
                     scores=np.zeros((rows, cols)))
    counts = patch_sums(hist.counts.astype(np.float64), patch_size)
    rates = counts / (grid.areas() * dt)
    return replace(grid, scores=rates)


def er_decay(rate, lambda0: float, dt: float, tau: float, mode: str = "prose"):
    """Patch decay from its event rate.

    prose (default): d = exp(-(dt/tau) * (rate/lambda0)) -- busy patches decay
    fast, silent patches hold (d = 1 at rate 0).
    printed: d = exp(-(dt/tau) * (lambda0/max(rate, 1e-9))), the formula as
    typeset, which reverses that behaviour.
    """
    if lambda0 <= 0 or tau <= 0:
        raise ConfigError("lambda0 and tau must be positive")
    if dt < 0:
        raise ValueError(f"dt must be non-negative, got {dt}")
    rate = np.asarray(rate, dtype=np.float64)
    if mode == "prose":
        out = np.exp(-(dt / tau) * (rate / lambda0))
    elif mode == "printed":
        out = np.exp(-(dt / tau) * (lambda0 / np.maximum(rate, 1e-9)))
    else:
        raise ConfigError(f"er_ratio_mode must be 'prose' or 'printed', got {mode!r}")
    return out if out.ndim else float(out)


@lru_cache(maxsize=8)
def _log_kernel_for(sigma: float) -> np.ndarray:
    if sigma == DEFAULT_SIGMA:
        return LOG_KERNEL
    z = 1.0 + 4.0 * math.exp(-1.0 / (2.0 * sigma * sigma)) + 4.0 * math.exp(-1.0 / (sigma * sigma))
    g0 = 1.0 / z
    g1 = math.exp(-1.0 / (2.0 * sigma * sigma)) / z
    g2 = math.exp(-1.0 / (sigma * sigma)) / z
    center = -4.0 * g0 + 4.0 * g1
    edge = g0 - 4.0 * g1 + 2.0 * g2
    corner = 2.0 * g1 - 4.0 * g2
    center -= center + 4.0 * edge + 4.0 * corner  # zero-sum correction
    k = np.array([[corner, edge, corner], [edge, center, edge], [corner, edge, corner]])
    k.setflags(write=False)
    return k


def log_edge_map(values: np.ndarray, sigma: float = DEFAULT_SIGMA) -> np.ndarray:
    """3x3 Laplacian-of-Gaussian response with zero-padded borders."""
    kernel = _log_kernel_for(float(sigma))
    return correlate3x3(np.ascontiguousarray(values, dtype=np.float64),
                        np.ascontiguousarray(kernel, dtype=np.float64))


def log_patch_score(edge_map: np.ndarray, region: tuple[int, int, int, int]) -> float:
    """Mean absolute edge response over region (y0, x0, height, width)."""
    y0, x0, rh, rw = region
    patch = edge_map[y0:y0 + rh, x0:x0 + rw]
    return float(np.abs(patch).sum() / (rh * rw))


def log_patch_scores(edge_map: np.ndarray, patch_size: int) -> PatchGrid:
    h, w = edge_map.shape
    geometry = SensorGeometry(w, h)
    rows, cols = grid_dims(geometry, patch_size)
    grid = PatchGrid(patch_size, rows, cols, (h, w), scores=np.zeros((rows, cols)))
    sums = patch_sums(np.abs(edge_map), patch_size)
    return replace(grid, scores=sums / grid.areas())


def log_decay(score, tau: float, a: float):
    """Modified sigmoid (1 + e^{-a*tau}) / (1 + e^{-a*(tau - L)}).

    Equals 1 exactly at L = 0, is monotone non-increasing in L, and is
    flushed to 0 once a*(L - tau) would overflow the denominator.
    """
    if a <= 0:
        raise ConfigError(f"a must be positive, got {a}")
    score = np.asarray(score, dtype=np.float64)
    exponent = a * (score - tau)   # denominator is 1 + exp(exponent)
    # np.exp on both sides so d(0) = num/num = 1 exactly.
    numerator = 1.0 + np.exp(np.float64(a * (0.0 - tau)))
    with np.errstate(over="ignore"):
        out = np.where(exponent > 700.0, 0.0, numerator / (1.0 + np.exp(np.minimum(exponent, 700.0))))
    return out if out.ndim else float(out)


@lru_cache(maxsize=64)
def _bilinear_layout(h: int, w: int, patch_size: int, rows: int, cols: int):
    """Per-pixel gather indices and weights for patch-center interpolation."""

    def axis_layout(n_pixels: int, n_cells: int):
        starts = np.arange(n_cells, dtype=np.int64) * patch_size
        ends = np.minimum(starts + patch_size, n_pixels)
        centers = (starts + ends - 1) / 2.0
        coords = np.arange(n_pixels, dtype=np.float64)
        if n_cells == 1:
            lo = np.zeros(n_pixels, dtype=np.int64)
            return lo, lo.copy(), np.zeros(n_pixels)
        lo = np.clip(np.searchsorted(centers, coords, side="right") - 1, 0, n_cells - 2)
        t = (coords - centers[lo]) / (centers[lo + 1] - centers[lo])
        return lo, lo + 1, np.clip(t, 0.0, 1.0)

    i0, i1, ty = axis_layout(h, rows)
    j0, j1, tx = axis_layout(w, cols)
    shape = (h, w)
    return (np.broadcast_to(i0[:, None], shape).copy(),
            np.broadcast_to(i1[:, None], shape).copy(),
            np.broadcast_to(j0[None, :], shape).copy(),
            np.broadcast_to(j1[None, :], shape).copy(),
            np.ascontiguousarray(np.broadcast_to(ty[:, None], shape)),
            np.ascontiguousarray(np.broadcast_to(tx[None, :], shape)))


def interpolate_decay_map(grid: PatchGrid, geometry: SensorGeometry) -> DecayMap:
    """Bilinear interpolation of per-patch decays sampled at patch centers.

    Pixels outside the outer ring of centers clamp to the nearest center, so
    a constant grid maps to an exactly constant field. Output is clamped to
    the grid extrema (convex-combination bound, exact under rounding).
    """
    if grid.decays is None:
        raise ValueError("patch grid carries no decay values")
    decays = np.ascontiguousarray(grid.decays, dtype=np.float64)
    lo = float(decays.min())
    hi = float(decays.max())
    if lo == hi:
        return DecayMap(np.full(geometry.shape, lo))
    lay = _bilinear_layout(geometry.height, geometry.width, grid.patch_size, grid.rows, grid.cols)
    values = bilinear_apply(decays, *lay, lo, hi)
    return DecayMap(values)


def clip_normalize(values: np.ndarray, clip: float = 5.0) -> np.ndarray:
    """Clamp to [-clip, clip], scale to [-1, 1], emit float32."""
    if clip <= 0:
        raise ConfigError(f"clip must be positive, got {clip}")
    v = np.asarray(values, dtype=np.float64)
    return (np.clip(v, -clip, clip) / clip).astype(np.float32)


def _window_dt(window: EventWindow, prev_window: EventWindow | None) -> float:
    if prev_window is not None:
        return elapsed_dt(prev_window, window)
    # First window of a stream: reference from its own start boundary.
    t_curr = Fraction(window.last_event_t) if window.last_event_t is not None else window.end_t
    return float((t_curr - window.start_t) / US_PER_S)


def build_representation(state: SurfaceState, window: EventWindow,
                         prev_window: EventWindow | None,
                         config: RepresentationConfig
                         ) -> tuple[SurfaceState, DecayMap, Histogram]:
    """One pipeline step: histogram, decay field, surface update.

    Returns the new carried state, the decay map that was applied (all-ones
    for the histogram method, constant for global_li) and the window's
    histogram.
    """
    config.validate()
    geometry = state.geometry
    method = config.method

    if method == "histogram":
        hist = accumulate_histogram(window, geometry)
        # d == 0 degenerate case: S_k = H_k + 0 * S_{k-1} = H_k exactly.
        new_state = SurfaceState(hist.values.copy(), hist.window_index,
                                 max(0, state.warmup_remaining - 1))
        return new_state, DecayMap.constant(geometry, 1.0), hist

    dt = _window_dt(window, prev_window)

    if method == "global_li":
        hist = accumulate_histogram(window, geometry)
        d = global_decay_factor(dt, config.tau)
        values = leaky_update_scalar(hist.values, d, state.values)
        new_state = SurfaceState(values, hist.window_index, max(0, state.warmup_remaining - 1))
        return new_state, DecayMap.constant(geometry, d), hist

    patch_size = config.patch_size(geometry)

    if method == "lads_er":
        hist = accumulate_histogram(window, geometry, with_counts=True)
        dt_er = max(dt, 1e-12)  # dt cancels in rate * dt, so the clamp is exact
        grid = patch_event_rates(hist, dt_er, patch_size)
        decays = er_decay(grid.scores, config.lambda0, dt_er, config.tau, config.er_ratio_mode)
        grid = replace(grid, decays=np.asarray(decays))
        dmap = interpolate_decay_map(grid, geometry)
    elif method == "lads_log":
        hist = accumulate_histogram(window, geometry)
        edges = log_edge_map(hist.values, config.sigma)
        grid = log_patch_scores(edges, patch_size)
        grid = replace(grid, decays=np.asarray(log_decay(grid.scores, config.tau, config.a)))
        dmap = interpolate_decay_map(grid, geometry)
    elif method == "lads_fft":
        from . import spectral
        hist = accumulate_histogram(window, geometry)
        if config.fft_recursive:
            tree = spectral.recursive_fft_grid(hist, config)
            dmap = spectral.rasterize_quadtree(tree, geometry, patch_size)
        else:
            grid = spectral.nonrecursive_fft_grid(hist, config)
            dmap = interpolate_decay_map(grid, geometry)
    else:  # pragma: no cover - validate() guards this
        raise ConfigError(f"unknown method {method!r}")

    new_state = update_surface(state, hist, dmap)
    return new_state, dmap, hist


def warm_up(windows: Iterable[EventWindow], n: int, config: RepresentationConfig,
            state: SurfaceState | None = None,
            geometry: SensorGeometry | None = None
            ) -> tuple[SurfaceState, EventWindow | None]:
    """Run the pipeline over the first n windows, keeping only the state.

    Returns the carried state and the last consumed window (the dt reference
    for the next step). Raises if the stream has fewer than n windows.
    """
    if n < 0:
        raise ValueError(f"warm-up count must be >= 0, got {n}")
    it = iter(windows)
    if state is None:
        if geometry is None:
            raise ValueError("need a starting state or a geometry")
        state = SurfaceState.zeros(geometry, warmup_remaining=n)
    else:
        state = replace(state, warmup_remaining=n)
    prev: EventWindow | None = None
    for i in range(n):
        window = next(it, None)
        if window is None:
            raise ValueError(f"warm-up needs {n} windows, stream ended after {i}")
        state, _, _ = build_representation(state, window, prev, config)
        prev = window
    return state, prev
