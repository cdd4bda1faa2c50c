"""Deterministic synthetic event streams for tests and benchmarks.

Scenes:

* ``moving_edge`` -- a vertical edge sweeping left to right across the full
  width over the stream duration; events only ever fall on the edge column,
  so nothing lands outside the swept band.
* ``blink`` -- a face-like sequence: an elliptical outline flickers during an
  initial settling phase, a rectangular two-eye block bursts with dense,
  ON-biased events mid-stream (the blink), and a low uniform noise floor runs
  throughout. Region masks and phase timings are exposed through
  :func:`blink_scene_spec` so property tests can score region statistics.
* ``static_noise`` -- spatially and temporally uniform noise at a given
  events/pixel/second rate (Poisson total count).
* ``hot_pixel`` -- a single defective pixel firing at a fixed rate.

All scenes are pure functions of (geometry, duration, seed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .events import US_PER_S, EventArrays, SensorGeometry, merge_streams

SCENES = ("moving_edge", "blink", "static_noise", "hot_pixel")

# Blink scene phases, as fractions of the stream duration.
OUTLINE_PHASE = (0.0, 0.25)
BLINK_PHASE = (0.45, 0.65)

_BLINK_NOISE_RATE = 1.0        # ev / px / s across the whole frame
_BLINK_BURST_PER_WINDOW = 60.0  # ev / px per 30 Hz window inside the eye block
_BLINK_BURST_ON_BIAS = 0.85     # P(p = +1) during the burst
_OUTLINE_EVENTS_PER_PX = 12.0   # events per outline pixel over the active phase


@dataclass(frozen=True)
class BlinkSceneSpec:
    """Geometry-resolved layout and timing of the blink scene."""

    geometry: SensorGeometry
    outline_mask: np.ndarray        # bool (H, W), the elliptical face outline
    eye_block: tuple[int, int, int, int]   # y0, x0, y1, x1 of the bursting block
    eye_core: tuple[int, int, int, int]    # inner rect between the block's patch centers
    outline_phase: tuple[float, float] = OUTLINE_PHASE
    blink_phase: tuple[float, float] = BLINK_PHASE

    def eye_core_mask(self) -> np.ndarray:
        m = np.zeros(self.geometry.shape, dtype=bool)
        y0, x0, y1, x1 = self.eye_core
        m[y0:y1, x0:x1] = True
        return m


def _patch_size(geometry: SensorGeometry, divisor: int = 8) -> int:
    return -(-max(geometry.width, geometry.height) // divisor)


def blink_scene_spec(geometry: SensorGeometry) -> BlinkSceneSpec:
    h, w = geometry.shape
    ps = _patch_size(geometry)
    # Eye block: a 2x2 block of decay patches in the upper-middle of the frame.
    row0, col0 = 1, max(1, (w // ps) // 2 - 1)
    y0, x0 = row0 * ps, col0 * ps
    y1, x1 = min(y0 + 2 * ps, h), min(x0 + 2 * ps, w)
    # Core between the four patch centers: interpolated decay there is an
    # exact mix of the block's own patch values.
    cy0, cx0 = y0 + ps // 2, x0 + ps // 2
    cy1, cx1 = y1 - ps // 2, x1 - ps // 2

    yy, xx = np.mgrid[0:h, 0:w]
    cy, cx = h * 0.55, w * 0.5
    ry, rx = h * 0.38, w * 0.30
    rad = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2
    outline = (rad >= 0.92) & (rad <= 1.0)
    outline[y0:y1, x0:x1] = False  # keep the regions disjoint

    return BlinkSceneSpec(geometry=geometry, outline_mask=outline,
                          eye_block=(y0, x0, y1, x1), eye_core=(cy0, cx0, cy1, cx1))


def _uniform_times(rng: np.random.Generator, n: int, t_lo_us: int, t_hi_us: int) -> np.ndarray:
    return rng.integers(t_lo_us, max(t_hi_us, t_lo_us + 1), size=n, dtype=np.int64)


def _sorted(xs, ys, ts, ps) -> EventArrays:
    order = np.argsort(ts, kind="stable")
    return EventArrays.from_columns(np.asarray(xs)[order], np.asarray(ys)[order],
                                    np.asarray(ts)[order], np.asarray(ps)[order])


def moving_edge(geometry: SensorGeometry, duration_s: float, seed: int, *,
                rate_ev_s: float = 150_000.0) -> EventArrays:
    rng = np.random.default_rng(seed)
    dur_us = int(round(duration_s * US_PER_S))
    n = int(round(rate_ev_s * duration_s))
    ts = np.sort(_uniform_times(rng, n, 0, dur_us))
    xs = np.minimum((ts * geometry.width) // max(dur_us, 1), geometry.width - 1)
    ys = rng.integers(0, geometry.height, size=n, dtype=np.int64)
    ps = rng.choice(np.array([-1, 1], dtype=np.int8), size=n)
    return EventArrays.from_columns(xs, ys, ts, ps)


def moving_edge_band(geometry: SensorGeometry, duration_s: float) -> tuple[int, int]:
    """Inclusive column range the edge sweeps; no events fall outside it."""
    return 0, geometry.width - 1


def static_noise(geometry: SensorGeometry, duration_s: float, seed: int, *,
                 rate: float = 5.0) -> EventArrays:
    """Uniform noise at ``rate`` events/pixel/second (Poisson total)."""
    rng = np.random.default_rng(seed)
    dur_us = int(round(duration_s * US_PER_S))
    n = int(rng.poisson(rate * geometry.npixels * duration_s))
    ts = np.sort(_uniform_times(rng, n, 0, dur_us))
    xs = rng.integers(0, geometry.width, size=n, dtype=np.int64)
    ys = rng.integers(0, geometry.height, size=n, dtype=np.int64)
    ps = rng.choice(np.array([-1, 1], dtype=np.int8), size=n)
    return EventArrays.from_columns(xs, ys, ts, ps)


def hot_pixel(geometry: SensorGeometry, duration_s: float, seed: int, *,
              pixel: tuple[int, int] | None = None, rate_hz: float = 3000.0) -> EventArrays:
    """One continuously misfiring pixel at a fixed firing rate."""
    if pixel is None:
        pixel = (geometry.width // 2, geometry.height // 2)
    px, py = pixel
    dur_us = int(round(duration_s * US_PER_S))
    period = max(1, int(round(US_PER_S / rate_hz)))
    ts = np.arange(0, dur_us, period, dtype=np.int64)
    n = len(ts)
    xs = np.full(n, px, dtype=np.int64)
    ys = np.full(n, py, dtype=np.int64)
    ps = np.ones(n, dtype=np.int8)
    return EventArrays.from_columns(xs, ys, ts, ps)


def blink(geometry: SensorGeometry, duration_s: float, seed: int, *,
          noise_rate: float = _BLINK_NOISE_RATE,
          burst_per_window: float = _BLINK_BURST_PER_WINDOW,
          burst_on_bias: float = _BLINK_BURST_ON_BIAS) -> EventArrays:
    rng = np.random.default_rng(seed)
    spec = blink_scene_spec(geometry)
    dur_us = int(round(duration_s * US_PER_S))

    parts = []

    oy, ox = np.nonzero(spec.outline_mask)
    if len(oy):
        lo = int(spec.outline_phase[0] * dur_us)
        hi = int(spec.outline_phase[1] * dur_us)
        n = int(round(_OUTLINE_EVENTS_PER_PX * len(oy)))
        pick = rng.integers(0, len(oy), size=n)
        ts = _uniform_times(rng, n, lo, hi)
        ps = rng.choice(np.array([-1, 1], dtype=np.int8), size=n)
        parts.append(_sorted(ox[pick], oy[pick], ts, ps))

    y0, x0, y1, x1 = spec.eye_block
    block_px = (y1 - y0) * (x1 - x0)
    lo = int(spec.blink_phase[0] * dur_us)
    hi = int(spec.blink_phase[1] * dur_us)
    burst_windows = (hi - lo) * 30.0 / US_PER_S  # burst density is specified per 30 Hz window
    n = int(round(burst_per_window * block_px * burst_windows))
    xs = rng.integers(x0, x1, size=n, dtype=np.int64)
    ys = rng.integers(y0, y1, size=n, dtype=np.int64)
    ts = _uniform_times(rng, n, lo, hi)
    ps = np.where(rng.random(n) < burst_on_bias, 1, -1).astype(np.int8)
    parts.append(_sorted(xs, ys, ts, ps))

    if noise_rate > 0:
        parts.append(static_noise(geometry, duration_s, seed + 1, rate=noise_rate))

    return merge_streams(*parts)


def synthesize_stream(scene: str, geometry: SensorGeometry, duration_s: float,
                      seed: int, **params) -> EventArrays:
    """Generate a deterministic synthetic stream for the named scene."""
    if duration_s <= 0:
        raise ValueError(f"duration must be positive, got {duration_s}")
    if scene == "moving_edge":
        return moving_edge(geometry, duration_s, seed, **params)
    if scene == "blink":
        return blink(geometry, duration_s, seed, **params)
    if scene == "static_noise":
        return static_noise(geometry, duration_s, seed, **params)
    if scene == "hot_pixel":
        return hot_pixel(geometry, duration_s, seed, **params)
    raise ValueError(f"unknown scene {scene!r}; expected one of {SCENES}")


def bench_scene(geometry: SensorGeometry, duration_s: float, seed: int) -> EventArrays:
    """The standard benchmark composite: moving edge over the blink sequence.

    Burst and edge densities are kept moderate so per-window event counts
    stay realistic for a sensor of this size and timings are stable.
    """
    return merge_streams(
        moving_edge(geometry, duration_s, seed, rate_ev_s=100_000.0),
        blink(geometry, duration_s, seed + 1000, burst_per_window=2.0,
              burst_on_bias=0.5))
