"""Numba kernels for the per-pixel hot loops.

All kernels run with fastmath disabled so every floating-point operation
rounds exactly like the equivalent numpy / pure-Python expression. Tests
compare them against naive reference loops written in the same operation
order, so the summation order inside each kernel is load-bearing: do not
reorder the arithmetic.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def correlate3x3(src, kernel):
    """3x3 correlation with zero padding outside the image.

    The accumulation order is kernel raster order (di, dj), matching the
    naive per-pixel reference. For symmetric kernels this equals convolution.
    """
    h, w = src.shape
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            s = 0.0
            for di in range(3):
                yy = y + di - 1
                if yy < 0 or yy >= h:
                    continue
                for dj in range(3):
                    xx = x + dj - 1
                    if xx < 0 or xx >= w:
                        continue
                    s += kernel[di, dj] * src[yy, xx]
            out[y, x] = s
    return out


@njit(cache=True)
def bilinear_apply(grid, i0, i1, j0, j1, ty, tx, lo, hi):
    """Gather-and-lerp of a coarse grid onto precomputed pixel weights.

    i0/i1 (j0/j1) are the clamped lower/upper grid rows (cols) per pixel and
    ty/tx the fractional weights. Output is clamped to [lo, hi] to keep the
    convex-combination bound exact under rounding.
    """
    h, w = i0.shape
    out = np.empty((h, w))
    for y in range(h):
        for x in range(w):
            a = i0[y, x]
            b = i1[y, x]
            c = j0[y, x]
            d = j1[y, x]
            t = ty[y, x]
            s = tx[y, x]
            v = (grid[a, c] * (1.0 - t) * (1.0 - s)
                 + grid[a, d] * (1.0 - t) * s
                 + grid[b, c] * t * (1.0 - s)
                 + grid[b, d] * t * s)
            if v < lo:
                v = lo
            elif v > hi:
                v = hi
            out[y, x] = v
    return out


@njit(cache=True)
def leaky_update(hist, decay, prev):
    """Elementwise hist + decay * prev, one pass."""
    h, w = hist.shape
    out = np.empty((h, w))
    for y in range(h):
        for x in range(w):
            out[y, x] = hist[y, x] + decay[y, x] * prev[y, x]
    return out


@njit(cache=True)
def leaky_update_scalar(hist, decay, prev):
    h, w = hist.shape
    out = np.empty((h, w))
    for y in range(h):
        for x in range(w):
            out[y, x] = hist[y, x] + decay * prev[y, x]
    return out


@njit(cache=True)
def lowfreq_half_power(freq, cmax, half_col, last_col_single):
    """Masked low-frequency energy from an rfft2 half spectrum.

    freq: (h, w//2 + 1) complex half spectrum. cmax[u] is the largest kept
    column for row u (-1 for none); columns are contiguous from 0. Column 0
    is self-conjugate (weight 1); so is column `half_col` when
    `last_col_single` (even full width). Everything else counts twice for
    its mirrored half.
    """
    h = freq.shape[0]
    wh = freq.shape[1]
    total = 0.0
    for u in range(h):
        c = cmax[u]
        if c < 0:
            continue
        if c > wh - 1:
            c = wh - 1
        v = freq[u, 0]
        total += v.real * v.real + v.imag * v.imag
        for j in range(1, c + 1):
            v = freq[u, j]
            p = v.real * v.real + v.imag * v.imag
            if j == half_col and last_col_single:
                total += p
            else:
                total += 2.0 * p
    return total


def warm_kernels():
    """Force-compile every kernel on tiny inputs (used by the bench warmup)."""
    one = np.ones((2, 2))
    correlate3x3(one, np.zeros((3, 3)))
    idx = np.zeros((2, 2), dtype=np.int64)
    bilinear_apply(one, idx, idx, idx, idx, one * 0.0, one * 0.0, 0.0, 1.0)
    leaky_update(one, one, one)
    leaky_update_scalar(one, 0.5, one)
    lowfreq_half_power(np.zeros((2, 2), dtype=np.complex128),
                       np.zeros(2, dtype=np.int64), 1, True)
