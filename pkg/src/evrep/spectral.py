"""Spectral patch scoring and the recursive quadtree decay grid.

A patch's decay value is the high-frequency share of its power spectrum:
``d = sum(POW_HF) / sum(POW)`` with a circular low-frequency mask of radius
``r * max(h, w)`` bins around the centered DC bin. Zero-energy patches score
1 (nothing to decay). Masks are precomputed and cached per (shape, radius),
already laid out for the unshifted spectrum so no per-patch fftshift runs.

Two scorers compute the same quantity:

* :func:`fft_decay` -- the reference: full complex FFT, masked bin sums.
  Used for every cell of the non-recursive grid and for terminal-size
  quadtree nodes, so those agree bit-for-bit across both grid builders.
* a fast path for subdividable (larger) regions: real-input half-spectrum
  FFT, low-frequency energy from a weighted contiguous row layout, total
  energy via Parseval from the spatial domain. Equivalent to the reference
  within float rounding (property-tested).

The quadtree starts at the full image and splits a region into four
floor/ceil quadrants while its score stays at or below the threshold and
both sides still exceed the minimum patch size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np
import scipy.fft

from ._kernels import lowfreq_half_power
from .events import SensorGeometry
from .surfaces import (DecayMap, Histogram, PatchGrid, RepresentationConfig,
                       grid_dims, interpolate_decay_map, patch_sums)

try:  # optional fast path for the large-region transform (2x over scipy here)
    import torch as _torch

    def _rfft2(values: np.ndarray) -> np.ndarray:
        return _torch.fft.rfft2(_torch.from_numpy(values)).numpy()
except ImportError:  # pragma: no cover - exercised on torch-free installs
    _torch = None

    def _rfft2(values: np.ndarray) -> np.ndarray:
        return np.asarray(scipy.fft.rfft2(values))


def _mask_radius_sq(shape: tuple[int, int], r: float) -> float:
    return (r * max(shape)) ** 2


@dataclass(frozen=True)
class HighPassMask:
    """Boolean keep-mask over the centered spectrum of one patch shape."""

    patch_shape: tuple[int, int]
    radius: float
    keep: np.ndarray  # bool, True = bin survives the high-pass


@lru_cache(maxsize=512)
def high_pass_mask(height: int, width: int, r: float) -> HighPassMask:
    """Centered keep-mask: bins within r * max(h, w) of DC are dropped."""
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"mask radius fraction must be in [0, 1], got {r}")
    dy = np.arange(height, dtype=np.int64) - height // 2
    dx = np.arange(width, dtype=np.int64) - width // 2
    dist_sq = dy[:, None] ** 2 + dx[None, :] ** 2
    keep = dist_sq > _mask_radius_sq((height, width), r)
    keep.setflags(write=False)
    return HighPassMask((height, width), r, keep)


@lru_cache(maxsize=512)
def _kept_flat_idx(height: int, width: int, r: float) -> np.ndarray:
    """Flat indices of kept bins in the unshifted spectrum layout."""
    keep = high_pass_mask(height, width, r).keep
    idx = np.flatnonzero(np.fft.ifftshift(keep))
    idx.setflags(write=False)
    return idx


@lru_cache(maxsize=512)
def _lowfreq_half_layout(height: int, width: int, r: float) -> np.ndarray:
    """Per-row max kept-low-frequency column for the rfft2 half spectrum.

    Row u of the unshifted spectrum has signed frequency du; the low-pass
    disk covers contiguous columns 0..cmax[u] (cmax = -1 for none). Uses the
    same integer distance-squared predicate as the full mask.
    """
    r2 = _mask_radius_sq((height, width), r)
    cmax = np.full(height, -1, dtype=np.int64)
    for u in range(height):
        du = u if u <= height // 2 else u - height
        if du * du > r2:
            continue
        j = int(math.sqrt(max(r2 - du * du, 0.0)))
        while (j + 1) ** 2 + du * du <= r2:
            j += 1
        while j >= 0 and j * j + du * du > r2:
            j -= 1
        cmax[u] = j
    cmax.setflags(write=False)
    return cmax


def power_spectrum(patch: np.ndarray) -> np.ndarray:
    """|FFT2(patch)|^2 with the DC bin centered (unnormalized forward FFT)."""
    patch = np.asarray(patch, dtype=np.float64)
    if patch.ndim != 2 or patch.size == 0:
        raise ValueError(f"patch must be a non-degenerate 2-D grid, got shape {patch.shape}")
    spectrum = np.abs(np.fft.fft2(patch)) ** 2
    return np.fft.fftshift(spectrum)


def fft_decay(patch: np.ndarray, r: float, invert: bool = False) -> float:
    """High-frequency energy fraction of one patch, in [0, 1].

    Zero total energy scores 1 in both directions: a silent patch never
    flushes the surface. ``invert`` returns 1 - d otherwise.
    """
    patch = np.ascontiguousarray(patch, dtype=np.float64)
    h, w = patch.shape
    freq = np.fft.fft2(patch)
    power = freq.real ** 2 + freq.imag ** 2
    total = float(power.sum())
    if total == 0.0:
        return 1.0
    kept = float(power.ravel()[_kept_flat_idx(h, w, r)].sum())
    d = min(max(kept / total, 0.0), 1.0)
    return 1.0 - d if invert else d


def _fast_region_score(patch: np.ndarray, r: float, invert: bool = False) -> float:
    """Same quantity as fft_decay via rfft2 + Parseval; for large regions."""
    patch = np.ascontiguousarray(patch, dtype=np.float64)
    h, w = patch.shape
    flat = patch.ravel()
    spatial = float(np.dot(flat, flat))
    if spatial == 0.0:
        return 1.0
    total = h * w * spatial
    freq = np.ascontiguousarray(_rfft2(patch))
    low = lowfreq_half_power(freq, _lowfreq_half_layout(h, w, r), w // 2, w % 2 == 0)
    d = min(max(1.0 - low / total, 0.0), 1.0)
    return 1.0 - d if invert else d


@dataclass(frozen=True)
class QuadTreeNode:
    y0: int
    x0: int
    height: int
    width: int
    score: float
    children: tuple["QuadTreeNode", ...] = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def region(self) -> tuple[int, int, int, int]:
        return (self.y0, self.x0, self.height, self.width)

    def leaves(self) -> Iterator["QuadTreeNode"]:
        if self.is_leaf:
            yield self
        else:
            for child in self.children:
                yield from child.leaves()


def recursive_fft_grid(hist: Histogram, config: RepresentationConfig,
                       min_patch_size: int | None = None) -> QuadTreeNode:
    """Adaptive quadtree of spectral decay scores over the histogram.

    A region splits while its score stays <= T_d and both sides exceed the
    minimum patch size; terminal-size regions are scored by the reference
    :func:`fft_decay` so fully subdivided leaves match the uniform grid.
    """
    values = hist.values
    h, w = values.shape
    if min_patch_size is None:
        min_patch_size = config.patch_size(SensorGeometry(w, h))
    if min_patch_size < 2:
        raise ValueError(f"minimum patch size must be >= 2, got {min_patch_size}")

    r, t_d, invert = config.r, config.t_d, config.fft_invert

    def build(y0: int, x0: int, rh: int, rw: int) -> QuadTreeNode:
        region = values[y0:y0 + rh, x0:x0 + rw]
        splittable = rh > min_patch_size and rw > min_patch_size
        if splittable:
            score = _fast_region_score(region, r, invert)
        else:
            score = fft_decay(region, r, invert)
        if score > t_d or not splittable:
            return QuadTreeNode(y0, x0, rh, rw, score)
        h2, w2 = rh // 2, rw // 2
        children = (build(y0, x0, h2, w2),
                    build(y0, x0 + w2, h2, rw - w2),
                    build(y0 + h2, x0, rh - h2, w2),
                    build(y0 + h2, x0 + w2, rh - h2, rw - w2))
        return QuadTreeNode(y0, x0, rh, rw, score, children)

    return build(0, 0, h, w)


def nonrecursive_fft_grid(hist: Histogram, config: RepresentationConfig,
                          min_patch_size: int | None = None,
                          workers: int = 1) -> PatchGrid:
    """Reference grid: fft_decay on every cell of the uniform min-size grid.

    ``workers > 1`` scores cells on a thread pool (numpy's FFT releases the
    GIL); cells are independent, so results are bit-identical to the
    sequential loop regardless of completion order.
    """
    values = hist.values
    h, w = values.shape
    if min_patch_size is None:
        min_patch_size = config.patch_size(SensorGeometry(w, h))
    rows, cols = grid_dims(SensorGeometry(w, h), min_patch_size)
    scores = np.empty((rows, cols))

    def cell(i: int, j: int) -> float:
        y0 = i * min_patch_size
        x0 = j * min_patch_size
        region = values[y0:min(y0 + min_patch_size, h), x0:min(x0 + min_patch_size, w)]
        return fft_decay(region, config.r, config.fft_invert)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {(i, j): pool.submit(cell, i, j)
                       for i in range(rows) for j in range(cols)}
        for (i, j), fut in futures.items():
            scores[i, j] = fut.result()
    else:
        for i in range(rows):
            for j in range(cols):
                scores[i, j] = cell(i, j)
    return PatchGrid(min_patch_size, rows, cols, (h, w), scores=scores, decays=scores)


def quadtree_cell_grid(tree: QuadTreeNode, min_patch_size: int) -> PatchGrid:
    """Project leaf scores onto the uniform min-size grid (area-weighted)."""
    h, w = tree.height, tree.width
    filled = np.empty((h, w))
    for leaf in tree.leaves():
        filled[leaf.y0:leaf.y0 + leaf.height, leaf.x0:leaf.x0 + leaf.width] = leaf.score
    rows, cols = grid_dims(SensorGeometry(w, h), min_patch_size)
    grid = PatchGrid(min_patch_size, rows, cols, (h, w), scores=np.zeros((rows, cols)))
    means = patch_sums(filled, min_patch_size) / grid.areas()
    return PatchGrid(min_patch_size, rows, cols, (h, w), scores=means, decays=means)


def rasterize_quadtree(tree: QuadTreeNode, geometry: SensorGeometry,
                       min_patch_size: int) -> DecayMap:
    """Leaf scores -> uniform grid projection -> bilinear per-pixel field."""
    if (tree.height, tree.width) != geometry.shape:
        raise ValueError(f"tree covers {tree.height}x{tree.width}, image is {geometry.shape}")
    if tree.is_leaf:
        return DecayMap.constant(geometry, tree.score)
    grid = quadtree_cell_grid(tree, min_patch_size)
    return interpolate_decay_map(grid, geometry)
