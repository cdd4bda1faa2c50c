"""Rendering of surfaces and decay maps to grayscale / colormapped PNGs,
plus the binary tensor container for converted sequences.

Gray mapping for normalized surface values v in [-1, 1]:
    v >= 0 -> round(128 + v * 127)    (0 -> 128, +1 -> 255)
    v <  0 -> round((1 + v) * 128)    (-1 -> 0)

Decay maps use a fixed 256-entry colormap, linearly interpolated between the
anchors below (dark = fast decay, bright = preserved).
"""

from __future__ import annotations

import io
import struct
from typing import Iterable

import numpy as np
from PIL import Image

from .events import SensorGeometry

TENSOR_MAGIC = b"SRF1"
_TENSOR_HEADER = struct.Struct("<4sHHIf")

# (index, (r, g, b)) anchors of the decay colormap.
_COLORMAP_ANCHORS = (
    (0, (0, 0, 0)),
    (64, (40, 12, 92)),
    (128, (170, 40, 96)),
    (192, (250, 140, 40)),
    (255, (252, 252, 160)),
)


def _build_colormap() -> np.ndarray:
    lut = np.zeros((256, 3), dtype=np.uint8)
    for (i0, c0), (i1, c1) in zip(_COLORMAP_ANCHORS, _COLORMAP_ANCHORS[1:]):
        span = i1 - i0
        for ch in range(3):
            lut[i0:i1 + 1, ch] = np.rint(
                np.linspace(c0[ch], c1[ch], span + 1)).astype(np.uint8)
    return lut


DECAY_COLORMAP = _build_colormap()
DECAY_COLORMAP.setflags(write=False)


def surface_to_gray(values: np.ndarray) -> np.ndarray:
    """Normalized surface in [-1, 1] to uint8 grayscale."""
    v = np.asarray(values, dtype=np.float64)
    gray = np.where(v >= 0, np.rint(128.0 + v * 127.0), np.rint((1.0 + v) * 128.0))
    return np.clip(gray, 0, 255).astype(np.uint8)


def decay_to_rgb(values: np.ndarray) -> np.ndarray:
    """Decay map in [0, 1] to RGB via the fixed colormap."""
    idx = np.clip(np.rint(np.asarray(values, dtype=np.float64) * 255.0), 0, 255).astype(np.intp)
    return DECAY_COLORMAP[idx]


def overlay_grid(image: np.ndarray, patch_size: int, value=255) -> np.ndarray:
    """Mark patch boundaries on a gray or RGB image (returns a copy)."""
    out = image.copy()
    out[::patch_size, ...] = value
    out[:, ::patch_size, ...] = value
    return out


def png_bytes(array: np.ndarray) -> bytes:
    mode = "L" if array.ndim == 2 else "RGB"
    buf = io.BytesIO()
    Image.fromarray(array, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def save_png(array: np.ndarray, path) -> None:
    with open(path, "wb") as fh:
        fh.write(png_bytes(array))


def write_surface_tensor(path, frames: Iterable[np.ndarray],
                         geometry: SensorGeometry, clip: float) -> int:
    """Write float32 frames into the SRF1 container; returns the frame count."""
    count = 0
    with open(path, "wb") as fh:
        fh.write(_TENSOR_HEADER.pack(TENSOR_MAGIC, geometry.width, geometry.height, 0, clip))
        for frame in frames:
            frame = np.ascontiguousarray(frame, dtype="<f4")
            if frame.shape != geometry.shape:
                raise ValueError(f"frame shape {frame.shape} != geometry {geometry.shape}")
            fh.write(frame.tobytes())
            count += 1
        fh.seek(0)
        fh.write(_TENSOR_HEADER.pack(TENSOR_MAGIC, geometry.width, geometry.height, count, clip))
    return count


def read_surface_tensor(path) -> tuple[SensorGeometry, float, np.ndarray]:
    with open(path, "rb") as fh:
        head = fh.read(_TENSOR_HEADER.size)
        if len(head) < _TENSOR_HEADER.size:
            raise ValueError(f"{path}: truncated tensor header")
        magic, width, height, count, clip = _TENSOR_HEADER.unpack(head)
        if magic != TENSOR_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        data = np.fromfile(fh, dtype="<f4", count=count * width * height)
    if data.size != count * width * height:
        raise ValueError(f"{path}: expected {count} frames, file is short")
    return SensorGeometry(width, height), clip, data.reshape(count, height, width)
