"""End-to-end descriptor encoding: RGB image to colourised OC-LBCP image."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np

from .color_mapping import ColorPalette, colorize
from .image_core import ButterworthConfig, butterworth_homomorphic, resize_bilinear, to_gray
from .texture_codes import DEFAULT_LTP_THRESHOLD, oclbcp_map


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("OCLBCP_THREADS", "1")))
    except ValueError:
        return 1


def encode_codes(rgb: np.ndarray, filt: ButterworthConfig | None = None,
                 t: float = DEFAULT_LTP_THRESHOLD) -> np.ndarray:
    return oclbcp_map(butterworth_homomorphic(to_gray(rgb), filt), t)


def encode(rgb: np.ndarray, palette: ColorPalette, filt: ButterworthConfig | None = None,
           t: float = DEFAULT_LTP_THRESHOLD) -> np.ndarray:
    return colorize(encode_codes(rgb, filt, t), palette)


def prepare_pair(rgb: np.ndarray, palette: ColorPalette, size: int = 80,
                 filt: ButterworthConfig | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Resize to the network input size and compute the descriptor image."""
    rgb = resize_bilinear(rgb, size, size)
    return rgb, encode(rgb, palette, filt)


def encode_many(images: Sequence[np.ndarray], palette: ColorPalette, size: int = 80,
                filt: ButterworthConfig | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Stack RGB and descriptor images; OCLBCP_THREADS caps the worker pool."""
    if not len(images):
        empty = np.zeros((0, size, size, 3), dtype=np.uint8)
        return empty, empty.copy()
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        pairs = list(pool.map(lambda im: prepare_pair(im, palette, size, filt), images))
    return np.stack([p[0] for p in pairs]), np.stack([p[1] for p in pairs])
