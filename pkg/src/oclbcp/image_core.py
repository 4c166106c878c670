"""Image rasters, grayscale conversion, bilinear resizing and homomorphic filtering.

Gray images are float64 arrays of shape (h, w) with values in [0, 1]. Colour
images are uint8 arrays of shape (h, w, 3).
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])
LOG_FLOOR = 1e-6


@dataclass(frozen=True)
class ButterworthConfig:
    order: int = 2
    cutoff: float = 0.05
    high_boost: float = 1.5
    low_gain: float = 0.5

    def __post_init__(self):
        if self.order < 1:
            raise ValueError(f"order must be >= 1, got {self.order}")
        if not 0.0 < self.cutoff <= 0.5:
            raise ValueError(f"cutoff must lie in (0, 0.5], got {self.cutoff}")
        if self.high_boost < 1.0:
            raise ValueError(f"high_boost must be >= 1, got {self.high_boost}")
        if not 0.0 <= self.low_gain < 1.0:
            raise ValueError(f"low_gain must lie in [0, 1), got {self.low_gain}")


def check_gray(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"gray image must be 2-D, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("gray image contains non-finite values")
    if img.size and (img.min() < 0.0 or img.max() > 1.0):
        raise ValueError("gray image values must lie in [0, 1]")
    return img


def check_color(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"colour image must have shape (h, w, 3), got {img.shape}")
    return img


def to_gray(img: np.ndarray) -> np.ndarray:
    """BT.601 luma of an RGB uint8 image, scaled to [0, 1]."""
    img = check_color(img).astype(np.float64)
    return np.clip(img @ LUMA_WEIGHTS / 255.0, 0.0, 1.0)


def _bilinear_axis(n_in: int, n_out: int):
    # half-pixel centres, edge-clamped
    pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    pos = np.clip(pos, 0.0, n_in - 1)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = pos - lo
    return lo, hi, frac


def resize_bilinear(img: np.ndarray, h: int, w: int) -> np.ndarray:
    """Resize a gray or colour image with bilinear interpolation.

    Colour (uint8) images are interpolated in float and rounded back.
    Returns an unmodified copy when the size already matches.
    """
    if h < 1 or w < 1:
        raise ValueError(f"target size must be positive, got {h}x{w}")
    img = np.asarray(img)
    if img.shape[:2] == (h, w):
        return img.copy()
    src = img.astype(np.float64)
    y0, y1, fy = _bilinear_axis(img.shape[0], h)
    x0, x1, fx = _bilinear_axis(img.shape[1], w)
    if src.ndim == 3:
        fy = fy[:, None, None]
        fx = fx[None, :, None]
    else:
        fy = fy[:, None]
        fx = fx[None, :]
    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bottom = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    out = top * (1 - fy) + bottom * fy
    if img.dtype == np.uint8:
        return np.clip(np.rint(out), 0, 255).astype(np.uint8)
    return out


def butterworth_gain(radius: np.ndarray, cfg: ButterworthConfig) -> np.ndarray:
    """High-emphasis Butterworth transfer function evaluated at radial frequency."""
    radius = np.asarray(radius, dtype=np.float64)
    highpass = 1.0 - 1.0 / (1.0 + (radius / cfg.cutoff) ** (2 * cfg.order))
    return cfg.low_gain + (cfg.high_boost - cfg.low_gain) * highpass


def frequency_radius(h: int, w: int) -> np.ndarray:
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    return np.sqrt(fy**2 + fx**2)


def butterworth_homomorphic(img: np.ndarray, cfg: ButterworthConfig | None = None) -> np.ndarray:
    """Suppress slowly varying illumination and boost reflectance detail.

    The image is taken to the log domain, filtered with a high-emphasis
    Butterworth response and exponentiated back. The result is affinely
    rescaled to [0, 1], which also removes any global multiplicative gain.
    A flat image has nothing to rescale and is returned unchanged.
    """
    cfg = cfg or ButterworthConfig()
    img = np.asarray(img, dtype=np.float64)
    if not np.all(np.isfinite(img)):
        raise ValueError("butterworth_homomorphic: non-finite input")
    img = check_gray(img)
    logged = np.log(np.maximum(img, LOG_FLOOR))
    spectrum = np.fft.fft2(logged)
    gain = butterworth_gain(frequency_radius(*img.shape), cfg)
    filtered = np.real(np.fft.ifft2(spectrum * gain))
    out = np.exp(filtered)
    lo, hi = out.min(), out.max()
    if hi - lo <= 1e-9 * hi:
        return img.copy()
    return (out - lo) / (hi - lo)


# --- file I/O -------------------------------------------------------------

def read_image(path: str | Path) -> np.ndarray:
    """Read a PNG or binary PPM file as an RGB uint8 array."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def write_png(path: str | Path, img: np.ndarray) -> None:
    img = np.asarray(img)
    if img.dtype != np.uint8:
        img = gray_to_uint8(img)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(img).save(path, format="PNG")


def gray_to_uint8(img: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(check_gray(img) * 255.0), 0, 255).astype(np.uint8)
