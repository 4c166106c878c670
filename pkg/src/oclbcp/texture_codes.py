"""LBP / LTP codes and their orthogonal combination into OC-LBCP code maps.

Neighbours are read clockwise from the top-left of the 3x3 window and
neighbour ``i`` owns bit ``i`` of every 8-bit code.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# (row, col) offsets, clockwise starting at the top-left corner
NEIGHBOR_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))
EVEN_BITS = 0b01010101
ODD_BITS = 0b10101010
DEFAULT_LTP_THRESHOLD = 5.0 / 255.0

_WEIGHTS = np.array([1 << i for i in range(8)], dtype=np.int64)


@dataclass(frozen=True)
class LtpCodePair:
    positive: int
    negative: int
    threshold: float


@dataclass(frozen=True)
class OrthogonalGroups:
    a1: np.ndarray | int
    a2: np.ndarray | int
    a3: np.ndarray | int
    a4: np.ndarray | int

    def stack(self) -> np.ndarray:
        return np.stack(np.broadcast_arrays(self.a1, self.a2, self.a3, self.a4))


def _window_neighbors(window) -> tuple[np.ndarray, float]:
    window = np.asarray(window, dtype=np.float64)
    if window.shape != (3, 3):
        raise ValueError(f"expected a 3x3 window, got shape {window.shape}")
    nbrs = np.array([window[1 + dr, 1 + dc] for dr, dc in NEIGHBOR_OFFSETS])
    return nbrs, window[1, 1]


def _pack(bits: np.ndarray) -> int:
    return int(bits.astype(np.int64) @ _WEIGHTS)


def lbp_code(window) -> int:
    nbrs, center = _window_neighbors(window)
    return _pack(nbrs >= center)


def ltp_code(window, t: float = DEFAULT_LTP_THRESHOLD) -> LtpCodePair:
    if t < 0:
        raise ValueError("LTP threshold must be non-negative")
    nbrs, center = _window_neighbors(window)
    diff = nbrs - center
    up = diff >= t
    # with t == 0 a tie meets both tests; the ternary value is +1 then
    return LtpCodePair(_pack(up), _pack((diff <= -t) & ~up), t)


def orthogonal_combine(lbp, ltp, ltp_neg=None) -> OrthogonalGroups:
    """Cross the even/odd neighbour subsets of LBP with those of LTP+ and LTP-.

    ``ltp`` is either an :class:`LtpCodePair` or the positive code, in which
    case ``ltp_neg`` carries the negative one. Works elementwise on ints or
    integer arrays.
    """
    if isinstance(ltp, LtpCodePair):
        ltp, ltp_neg = ltp.positive, ltp.negative
    lbp = np.asarray(lbp, dtype=np.uint8)
    pos = np.asarray(ltp, dtype=np.uint8)
    neg = np.asarray(0 if ltp_neg is None else ltp_neg, dtype=np.uint8)
    groups = OrthogonalGroups(
        a1=(pos & EVEN_BITS) | (lbp & ODD_BITS),
        a2=(pos & ODD_BITS) | (lbp & EVEN_BITS),
        a3=(neg & EVEN_BITS) | (lbp & ODD_BITS),
        a4=(neg & ODD_BITS) | (lbp & EVEN_BITS),
    )
    if groups.a1.ndim == 0:
        return OrthogonalGroups(*(int(a) for a in (groups.a1, groups.a2, groups.a3, groups.a4)))
    return groups


def combine_max(groups: OrthogonalGroups) -> np.ndarray:
    return groups.stack().max(axis=0).astype(np.uint8)


def _neighbor_planes(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    h, w = img.shape
    padded = np.pad(img, 1, mode="edge")
    planes = np.stack([padded[1 + dr:1 + dr + h, 1 + dc:1 + dc + w] for dr, dc in NEIGHBOR_OFFSETS])
    return planes, img


def _pack_planes(bits: np.ndarray) -> np.ndarray:
    return np.tensordot(_WEIGHTS, bits.astype(np.int64), axes=(0, 0)).astype(np.uint8)


def code_planes(img: np.ndarray, t: float = DEFAULT_LTP_THRESHOLD):
    """Per-pixel LBP, LTP+ and LTP- codes with replicate-padded borders."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] < 3 or img.shape[1] < 3:
        raise ValueError(f"code maps need a 2-D image of at least 3x3, got shape {img.shape}")
    planes, center = _neighbor_planes(img)
    diff = planes - center[None]
    lbp = _pack_planes(diff >= 0)
    up = diff >= t
    pos = _pack_planes(up)
    neg = _pack_planes((diff <= -t) & ~up)
    return lbp, pos, neg


def oclbcp_map(img: np.ndarray, t: float = DEFAULT_LTP_THRESHOLD) -> np.ndarray:
    """OC-LBCP code map: the largest of the four orthogonal group codes per pixel."""
    lbp, pos, neg = code_planes(img, t)
    return combine_max(orthogonal_combine(lbp, pos, neg))
