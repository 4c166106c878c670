"""Colour palette for OC-LBCP codes.

Each 8-bit code is read as a circular histogram over its set-bit positions,
codes are compared with the circular Earth Mover's Distance, the resulting
256x256 distance matrix is embedded in 3-D with classical MDS, and pairs of
embedded codes are summed and floored into an 8-bit colour table.
"""
from __future__ import annotations

import hashlib
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

N_CODES = 256
N_BITS = 8
PALETTE_MAGIC = b"OCLB"
PALETTE_VERSION = 1
CHANNEL_RANGE = 127.0


def code_to_distribution(code: int) -> np.ndarray:
    """Unit mass spread evenly over the set bits; code 0 is uniform."""
    if not 0 <= int(code) < N_CODES:
        raise ValueError(f"code out of range: {code}")
    bits = np.array([(int(code) >> i) & 1 for i in range(N_BITS)], dtype=np.float64)
    if bits.sum() == 0:
        bits[:] = 1.0
    return bits / bits.sum()


def _all_distributions() -> np.ndarray:
    return np.stack([code_to_distribution(c) for c in range(N_CODES)])


def emd_circular(p, q) -> float:
    """Exact EMD between two histograms on a ring with unit hop cost.

    Cutting the ring at bin k turns the problem into a linear EMD whose cost
    is sum_i |D_i - D_k| with D the prefix sums of p - q; the optimum is
    attained at one of the cuts.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError("emd_circular expects two 1-D histograms of equal length")
    if abs(p.sum() - 1.0) > 1e-9 or abs(q.sum() - 1.0) > 1e-9:
        raise ValueError("emd_circular expects normalised histograms")
    if np.any(p < 0) or np.any(q < 0):
        raise ValueError("emd_circular expects non-negative histograms")
    prefix = np.cumsum(p - q)
    return float(np.abs(prefix[:, None] - prefix[None, :]).sum(axis=0).min())


def build_distance_matrix() -> np.ndarray:
    """Circular EMD between every pair of 8-bit codes (256x256)."""
    dists = _all_distributions()
    prefix = np.cumsum(dists[:, None, :] - dists[None, :, :], axis=-1)
    cost = np.abs(prefix[..., :, None] - prefix[..., None, :]).sum(axis=-2).min(axis=-1)
    cost = 0.5 * (cost + cost.T)
    np.fill_diagonal(cost, 0.0)
    return cost


def classical_mds(d: np.ndarray, dims: int = 3) -> np.ndarray:
    """Torgerson scaling of a distance matrix into ``dims`` coordinates.

    Columns are ordered by descending eigenvalue, and each column is flipped
    so that its largest-magnitude entry is positive.
    """
    d = np.asarray(d, dtype=np.float64)
    n = d.shape[0]
    if d.shape != (n, n):
        raise ValueError("distance matrix must be square")
    if not np.allclose(d, d.T) or np.any(np.abs(np.diag(d)) > 1e-12):
        raise ValueError("distance matrix must be symmetric with zero diagonal")
    centering = np.eye(n) - np.full((n, n), 1.0 / n)
    gram = -0.5 * centering @ (d**2) @ centering
    gram = 0.5 * (gram + gram.T)
    evals, evecs = np.linalg.eigh(gram)
    order = np.argsort(evals, kind="stable")[::-1]
    evals, evecs = evals[order], evecs[:, order]
    tol = 1e-10 * max(1.0, abs(evals[0]) if evals.size else 1.0)
    keep = min(dims, int(np.sum(evals[:dims] > tol)))
    coords = np.zeros((n, dims))
    if keep < dims:
        warnings.warn(
            f"only {keep} positive eigenvalues; padding {dims - keep} MDS dimensions with zeros",
            RuntimeWarning,
            stacklevel=2,
        )
    for i in range(keep):
        col = evecs[:, i] * np.sqrt(evals[i])
        if col[np.argmax(np.abs(col))] < 0:
            col = -col
        coords[:, i] = col
    return coords


def pairwise_euclidean(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt((diff**2).sum(axis=-1))


def distance_correlation(d: np.ndarray, embedding: np.ndarray) -> float:
    """Pearson correlation between input distances and embedded distances."""
    iu = np.triu_indices(d.shape[0], k=1)
    return float(np.corrcoef(d[iu], pairwise_euclidean(embedding)[iu])[0, 1])


def channel_levels(embedding: np.ndarray) -> np.ndarray:
    """Map every embedding channel affinely onto [0, 127]; flat channels go to 0."""
    embedding = np.asarray(embedding, dtype=np.float64)
    lo = embedding.min(axis=0)
    span = embedding.max(axis=0) - lo
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (embedding - lo) / safe * CHANNEL_RANGE, 0.0)


def build_pair_matrix(embedding: np.ndarray) -> np.ndarray:
    """Delta(u, v) = floor(m(u) + m(v)) channelwise, as uint8 (256, 256, 3)."""
    levels = channel_levels(embedding)
    return np.floor(levels[:, None, :] + levels[None, :, :]).astype(np.uint8)


@dataclass(frozen=True)
class ColorPalette:
    embedding: np.ndarray  # (256, 3) float64
    pair_matrix: np.ndarray  # (256, 256, 3) uint8

    @property
    def colors(self) -> np.ndarray:
        """Per-code colour, the diagonal of the pair matrix."""
        idx = np.arange(self.pair_matrix.shape[0])
        return self.pair_matrix[idx, idx]

    def to_bytes(self) -> bytes:
        header = PALETTE_MAGIC + struct.pack("<I", PALETTE_VERSION)
        emb = np.ascontiguousarray(self.embedding, dtype="<f8").tobytes()
        pairs = np.ascontiguousarray(self.pair_matrix, dtype=np.uint8).tobytes()
        return header + emb + pairs

    @classmethod
    def from_bytes(cls, blob: bytes) -> "ColorPalette":
        if blob[:4] != PALETTE_MAGIC:
            raise ValueError("not a palette file (bad magic)")
        (version,) = struct.unpack("<I", blob[4:8])
        if version != PALETTE_VERSION:
            raise ValueError(f"unsupported palette version {version}")
        n_emb = N_CODES * 3 * 8
        n_pairs = N_CODES * N_CODES * 3
        if len(blob) != 8 + n_emb + n_pairs:
            raise ValueError("truncated or oversized palette file")
        emb = np.frombuffer(blob, dtype="<f8", count=N_CODES * 3, offset=8).reshape(N_CODES, 3)
        pairs = np.frombuffer(blob, dtype=np.uint8, offset=8 + n_emb).reshape(N_CODES, N_CODES, 3)
        return cls(emb.astype(np.float64), pairs.copy())

    def save(self, path: str | Path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "ColorPalette":
        return cls.from_bytes(Path(path).read_bytes())

    def sha256(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()


def build_palette(dims: int = 3) -> ColorPalette:
    if dims != 3:
        raise ValueError("colour palettes need exactly 3 MDS dimensions")
    embedding = classical_mds(build_distance_matrix(), dims)
    return ColorPalette(embedding, build_pair_matrix(embedding))


def colorize(codes: np.ndarray, palette: ColorPalette) -> np.ndarray:
    """Replace every code by its palette colour, giving an (h, w, 3) uint8 image."""
    codes = np.asarray(codes)
    if codes.dtype != np.uint8:
        if codes.size and (codes.min() < 0 or codes.max() >= N_CODES):
            raise ValueError("codes must lie in [0, 255]")
        codes = codes.astype(np.uint8)
    return palette.colors[codes]
