"""Closed-set identification: cosine scoring, left/right sum-rule fusion, CMC.

Scores default to cosine similarity ranked in descending order. The
``"one_minus_cosine"`` rule keeps the dissimilarity form 1 - cos and ranks
ascending; both rules produce the same decisions and rankings.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

RULES = ("cosine", "one_minus_cosine")
Z_95 = 1.96


@dataclass(frozen=True)
class GalleryEntry:
    subject: Hashable
    o_left: np.ndarray
    o_right: np.ndarray


@dataclass(frozen=True)
class Probe:
    o_left: np.ndarray
    o_right: np.ndarray
    subject: Hashable | None = None


@dataclass(frozen=True)
class CmcCurve:
    ranks: np.ndarray  # 1..K
    per_repetition: np.ndarray  # (repetitions, K)

    @property
    def mean(self) -> np.ndarray:
        return self.per_repetition.mean(axis=0)

    @property
    def half_width(self) -> np.ndarray:
        n = self.per_repetition.shape[0]
        if n < 2:
            return np.zeros(self.per_repetition.shape[1])
        return Z_95 * self.per_repetition.std(axis=0, ddof=1) / np.sqrt(n)

    @property
    def ci_low(self) -> np.ndarray:
        return self.mean - self.half_width

    @property
    def ci_high(self) -> np.ndarray:
        return self.mean + self.half_width

    def rate(self, k: int) -> float:
        return float(self.mean[k - 1])


def _check_rule(rule: str) -> None:
    if rule not in RULES:
        raise ValueError(f"unknown score rule {rule!r}; expected one of {RULES}")


def side_score(g, p, rule: str = "cosine") -> float:
    """Cosine similarity of two vectors (or 1 - cosine under the dissimilarity rule)."""
    _check_rule(rule)
    g = np.asarray(g, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if g.shape != p.shape:
        raise ValueError(f"score vectors differ in length: {g.shape} vs {p.shape}")
    ng, np_ = np.linalg.norm(g), np.linalg.norm(p)
    if ng == 0 or np_ == 0:
        raise ValueError("cosine score undefined for a zero vector")
    cos = float(g @ p / (ng * np_))
    return cos if rule == "cosine" else 1.0 - cos


def fuse_lr(g: GalleryEntry, p_left, p_right, rule: str = "cosine") -> float:
    return side_score(g.o_left, p_left, rule) + side_score(g.o_right, p_right, rule)


def _rank_key(rule: str):
    sign = -1.0 if rule == "cosine" else 1.0
    return lambda item: (sign * item[1], item[0])


def identify(gallery: Sequence[GalleryEntry], p_left, p_right, rule: str = "cosine"):
    """Rank gallery subjects for one probe.

    Returns ``(best_subject, [(subject, fused_score), ...])`` ordered best
    first; equal scores fall back to ascending subject id.
    """
    if not gallery:
        raise ValueError("cannot identify against an empty gallery")
    scored = [(g.subject, fuse_lr(g, p_left, p_right, rule)) for g in gallery]
    ranked = sorted(scored, key=_rank_key(rule))
    return ranked[0][0], ranked


def _unit_rows(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("cosine score undefined for a zero vector")
    return m / norms


def score_table(gallery: Sequence[GalleryEntry], probes: Sequence[Probe], rule: str = "cosine") -> np.ndarray:
    """Fused scores, shape (len(gallery), len(probes))."""
    _check_rule(rule)
    gl = _unit_rows(np.stack([g.o_left for g in gallery]))
    gr = _unit_rows(np.stack([g.o_right for g in gallery]))
    pl = _unit_rows(np.stack([p.o_left for p in probes]))
    pr = _unit_rows(np.stack([p.o_right for p in probes]))
    cos = gl @ pl.T + gr @ pr.T
    return cos if rule == "cosine" else 2.0 - cos


def true_ranks(scores: np.ndarray, gallery_ids: Sequence, probe_ids: Sequence, rule: str = "cosine") -> np.ndarray:
    """1-based rank of each probe's true subject under the deterministic ordering."""
    _check_rule(rule)
    gallery_ids = list(gallery_ids)
    index = {sid: i for i, sid in enumerate(gallery_ids)}
    ranks = np.empty(len(probe_ids), dtype=int)
    for j, pid in enumerate(probe_ids):
        if pid not in index:
            raise ValueError(f"probe subject {pid!r} is not enrolled in the gallery")
        items = sorted(zip(gallery_ids, scores[:, j]), key=_rank_key(rule))
        ranks[j] = 1 + [sid for sid, _ in items].index(pid)
    return ranks


def cmc_from_ranks(ranks: np.ndarray, gallery_size: int) -> np.ndarray:
    ks = np.arange(1, gallery_size + 1)
    return (np.asarray(ranks)[None, :] <= ks[:, None]).mean(axis=1)


def cmc_single(gallery: Sequence[GalleryEntry], probes: Sequence[Probe], rule: str = "cosine") -> np.ndarray:
    scores = score_table(gallery, probes, rule)
    ranks = true_ranks(scores, [g.subject for g in gallery], [p.subject for p in probes], rule)
    return cmc_from_ranks(ranks, len(gallery))


def cmc(repetitions: Sequence[tuple[Sequence[GalleryEntry], Sequence[Probe]]], rule: str = "cosine") -> CmcCurve:
    """CMC over repeated gallery/probe draws, with a normal 95% interval across draws."""
    if not repetitions:
        raise ValueError("need at least one repetition")
    curves = [cmc_single(g, p, rule) for g, p in repetitions]
    sizes = {len(c) for c in curves}
    if len(sizes) != 1:
        raise ValueError("all repetitions must use galleries of the same size")
    return CmcCurve(np.arange(1, sizes.pop() + 1), np.stack(curves))


def build_gallery(vectors: dict) -> list[GalleryEntry]:
    """Average each subject's (left, right) head-sum vectors into one entry.

    ``vectors`` maps subject -> (left rows, right rows).
    """
    gallery = []
    for sid in sorted(vectors):
        left, right = vectors[sid]
        gallery.append(GalleryEntry(sid, np.mean(np.atleast_2d(left), axis=0), np.mean(np.atleast_2d(right), axis=0)))
    return gallery
