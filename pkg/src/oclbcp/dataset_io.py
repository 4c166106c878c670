"""Dataset layout, subject-level splits and a synthetic periocular generator.

On disk a dataset looks like ``root/<subject_id>/{left,right}/*.png``. The
i-th left and i-th right image of a subject (sorted by file name) form one
capture; gallery/probe assignment works on captures so that every probe has
both oculars.
"""
from __future__ import annotations

import json
import math
import os
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .image_core import read_image, write_png

MANIFEST_VERSION = 1
SIDES = ("left", "right")
IMAGE_SUFFIXES = (".png", ".ppm")


@dataclass(frozen=True)
class SplitConfig:
    train_subject_count: int
    repetitions: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.train_subject_count < 0:
            raise ValueError("train_subject_count must be >= 0")


@dataclass(frozen=True)
class GalleryProbe:
    gallery: dict[str, list[int]]
    probe: dict[str, list[int]]


@dataclass
class DatasetManifest:
    root: str
    subjects: dict[str, dict[str, list[str]]]
    seed: int | None = None
    train: list[str] = field(default_factory=list)
    test: list[str] = field(default_factory=list)
    splits: list[GalleryProbe] = field(default_factory=list)

    @property
    def subject_ids(self) -> list[str]:
        return sorted(self.subjects)

    def num_images(self) -> int:
        return sum(len(paths) for sides in self.subjects.values() for paths in sides.values())

    def captures(self, subject: str) -> int:
        sides = self.subjects[subject]
        return min(len(sides["left"]), len(sides["right"]))

    def path(self, subject: str, side: str, index: int) -> Path:
        return Path(self.root) / self.subjects[subject][side][index]

    def load(self, subject: str, side: str, indices=None) -> list[np.ndarray]:
        if indices is None:
            indices = range(len(self.subjects[subject][side]))
        return [read_image(self.path(subject, side, i)) for i in indices]

    def to_dict(self) -> dict:
        return {
            "version": MANIFEST_VERSION,
            "root": self.root,
            "seed": self.seed,
            "subjects": self.subjects,
            "train": self.train,
            "test": self.test,
            "splits": [{"gallery": s.gallery, "probe": s.probe} for s in self.splits],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetManifest":
        if data.get("version") != MANIFEST_VERSION:
            raise ValueError(f"unsupported manifest version {data.get('version')}")
        splits = [GalleryProbe(s["gallery"], s["probe"]) for s in data.get("splits", [])]
        return cls(data["root"], data["subjects"], data.get("seed"), data.get("train", []),
                   data.get("test", []), splits)

    def save(self, path: str | Path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load_json(cls, path: str | Path) -> "DatasetManifest":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _check_readable(path: Path) -> None:
    try:
        with Image.open(path) as im:
            im.verify()
    except Exception as exc:  # PIL raises a zoo of types here
        raise OSError(f"unreadable image {path}: {exc}") from exc


def scan(root: str | Path) -> DatasetManifest:
    """Index ``root/<subject>/{left,right}/*`` in sorted order.

    Subjects missing images on either side are skipped with a warning.
    """
    root = Path(root)
    subjects: dict[str, dict[str, list[str]]] = {}
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {root} does not exist")
    for sid in sorted(os.listdir(root)):
        if not (root / sid).is_dir():
            continue
        sides = {}
        for side in SIDES:
            side_dir = root / sid / side
            names = sorted(os.listdir(side_dir)) if side_dir.is_dir() else []
            names = [n for n in names if n.lower().endswith(IMAGE_SUFFIXES)]
            for n in names:
                _check_readable(side_dir / n)
            sides[side] = [f"{sid}/{side}/{n}" for n in names]
        if not all(sides.values()):
            warnings.warn(f"subject {sid!r} has no images on one side; excluded", stacklevel=2)
            continue
        subjects[sid] = sides
    return DatasetManifest(str(root), subjects)


def assign_gallery_probe(manifest: DatasetManifest, subjects, rng: np.random.Generator) -> GalleryProbe:
    """Split each subject's captures in half; odd counts give the gallery the extra one."""
    gallery, probe = {}, {}
    for sid in sorted(subjects):
        n = manifest.captures(sid)
        perm = rng.permutation(n)
        n_gallery = math.ceil(n / 2)
        gallery[sid] = sorted(int(i) for i in perm[:n_gallery])
        probe[sid] = sorted(int(i) for i in perm[n_gallery:])
    return GalleryProbe(gallery, probe)


def make_splits(manifest: DatasetManifest, cfg: SplitConfig) -> DatasetManifest:
    """Seeded subject-level train/test partition plus repeated gallery/probe halves."""
    ids = manifest.subject_ids
    if cfg.train_subject_count >= len(ids):
        raise ValueError(f"need more than {cfg.train_subject_count} subjects, have {len(ids)}")
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(len(ids))
    train = sorted(ids[i] for i in order[:cfg.train_subject_count])
    test = sorted(ids[i] for i in order[cfg.train_subject_count:])
    splits = [assign_gallery_probe(manifest, test, rng) for _ in range(cfg.repetitions)]
    return replace(manifest, seed=cfg.seed, train=train, test=test, splits=splits)


def closed_set_splits(manifest: DatasetManifest, subjects, repetitions: int, seed: int) -> list[GalleryProbe]:
    """Gallery/probe halves over an arbitrary subject list (e.g. the training subjects)."""
    rng = np.random.default_rng(seed)
    return [assign_gallery_probe(manifest, subjects, rng) for _ in range(repetitions)]


# --- synthetic data -----------------------------------------------------------

def _band_limited_noise(rng: np.random.Generator, size: int, sigma: float = 0.08) -> np.ndarray:
    white = rng.standard_normal((size, size))
    fy = np.fft.fftfreq(size)[:, None]
    fx = np.fft.fftfreq(size)[None, :]
    smooth = np.real(np.fft.ifft2(np.fft.fft2(white) * np.exp(-(fx**2 + fy**2) / (2 * sigma**2))))
    smooth -= smooth.mean()
    return smooth / (np.abs(smooth).max() + 1e-12)


def _class_pattern(rng: np.random.Generator, size: int) -> np.ndarray:
    """A right-ocular-like float RGB pattern in [0, 1]."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    skin = rng.uniform(0.35, 0.85, size=3)
    texture = _band_limited_noise(rng, size)
    shade = 0.75 + 0.25 * texture
    img = skin[None, None, :] * shade[..., None]

    cx = size / 2 + rng.uniform(-8, 8)
    cy = size / 2 + rng.uniform(-6, 10)
    a = rng.uniform(0.22, 0.36) * size
    b = rng.uniform(0.09, 0.18) * size
    theta = rng.uniform(-0.35, 0.35)
    dx, dy = xx - cx, yy - cy
    u = dx * np.cos(theta) + dy * np.sin(theta)
    v = -dx * np.sin(theta) + dy * np.cos(theta)
    r = np.sqrt((u / a) ** 2 + (v / b) ** 2)
    arc_width = rng.uniform(0.08, 0.2)
    upper_only = rng.uniform() < 0.5
    contour = np.abs(r - 1.0) < arc_width
    if upper_only:
        contour &= v < b * 0.3
    iris_r = b * rng.uniform(0.7, 1.0)
    iris = (u - rng.uniform(-0.3, 0.3) * a) ** 2 + v**2 < iris_r**2
    iris_color = rng.uniform(0.05, 0.45, size=3)
    brow_y = cy - b - rng.uniform(6, 14)
    brow = (np.abs(yy - brow_y - 0.004 * (xx - cx) ** 2) < rng.uniform(1.5, 4.0)) & (np.abs(xx - cx) < a * 1.1)

    img[iris] = iris_color
    img[contour] *= rng.uniform(0.25, 0.55)
    img[brow] *= rng.uniform(0.2, 0.5)
    return np.clip(img, 0.0, 1.0)


def _shift(img: np.ndarray, dy: int, dx: int) -> np.ndarray:
    h, w = img.shape[:2]
    padded = np.pad(img, ((4, 4), (4, 4), (0, 0)), mode="edge")
    return padded[4 - dy:4 - dy + h, 4 - dx:4 - dx + w]


def synth_generate(root: str | Path, classes: int, per_class: int, seed: int = 0,
                   size: int = 80, noise: float = 0.03) -> DatasetManifest:
    """Write a seeded synthetic periocular dataset and return its manifest.

    Every class has a fixed base pattern; each capture jitters brightness,
    translates by up to 4 px and adds pixel noise. Left images mirror the
    right-ocular pattern.
    """
    if classes < 2:
        raise ValueError("synthetic datasets need at least 2 classes")
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    root = Path(root)
    class_seeds = np.random.SeedSequence(seed).spawn(classes)
    for c, cseq in enumerate(class_seeds):
        pattern_seq, jitter_seq = cseq.spawn(2)
        base_right = _class_pattern(np.random.default_rng(pattern_seq), size)
        base_left = base_right[:, ::-1]
        rng = np.random.default_rng(jitter_seq)
        sid = f"subject_{c:03d}"
        for i in range(per_class):
            gain = rng.uniform(0.8, 1.2)
            dy, dx = rng.integers(-4, 5, size=2)
            for side, base in (("right", base_right), ("left", base_left)):
                img = _shift(base, int(dy), int(dx if side == "right" else -dx)) * gain
                img = img + rng.normal(0.0, noise, size=img.shape)
                pixels = np.clip(np.rint(np.clip(img, 0, 1) * 255), 0, 255).astype(np.uint8)
                write_png(root / sid / side / f"{i:03d}.png", pixels)
    return scan(root)
