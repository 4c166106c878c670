"""Glue between the dataset manifest, the networks and the identification protocol."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .color_mapping import ColorPalette
from .dataset_io import DatasetManifest, GalleryProbe, closed_set_splits
from .dual_stream import DualStreamModel, NetworkConfig, TrainExample, TrainLog, train
from .identification import CmcCurve, GalleryEntry, Probe, build_gallery, cmc
from .nn_core import OptimizerConfig
from .pipeline import encode_many

log = logging.getLogger(__name__)


@dataclass
class EncodedSide:
    """RGB and descriptor stacks for one side of one subject, indexed by capture."""

    rgb: np.ndarray
    descriptor: np.ndarray


def encode_subjects(manifest: DatasetManifest, subjects: Sequence[str], side: str,
                    palette: ColorPalette, size: int = 80) -> dict[str, EncodedSide]:
    out = {}
    for sid in subjects:
        n = manifest.captures(sid)
        rgb, desc = encode_many(manifest.load(sid, side, range(n)), palette, size)
        out[sid] = EncodedSide(rgb, desc)
    return out


def training_examples(encoded: dict[str, EncodedSide], classes: Sequence[str], side: str,
                      captures: dict[str, Sequence[int]] | None = None) -> list[TrainExample]:
    examples = []
    for label, sid in enumerate(classes):
        enc = encoded[sid]
        idx = range(len(enc.rgb)) if captures is None else captures[sid]
        examples += [TrainExample(enc.rgb[i], enc.descriptor[i], label, side) for i in idx]
    return examples


def train_side(encoded: dict[str, EncodedSide], classes: Sequence[str], side: str,
               opt: OptimizerConfig, net: NetworkConfig, seed: int,
               captures: dict[str, Sequence[int]] | None = None) -> tuple[DualStreamModel, TrainLog]:
    examples = training_examples(encoded, classes, side, captures)
    log.info("training %s side on %d images, %d classes", side, len(examples), len(classes))
    return train(examples, opt, seed=seed, net=net)


def embed_subjects(model: DualStreamModel, encoded: dict[str, EncodedSide]) -> dict[str, np.ndarray]:
    return {sid: model.embed(enc.rgb, enc.descriptor) for sid, enc in encoded.items()}


def split_entries(left: dict[str, np.ndarray], right: dict[str, np.ndarray],
                  split: GalleryProbe) -> tuple[list[GalleryEntry], list[Probe]]:
    gallery = build_gallery({sid: (left[sid][idx], right[sid][idx]) for sid, idx in split.gallery.items()})
    probes = [Probe(left[sid][i], right[sid][i], sid)
              for sid in sorted(split.probe) for i in split.probe[sid]]
    return gallery, probes


def evaluate(left: dict[str, np.ndarray], right: dict[str, np.ndarray],
             splits: Sequence[GalleryProbe], rule: str = "cosine") -> CmcCurve:
    """CMC over gallery/probe repetitions from per-capture head-sum vectors."""
    return cmc([split_entries(left, right, s) for s in splits], rule)


@dataclass
class BenchmarkResult:
    curve: CmcCurve
    logs: dict[str, TrainLog]
    models: dict[str, DualStreamModel]
    vectors: dict[str, dict[str, np.ndarray]]


def synthetic_benchmark(manifest: DatasetManifest, palette: ColorPalette, opt: OptimizerConfig,
                        seed: int = 0, streams: str = "dual", heldout: bool = False,
                        repetitions: int = 3, net_kwargs: dict | None = None,
                        encoded: dict[str, dict[str, EncodedSide]] | None = None) -> BenchmarkResult:
    """Train left and right networks on every subject and run closed-set identification.

    With ``heldout`` the networks only see the gallery captures of a single
    gallery/probe draw and are probed with the remaining captures; otherwise
    they train on every capture and ``repetitions`` draws are evaluated.
    """
    subjects = manifest.subject_ids
    splits = closed_set_splits(manifest, subjects, 1 if heldout else repetitions, seed)
    net = NetworkConfig(len(subjects), streams=streams, **(net_kwargs or {}))
    if encoded is None:
        encoded = {side: encode_subjects(manifest, subjects, side, palette, net.input_size)
                   for side in ("left", "right")}
    captures = splits[0].gallery if heldout else None
    logs, models, vectors = {}, {}, {}
    for side in ("left", "right"):
        model, history = train_side(encoded[side], subjects, side, opt, net, seed, captures)
        logs[side], models[side] = history, model
        vectors[side] = embed_subjects(model, encoded[side])
    curve = evaluate(vectors["left"], vectors["right"], splits)
    return BenchmarkResult(curve, logs, models, vectors)
