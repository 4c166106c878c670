"""Dual-stream shared-weight network with max and sum late fusion.

One convolutional trunk (and one flatten projection) is applied to the RGB
image and to the colourised OC-LBCP descriptor. The two projected feature
vectors are merged twice, by elementwise max and by elementwise sum, and
each merge feeds its own two-layer head and classifier.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import nn_core as nn
from .nn_core import OptimizerConfig, ParamStore, Tensor

log = logging.getLogger(__name__)

FULL_CHANNELS = (64, 128, 256, 256, 512, 512, 512, 512)
DESK_CHANNELS = (8, 16, 16, 32, 32, 32, 32, 32)
STREAM_MODES = ("dual", "rgb", "descriptor")


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture of one side's network.

    ``pool_after`` lists zero-based conv indices followed by a 2x2 max pool.
    ``streams`` selects the full dual-stream model or a single-stream
    ablation that feeds the same features to both fusion layers.
    """

    num_classes: int
    input_size: int = 80
    conv_channels: tuple[int, ...] = DESK_CHANNELS
    pool_after: tuple[int, ...] = (0, 1, 3, 5)
    kernel_size: int = 2
    projection_width: int = 128
    fc_width: int = 128
    streams: str = "dual"
    dtype: str = "float32"

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("need at least two classes")
        if self.streams not in STREAM_MODES:
            raise ValueError(f"streams must be one of {STREAM_MODES}")
        if self.final_size < 1:
            raise ValueError("input too small for the pooling schedule")

    @classmethod
    def full(cls, num_classes: int, **kw) -> "NetworkConfig":
        """Full-size configuration: 12,800-d flatten projected to 4,096."""
        return cls(num_classes, conv_channels=FULL_CHANNELS, projection_width=4096, fc_width=4096, **kw)

    @property
    def final_size(self) -> int:
        size = self.input_size
        for _ in self.pool_after:
            if size % 2:
                return 0
            size //= 2
        return size

    @property
    def flatten_width(self) -> int:
        return self.conv_channels[-1] * self.final_size**2


@dataclass
class TrainExample:
    rgb: np.ndarray  # (h, w, 3) uint8
    descriptor: np.ndarray  # (h, w, 3) uint8
    label: int
    side: str = "left"


@dataclass
class TrainLog:
    epoch_losses: list[float] = field(default_factory=list)
    learning_rates: list[float] = field(default_factory=list)
    step_losses: list[float] = field(default_factory=list)


def _he_normal(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)


def to_nchw(images, size: int, dtype) -> np.ndarray:
    """Stack (h, w, 3) uint8 images (or one image) into a [0, 1] NCHW batch."""
    arr = np.asarray(images)
    if arr.ndim == 3:
        arr = arr[None]
    if arr.ndim != 4 or arr.shape[1:] != (size, size, 3):
        raise ValueError(f"expected images of shape ({size}, {size}, 3), got {arr.shape[1:]}")
    scale = 255.0 if arr.dtype == np.uint8 else 1.0
    return (arr.astype(np.float64) / scale).transpose(0, 3, 1, 2).astype(dtype)


class DualStreamModel:
    def __init__(self, cfg: NetworkConfig, side: str = "left", seed: int = 0,
                 params: ParamStore | None = None):
        if side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")
        self.cfg = cfg
        self.side = side
        self.dtype = np.dtype(cfg.dtype)
        self.params = params if params is not None else self._init_params(np.random.default_rng(seed))

    def _init_params(self, rng: np.random.Generator) -> ParamStore:
        cfg, dt = self.cfg, self.dtype
        store = ParamStore()
        k = cfg.kernel_size
        in_ch = 3
        for i, out_ch in enumerate(cfg.conv_channels):
            fan_in = in_ch * k * k
            store.add(f"trunk.conv{i + 1}.weight", _he_normal(rng, (out_ch, in_ch, k, k), fan_in, dt))
            store.add(f"trunk.conv{i + 1}.bias", np.zeros(out_ch, dtype=dt))
            in_ch = out_ch

        def dense(name: str, d_in: int, d_out: int) -> None:
            store.add(f"{name}.weight", _he_normal(rng, (d_in, d_out), d_in, dt))
            store.add(f"{name}.bias", np.zeros(d_out, dtype=dt))

        dense("proj", cfg.flatten_width, cfg.projection_width)
        for head, hidden in (("head_max", ("fc1", "fc3")), ("head_sum", ("fc2", "fc4"))):
            dense(f"{head}.{hidden[0]}", cfg.projection_width, cfg.fc_width)
            dense(f"{head}.{hidden[1]}", cfg.fc_width, cfg.fc_width)
            dense(f"{head}.out", cfg.fc_width, cfg.num_classes)
        return store

    def _p(self, name: str) -> Tensor:
        return self.params[name]

    # -- graph pieces ----------------------------------------------------

    def features(self, x: np.ndarray | Tensor) -> Tensor:
        """Shared trunk + flatten + projection: one stream's F vector."""
        h = x if isinstance(x, Tensor) else Tensor(x)
        for i in range(len(self.cfg.conv_channels)):
            h = nn.relu(nn.conv2d(h, self._p(f"trunk.conv{i + 1}.weight"), self._p(f"trunk.conv{i + 1}.bias")))
            if i in self.cfg.pool_after:
                h = nn.maxpool2(h)
        h = nn.flatten(h)
        return nn.relu(nn.fully_connected(h, self._p("proj.weight"), self._p("proj.bias")))

    def _head(self, z: Tensor, head: str, hidden: Sequence[str]) -> Tensor:
        for name in hidden:
            z = nn.relu(nn.fully_connected(z, self._p(f"{head}.{name}.weight"), self._p(f"{head}.{name}.bias")))
        return nn.fully_connected(z, self._p(f"{head}.out.weight"), self._p(f"{head}.out.bias"))

    def fused(self, rgb, descriptor) -> tuple[Tensor, Tensor, Tensor, Tensor]:
        """Return (F1, F2, Z_max, Z_sum) for NCHW float batches."""
        mode = self.cfg.streams
        f1 = self.features(rgb) if mode != "descriptor" else None
        f2 = self.features(descriptor) if mode != "rgb" else None
        if f1 is None:
            f1 = f2
        if f2 is None:
            f2 = f1
        return f1, f2, nn.maximum(f1, f2), nn.add(f1, f2)

    def logits(self, rgb, descriptor) -> tuple[Tensor, Tensor]:
        _, _, z_max, z_sum = self.fused(rgb, descriptor)
        return self._head(z_max, "head_max", ("fc1", "fc3")), self._head(z_sum, "head_sum", ("fc2", "fc4"))

    def prepare(self, images) -> np.ndarray:
        return to_nchw(images, self.cfg.input_size, self.dtype)

    # -- public inference ------------------------------------------------

    def forward(self, rgb, descriptor) -> tuple[np.ndarray, np.ndarray]:
        """Softmax vectors (o_max, o_sum) for uint8 images or [0,1] float images."""
        y_max, y_sum = self.logits(self.prepare(rgb), self.prepare(descriptor))
        return nn.softmax(y_max.data), nn.softmax(y_sum.data)

    def embed(self, rgb, descriptor, batch_size: int = 64) -> np.ndarray:
        """Head-sum vectors o = o_max + o_sum, one row per input image."""
        rgb = np.asarray(rgb)
        descriptor = np.asarray(descriptor)
        single = rgb.ndim == 3
        if single:
            rgb, descriptor = rgb[None], descriptor[None]
        rows = []
        for start in range(0, len(rgb), batch_size):
            o_max, o_sum = self.forward(rgb[start:start + batch_size], descriptor[start:start + batch_size])
            rows.append(o_max + o_sum)
        out = np.concatenate(rows).astype(np.float64)
        return out[0] if single else out

    # -- persistence -----------------------------------------------------

    def save(self, path: str | Path, extra: dict | None = None, include_adam: bool = False) -> None:
        path = Path(path)
        self.params.save(path, include_adam=include_adam)
        sidecar = {"side": self.side, "num_classes": self.cfg.num_classes, "network": asdict(self.cfg)}
        sidecar.update(extra or {})
        sidecar_path(path).write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "DualStreamModel":
        path = Path(path)
        meta = json.loads(sidecar_path(path).read_text())
        net = dict(meta["network"])
        net["conv_channels"] = tuple(net["conv_channels"])
        net["pool_after"] = tuple(net["pool_after"])
        cfg = NetworkConfig(**net)
        params = ParamStore.load(path, dtype=np.dtype(cfg.dtype))
        return cls(cfg, side=meta["side"], params=params)


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def fusion_total_loss(y_max: Tensor, y_sum: Tensor, labels: np.ndarray) -> Tensor:
    """Sum of the two heads' cross-entropies; labels are one-hot rows."""
    return nn.add(nn.softmax_cross_entropy(y_max, labels), nn.softmax_cross_entropy(y_sum, labels))


def total_loss(o_max: np.ndarray, o_sum: np.ndarray, label: int) -> float:
    """Total loss evaluated from already-normalised head probabilities."""
    eps = np.finfo(np.float64).tiny
    return float(-np.log(max(o_max[label], eps)) - np.log(max(o_sum[label], eps)))


def train(examples: Sequence[TrainExample], cfg: OptimizerConfig, seed: int = 0,
          net: NetworkConfig | None = None, num_classes: int | None = None) -> tuple[DualStreamModel, TrainLog]:
    """Train one side's network with Adam on the summed head losses.

    Shuffling uses its own generator derived from ``seed`` so that two runs
    with the same seed produce identical loss logs.
    """
    if not examples:
        raise ValueError("cannot train on an empty dataset")
    sides = {ex.side for ex in examples}
    if len(sides) != 1:
        raise ValueError(f"training data mixes sides: {sorted(sides)}")
    side = sides.pop()
    labels = np.array([ex.label for ex in examples])
    if net is None:
        net = NetworkConfig(num_classes or int(labels.max()) + 1)
    if labels.min() < 0 or labels.max() >= net.num_classes:
        raise ValueError("labels out of range for the configured class count")
    init_seq, shuffle_seq = np.random.SeedSequence(seed).spawn(2)
    model = DualStreamModel(net, side=side, seed=int(init_seq.generate_state(1)[0]))
    rng = np.random.default_rng(shuffle_seq)

    rgb = model.prepare(np.stack([ex.rgb for ex in examples]))
    desc = model.prepare(np.stack([ex.descriptor for ex in examples]))
    targets = nn.one_hot(labels, net.num_classes, dtype=model.dtype)

    history = TrainLog()
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(examples))
        total, lr = 0.0, nn.learning_rate(cfg, epoch)
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            model.params.zero_grad()
            y_max, y_sum = model.logits(rgb[idx], desc[idx])
            loss = fusion_total_loss(y_max, y_sum, targets[idx])
            loss.backward()
            lr = nn.adam_step(model.params, cfg, epoch)
            value = float(loss.data)
            history.step_losses.append(value)
            total += value * len(idx)
        history.epoch_losses.append(total / len(examples))
        history.learning_rates.append(lr)
        log.debug("epoch %d lr %.1e loss %.6f", epoch, lr, history.epoch_losses[-1])
    return model, history
