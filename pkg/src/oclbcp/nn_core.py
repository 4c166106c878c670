"""A small reverse-mode autodiff engine over numpy arrays.

Only the layers the dual-stream network needs are provided: 2-D convolution
with same-size output, 2x2 max pooling, fully connected layers, ReLU,
flatten, elementwise max/sum merges and softmax cross-entropy. Parameters
live in a :class:`ParamStore`, which is also what makes weight sharing work:
a layer applied twice reads the same stored tensor both times.
"""
from __future__ import annotations

import struct
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

CHECKPOINT_MAGIC = b"DSNN"
CHECKPOINT_VERSION = 1


class Tensor:
    """An array with an optional gradient slot and a link to the op that made it."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, parents: tuple = (),
                 backward: Callable[[np.ndarray], None] | None = None, name: str | None = None):
        self.data = np.asarray(data)
        # one reduction catches NaN/Inf; only a huge finite sum needs the full scan
        with np.errstate(over="ignore", invalid="ignore"):
            total = self.data.sum()
        if not np.isfinite(total) and not np.all(np.isfinite(self.data)):
            raise FloatingPointError(f"non-finite values produced{f' in {name}' if name else ''}")
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self.grad: np.ndarray | None = None
        self._parents = parents
        self._backward = backward
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        # grads are never updated in place, so aliasing g is safe
        self.grad = g if self.grad is None else self.grad + g

    def backward(self, grad: np.ndarray | None = None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed gradient needs a scalar tensor")
            grad = np.ones_like(self.data)
        order: list[Tensor] = []
        seen: set[int] = set()

        def visit(node: Tensor) -> None:
            stack = [(node, False)]
            while stack:
                t, done = stack.pop()
                if done:
                    order.append(t)
                    continue
                if id(t) in seen:
                    continue
                seen.add(id(t))
                stack.append((t, True))
                for p in t._parents:
                    if id(p) not in seen:
                        stack.append((p, False))

        visit(self)
        self._accumulate(np.asarray(grad, dtype=self.data.dtype))
        for t in reversed(order):
            if t._backward is not None and t.grad is not None:
                t._backward(t.grad)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# --- layers -------------------------------------------------------------------

def conv2d(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Stride-1 convolution (cross-correlation) keeping the spatial size.

    x is NCHW, w is (out, in, k, k). The input is zero padded by k-1 on the
    right and bottom only, so a 2x2 kernel at (i, j) reads pixels
    (i..i+1, j..j+1).
    """
    x, w, b = _as_tensor(x), _as_tensor(w), _as_tensor(b)
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ValueError("conv2d expects NCHW input and OIKK weights")
    n, c, h, wd = x.shape
    o, ci, k, k2 = w.shape
    if ci != c or k != k2:
        raise ValueError(f"conv2d shape mismatch: input {x.shape}, weight {w.shape}")
    if b.shape != (o,):
        raise ValueError(f"conv2d bias must have shape ({o},), got {b.shape}")
    taps = [(di, dj) for di in range(k) for dj in range(k)]
    # work channels-last so the patch matrix needs no transposed copy
    xp = np.pad(x.data.transpose(0, 2, 3, 1), ((0, 0), (0, k - 1), (0, k - 1), (0, 0)))
    cols = np.stack([xp[:, di:di + h, dj:dj + wd, :] for di, dj in taps], axis=-1)
    cols = cols.reshape(n, h, wd, c * k * k)  # matches w.reshape(o, c*k*k)
    wmat = w.data.reshape(o, c * k * k)
    out_nhwo = cols @ wmat.T + b.data
    out = out_nhwo.transpose(0, 3, 1, 2)

    def backward(g: np.ndarray) -> None:
        g_nhwo = np.ascontiguousarray(g.transpose(0, 2, 3, 1))
        if w.requires_grad:
            gw = g_nhwo.reshape(-1, o).T @ cols.reshape(-1, c * k * k)
            w._accumulate(gw.reshape(w.shape))
        if b.requires_grad:
            b._accumulate(g_nhwo.sum(axis=(0, 1, 2)))
        if x.requires_grad:
            gcols = (g_nhwo @ wmat).reshape(n, h, wd, c, k * k)
            gxp = np.zeros_like(xp)
            for idx, (di, dj) in enumerate(taps):
                gxp[:, di:di + h, dj:dj + wd, :] += gcols[..., idx]
            x._accumulate(gxp[:, :h, :wd, :].transpose(0, 3, 1, 2))

    return Tensor(out, parents=(x, w, b), backward=backward, name="conv2d")


def maxpool2(x: Tensor) -> Tensor:
    """2x2 max pooling, stride 2; ties route the gradient to the first element."""
    x = _as_tensor(x)
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"maxpool2 needs even spatial dims, got {h}x{w}")
    offsets = ((0, 0), (0, 1), (1, 0), (1, 1))
    views = [x.data[:, :, di::2, dj::2] for di, dj in offsets]
    out = np.maximum(np.maximum(views[0], views[1]), np.maximum(views[2], views[3]))

    def backward(g: np.ndarray) -> None:
        gx = np.zeros_like(x.data)
        taken = np.zeros(out.shape, dtype=bool)
        for (di, dj), view in zip(offsets, views):
            hit = (view == out) & ~taken
            gx[:, :, di::2, dj::2] = g * hit
            taken |= hit
        x._accumulate(gx)

    return Tensor(out, parents=(x,), backward=backward, name="maxpool2")


def fully_connected(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Affine map x @ w + b with x (N, D), w (D, K), b (K,)."""
    x, w, b = _as_tensor(x), _as_tensor(w), _as_tensor(b)
    if x.data.ndim != 2 or w.data.ndim != 2 or x.shape[1] != w.shape[0] or b.shape != (w.shape[1],):
        raise ValueError(f"fully_connected shape mismatch: x {x.shape}, w {w.shape}, b {b.shape}")
    out = x.data @ w.data + b.data

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x._accumulate(g @ w.data.T)
        if w.requires_grad:
            w._accumulate(x.data.T @ g)
        if b.requires_grad:
            b._accumulate(g.sum(axis=0))

    return Tensor(out, parents=(x, w, b), backward=backward, name="fully_connected")


def relu(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    mask = x.data > 0
    return Tensor(x.data * mask, parents=(x,), backward=lambda g: x._accumulate(g * mask), name="relu")


def flatten(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    shape = x.shape
    return Tensor(x.data.reshape(shape[0], -1), parents=(x,),
                  backward=lambda g: x._accumulate(g.reshape(shape)), name="flatten")


def maximum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise max; on ties the gradient goes to ``a``."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ValueError(f"maximum shape mismatch: {a.shape} vs {b.shape}")
    take_a = a.data >= b.data

    def backward(g: np.ndarray) -> None:
        a._accumulate(g * take_a)
        b._accumulate(g * ~take_a)

    return Tensor(np.where(take_a, a.data, b.data), parents=(a, b), backward=backward, name="maximum")


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ValueError(f"add shape mismatch: {a.shape} vs {b.shape}")

    def backward(g: np.ndarray) -> None:
        a._accumulate(g)
        b._accumulate(g)

    return Tensor(a.data + b.data, parents=(a, b), backward=backward, name="add")


def softmax(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def one_hot(labels: Iterable[int], num_classes: int, dtype=np.float64) -> np.ndarray:
    labels = np.asarray(list(labels), dtype=int)
    out = np.zeros((labels.size, num_classes), dtype=dtype)
    out[np.arange(labels.size), labels] = 1
    return out


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Batch-mean cross-entropy of softmax(logits) against one-hot labels."""
    logits = _as_tensor(logits)
    labels = np.asarray(labels, dtype=logits.data.dtype)
    if labels.shape != logits.shape:
        raise ValueError(f"labels shape {labels.shape} does not match logits {logits.shape}")
    if not (np.all((labels == 0) | (labels == 1)) and np.all(labels.sum(axis=1) == 1)):
        raise ValueError("labels must be one-hot rows")
    n = logits.shape[0]
    logp = log_softmax(logits.data)
    loss = -(labels * logp).sum() / n

    def backward(g: np.ndarray) -> None:
        logits._accumulate(g * (np.exp(logp) - labels) / n)

    return Tensor(np.asarray(loss, dtype=logits.data.dtype), parents=(logits,),
                  backward=backward, name="softmax_cross_entropy")


# --- parameters and optimisation ----------------------------------------------

class ParamStore:
    """Named parameters plus Adam state. One name, one tensor."""

    def __init__(self):
        self.params: OrderedDict[str, Tensor] = OrderedDict()
        self.adam: dict[str, dict] = {}

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self.params:
            raise KeyError(f"parameter {name!r} already registered")
        t = Tensor(value, requires_grad=True, name=name)
        self.params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __iter__(self):
        return iter(self.params.items())

    def __len__(self) -> int:
        return len(self.params)

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.grad = None

    def num_values(self) -> int:
        return sum(t.data.size for t in self.params.values())

    # checkpoint format: magic, version u32, count u32, then per parameter
    # name-length u32, utf-8 name, rank u32, extents u32*rank, float32 values;
    # then a flag byte and, if set, step u64 + m/v float32 per parameter.
    def to_bytes(self, include_adam: bool = False) -> bytes:
        parts = [CHECKPOINT_MAGIC, struct.pack("<II", CHECKPOINT_VERSION, len(self.params))]
        for name, t in self.params.items():
            raw = name.encode("utf-8")
            parts.append(struct.pack("<I", len(raw)) + raw)
            parts.append(struct.pack(f"<I{t.data.ndim}I", t.data.ndim, *t.shape))
            parts.append(np.ascontiguousarray(t.data, dtype="<f4").tobytes())
        has_adam = include_adam and bool(self.adam)
        parts.append(struct.pack("<B", int(has_adam)))
        if has_adam:
            for name, t in self.params.items():
                state = self.adam.get(name)
                step = 0 if state is None else state["step"]
                m = np.zeros(t.shape) if state is None else state["m"]
                v = np.zeros(t.shape) if state is None else state["v"]
                parts.append(struct.pack("<Q", step))
                parts.append(np.ascontiguousarray(m, dtype="<f4").tobytes())
                parts.append(np.ascontiguousarray(v, dtype="<f4").tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, blob: bytes, dtype=np.float32) -> "ParamStore":
        if blob[:4] != CHECKPOINT_MAGIC:
            raise ValueError("not a checkpoint file (bad magic)")
        version, count = struct.unpack_from("<II", blob, 4)
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        pos = 12
        store = cls()
        for _ in range(count):
            (nlen,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            name = blob[pos:pos + nlen].decode("utf-8")
            pos += nlen
            (rank,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            shape = struct.unpack_from(f"<{rank}I", blob, pos)
            pos += 4 * rank
            size = int(np.prod(shape))
            values = np.frombuffer(blob, dtype="<f4", count=size, offset=pos).reshape(shape)
            pos += 4 * size
            store.add(name, values.astype(dtype))
        (flag,) = struct.unpack_from("<B", blob, pos)
        pos += 1
        if flag:
            for name, t in store:
                (step,) = struct.unpack_from("<Q", blob, pos)
                pos += 8
                m = np.frombuffer(blob, dtype="<f4", count=t.data.size, offset=pos).reshape(t.shape)
                pos += 4 * t.data.size
                v = np.frombuffer(blob, dtype="<f4", count=t.data.size, offset=pos).reshape(t.shape)
                pos += 4 * t.data.size
                store.adam[name] = {"step": step, "m": m.astype(dtype), "v": v.astype(dtype)}
        if pos != len(blob):
            raise ValueError("trailing bytes in checkpoint")
        return store

    def save(self, path: str | Path, include_adam: bool = False) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_bytes(self.to_bytes(include_adam))

    @classmethod
    def load(cls, path: str | Path, dtype=np.float32) -> "ParamStore":
        return cls.from_bytes(Path(path).read_bytes(), dtype)


@dataclass(frozen=True)
class OptimizerConfig:
    initial_lr: float = 1.0e-3
    lr_decay_factor: float = 0.1
    decay_every: int = 10
    min_lr: float = 1.0e-5
    weight_decay: float = 5.0e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 64
    epochs: int = 200


def learning_rate(cfg: OptimizerConfig, epoch: int) -> float:
    """Step-annealed learning rate, clamped from below at ``min_lr``."""
    lr = cfg.initial_lr * cfg.lr_decay_factor ** (epoch // cfg.decay_every)
    # round off the float noise of repeated decay so 1e-3 -> 1e-4 -> 1e-5 are exact
    return max(cfg.min_lr, float(f"{lr:.12g}"))


def adam_step(params: ParamStore, cfg: OptimizerConfig, epoch: int) -> float:
    """One bias-corrected Adam update with L2 weight decay folded into the gradient.

    Returns the learning rate used.
    """
    lr = learning_rate(cfg, epoch)
    for name, t in params:
        if t.grad is None:
            raise ValueError(f"parameter {name!r} has no gradient")
        state = params.adam.setdefault(
            name, {"step": 0, "m": np.zeros_like(t.data), "v": np.zeros_like(t.data)})
        g = t.grad + cfg.weight_decay * t.data if cfg.weight_decay else t.grad
        state["step"] += 1
        state["m"] = cfg.beta1 * state["m"] + (1 - cfg.beta1) * g
        state["v"] = cfg.beta2 * state["v"] + (1 - cfg.beta2) * g * g
        m_hat = state["m"] / (1 - cfg.beta1 ** state["step"])
        v_hat = state["v"] / (1 - cfg.beta2 ** state["step"])
        t.data = (t.data - lr * m_hat / (np.sqrt(v_hat) + cfg.eps)).astype(t.data.dtype)
    return lr


def numerical_gradient(f: Callable[[], float], x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function w.r.t. an array, in place."""
    grad = np.zeros_like(x, dtype=np.float64)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + h
        up = f()
        x[idx] = orig - h
        down = f()
        x[idx] = orig
        grad[idx] = (up - down) / (2 * h)
    return grad
