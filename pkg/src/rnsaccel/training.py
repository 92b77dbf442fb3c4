"""Desk-scale DNN training routed through the quantized GEMM engine.

Every matrix product of the training step runs through ``rns_gemm`` with
fresh BFP quantization of its inputs:

    forward          X_(l+1) = f(W_l X_l)
    input gradient   dX = W^T dO
    weight gradient  dW = dO X^T
    update           W <- W - lr * dW        (master weights in float64)

A bit-identical "twin" network with the same initial weights trains in
plain float64 for comparison.  Activations are column-major: X has shape
(features, batch).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .gemm import EngineConfig, rns_gemm

__all__ = [
    "DenseLayer",
    "ConvLayer",
    "ToyNetwork",
    "make_network",
    "forward",
    "backward",
    "sgd_step",
    "softmax_cross_entropy",
    "train_toy",
    "make_blobs",
    "make_arcs",
    "save_image_set",
    "load_image_set",
]


@dataclass
class DenseLayer:
    weight: np.ndarray  # (out_features, in_features), float64 master copy

    @property
    def out_features(self):
        return self.weight.shape[0]


@dataclass
class ConvLayer:
    """Small 2-D convolution, evaluated as a lowered GEMM (im2col)."""

    weight: np.ndarray  # (c_out, c_in, kh, kw)
    stride: int = 1
    padding: int = 0
    in_shape: tuple[int, int, int] = (1, 8, 8)  # (c_in, h, w) of the input

    def out_shape(self) -> tuple[int, int, int]:
        c_in, h, w = self.in_shape
        kh, kw = self.weight.shape[2], self.weight.shape[3]
        oh = (h + 2 * self.padding - kh) // self.stride + 1
        ow = (w + 2 * self.padding - kw) // self.stride + 1
        return (self.weight.shape[0], oh, ow)


@dataclass
class ToyNetwork:
    """Ordered layers; ReLU between layers, raw logits at the end."""

    layers: list

    def parameters(self):
        return [layer.weight for layer in self.layers]


def make_network(layer_specs, seed: int = 0) -> ToyNetwork:
    """Build a network from specs like [("dense", in, out), ("conv", ...)].

    Weights are scaled-normal initialized (He style) from the given seed.
    """
    rng = np.random.default_rng(seed)
    layers = []
    for spec in layer_specs:
        kind = spec[0]
        if kind == "dense":
            _, n_in, n_out = spec
            w = rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_out, n_in))
            layers.append(DenseLayer(w))
        elif kind == "conv":
            _, c_in, c_out, kh, kw, in_shape = spec[:6]
            fan_in = c_in * kh * kw
            w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(c_out, c_in, kh, kw))
            layers.append(ConvLayer(w, in_shape=tuple(in_shape)))
        else:
            raise ValueError(f"unknown layer kind {kind!r}")
    return ToyNetwork(layers)


def _gemm(a, b, cfg: EngineConfig | None):
    """Engine-routed product, or plain float64 when cfg is None (the twin)."""
    if cfg is None:
        return a @ b
    return rns_gemm(a, b, cfg).output


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int):
    """(C, H, W, B) -> (C*kh*kw, OH*OW*B) patch matrix."""
    c, h, w, b = x.shape
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    cols = np.empty((c, kh, kw, oh, ow, b), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, i, j] = x[:, i:i + stride * oh:stride, j:j + stride * ow:stride]
    return cols.reshape(c * kh * kw, oh * ow * b), (oh, ow)


def _col2im(cols, x_shape, kh, kw, stride, pad):
    """Adjoint of _im2col: scatter-add patches back onto the image grid."""
    c, h, w, b = x_shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    grid = np.zeros((c, h + 2 * pad, w + 2 * pad, b), dtype=np.float64)
    cols = cols.reshape(c, kh, kw, oh, ow, b)
    for i in range(kh):
        for j in range(kw):
            grid[:, i:i + stride * oh:stride, j:j + stride * ow:stride] += cols[:, i, j]
    if pad:
        grid = grid[:, pad:-pad, pad:-pad]
    return grid


def forward(net: ToyNetwork, x: np.ndarray, cfg: EngineConfig | None):
    """Run the network; returns (logits, caches for backward).

    x: (features, batch) for a dense head, or (c, h, w, batch) when the
    first layer is a convolution.
    """
    caches = []
    h = x
    for idx, layer in enumerate(net.layers):
        last = idx == len(net.layers) - 1
        if isinstance(layer, DenseLayer):
            if h.ndim != 2:
                h = h.reshape(-1, h.shape[-1])
            z = _gemm(layer.weight, h, cfg)
            cache = {"kind": "dense", "input": h, "z": z}
        else:
            cols, (oh, ow) = _im2col(h, layer.weight.shape[2], layer.weight.shape[3],
                                     layer.stride, layer.padding)
            wmat = layer.weight.reshape(layer.weight.shape[0], -1)
            z = _gemm(wmat, cols, cfg)
            cache = {"kind": "conv", "input_shape": h.shape, "cols": cols,
                     "z": z, "oh": oh, "ow": ow}
        if not last:
            a = np.maximum(z, 0.0)
        else:
            a = z
        cache["last"] = last
        caches.append(cache)
        if cache["kind"] == "conv":
            b = h.shape[-1]
            h = a.reshape(layer.weight.shape[0], oh, ow, b)
            cache["act_shape"] = h.shape
        else:
            h = a
    return h.reshape(-1, h.shape[-1]) if h.ndim != 2 else h, caches


def backward(net: ToyNetwork, caches, dlogits: np.ndarray,
             cfg: EngineConfig | None):
    """Gradients of every layer weight, engine-routed like the forward pass."""
    grads = [None] * len(net.layers)
    d = dlogits
    for idx in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[idx]
        cache = caches[idx]
        if cache["kind"] == "conv" and d.ndim != 2:
            d = d.reshape(cache["z"].shape)
        if d.ndim != 2:
            d = d.reshape(-1, d.shape[-1])
        if not cache["last"]:
            d = d * (cache["z"] > 0.0)
        if isinstance(layer, DenseLayer):
            x = cache["input"]
            grads[idx] = _gemm(d, x.T, cfg)
            if idx:
                d = _gemm(layer.weight.T, d, cfg)
                prev = caches[idx - 1]
                if prev["kind"] == "conv":
                    d = d.reshape(prev["act_shape"])
        else:
            wmat = layer.weight.reshape(layer.weight.shape[0], -1)
            grads[idx] = _gemm(d, cache["cols"].T, cfg).reshape(layer.weight.shape)
            if idx:
                dcols = _gemm(wmat.T, d, cfg)
                d = _col2im(dcols, cache["input_shape"],
                            layer.weight.shape[2], layer.weight.shape[3],
                            layer.stride, layer.padding)
    return grads


def sgd_step(net: ToyNetwork, grads, lr: float):
    """Plain SGD on the float64 master weights; the update is never quantized."""
    for layer, g in zip(net.layers, grads):
        layer.weight -= lr * g


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross entropy and its gradient w.r.t. the logits.

    logits: (classes, batch), labels: (batch,) integer classes.
    """
    z = logits - logits.max(axis=0, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=0, keepdims=True)
    n = labels.shape[0]
    loss = float(-np.log(p[labels, np.arange(n)] + 1e-300).mean())
    grad = p.copy()
    grad[labels, np.arange(n)] -= 1.0
    return loss, grad / n


def _accuracy(logits, labels):
    return float((logits.argmax(axis=0) == labels).mean())


# ---------------------------------------------------------------------------
# toy datasets


def make_blobs(n: int, seed: int, n_classes: int = 2, spread: float = 0.7):
    """Gaussian clusters on a circle of radius 2; linearly separable-ish."""
    rng = np.random.default_rng(seed)
    per = n // n_classes
    xs, ys = [], []
    for c in range(n_classes):
        ang = 2 * np.pi * c / n_classes
        center = 2.0 * np.array([np.cos(ang), np.sin(ang)])
        xs.append(rng.normal(0.0, spread, size=(per, 2)) + center)
        ys.append(np.full(per, c))
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    order = rng.permutation(len(x))
    return x[order], y[order]


def make_arcs(n: int, seed: int, noise: float = 0.12):
    """Two interleaved half-moons; needs a nonlinear boundary."""
    rng = np.random.default_rng(seed)
    per = n // 2
    t = rng.uniform(0.0, np.pi, size=per)
    outer = np.stack([np.cos(t), np.sin(t)], axis=1)
    inner = np.stack([1.0 - np.cos(t), 0.5 - np.sin(t)], axis=1)
    x = np.concatenate([outer, inner]) + rng.normal(0.0, noise, size=(2 * per, 2))
    y = np.concatenate([np.zeros(per, dtype=np.int64), np.ones(per, dtype=np.int64)])
    order = rng.permutation(len(x))
    return x[order], y[order]


# ---------------------------------------------------------------------------
# optional tiny image sets in a plain binary container

_IMG_MAGIC = b"TIMG"


def save_image_set(path, images: np.ndarray, labels: np.ndarray):
    """Write images (n, h, w) uint8 and labels (n,) uint8.

    Layout: b"TIMG", three little-endian uint32 (n, h, w), n*h*w image
    bytes, then n label bytes.
    """
    images = np.ascontiguousarray(images, dtype=np.uint8)
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    n, h, w = images.shape
    if labels.shape != (n,):
        raise ValueError("one label per image")
    with open(path, "wb") as f:
        f.write(_IMG_MAGIC)
        f.write(struct.pack("<III", n, h, w))
        f.write(images.tobytes())
        f.write(labels.tobytes())


def load_image_set(path):
    """Read a TIMG file back; returns (images (n,h,w) uint8, labels (n,))."""
    with open(path, "rb") as f:
        if f.read(4) != _IMG_MAGIC:
            raise ValueError("not a TIMG image file")
        n, h, w = struct.unpack("<III", f.read(12))
        images = np.frombuffer(f.read(n * h * w), dtype=np.uint8).reshape(n, h, w)
        labels = np.frombuffer(f.read(n), dtype=np.uint8)
        if labels.shape != (n,):
            raise ValueError("truncated TIMG file")
    return images.copy(), labels.copy().astype(np.int64)


# ---------------------------------------------------------------------------
# training loop


@dataclass
class TrainResult:
    """Per-epoch metric rows plus the trained nets."""

    metrics: list = field(default_factory=list)
    engine_net: ToyNetwork | None = None
    twin_net: ToyNetwork | None = None

    @property
    def final(self) -> dict:
        return self.metrics[-1]


def _epoch_eval(net, cfg, x, y):
    logits, _ = forward(net, x, cfg)
    loss, _ = softmax_cross_entropy(logits, y)
    return loss, _accuracy(logits, y)


def train_toy(dataset: str | tuple, net_hidden=(16, 16), engine_cfg: EngineConfig | None = None,
              epochs: int = 30, batch_size: int = 32, lr: float = 0.5,
              seed: int = 0, n_samples: int = 400, val_fraction: float = 0.25,
              eval_engine_mode: bool = True) -> TrainResult:
    """Train an engine-backed net and its full-precision twin side by side.

    dataset: "blobs", "arcs", or a pre-made (x, y) tuple with x of shape
    (n, features).  Identical seeds give bit-identical metric traces.
    """
    engine_cfg = engine_cfg if engine_cfg is not None else EngineConfig()
    if isinstance(dataset, str):
        maker = {"blobs": make_blobs, "arcs": make_arcs}.get(dataset)
        if maker is None:
            raise ValueError(f"unknown dataset {dataset!r}")
        x, y = maker(n_samples, seed)
    else:
        x, y = dataset
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n_val = int(len(x) * val_fraction)
    x_train, y_train = x[n_val:], y[n_val:]
    x_val, y_val = x[:n_val], y[:n_val]
    n_classes = int(y.max()) + 1

    dims = [x.shape[1], *net_hidden, n_classes]
    specs = [("dense", dims[i], dims[i + 1]) for i in range(len(dims) - 1)]
    engine_net = make_network(specs, seed=seed)
    twin_net = make_network(specs, seed=seed)  # identical init

    rng = np.random.default_rng(seed + 1)
    result = TrainResult(engine_net=engine_net, twin_net=twin_net)
    for epoch in range(epochs):
        order = rng.permutation(len(x_train))
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            xb = x_train[idx].T        # (features, batch)
            yb = y_train[idx]
            for net, cfg in ((engine_net, engine_cfg), (twin_net, None)):
                logits, caches = forward(net, xb, cfg)
                _, dlogits = softmax_cross_entropy(logits, yb)
                grads = backward(net, caches, dlogits, cfg)
                sgd_step(net, grads, lr)
        e_cfg = engine_cfg if eval_engine_mode else None
        etl, eta = _epoch_eval(engine_net, e_cfg, x_train.T, y_train)
        evl, eva = _epoch_eval(engine_net, e_cfg, x_val.T, y_val)
        ttl, tta = _epoch_eval(twin_net, None, x_train.T, y_train)
        tvl, tva = _epoch_eval(twin_net, None, x_val.T, y_val)
        result.metrics.append({
            "epoch": epoch,
            "engine_train_loss": etl, "engine_train_acc": eta,
            "engine_val_loss": evl, "engine_val_acc": eva,
            "twin_train_loss": ttl, "twin_train_acc": tta,
            "twin_val_loss": tvl, "twin_val_acc": tva,
        })
    return result
