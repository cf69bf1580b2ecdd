"""Minimal sequential CNN with exact backpropagation, in plain numpy.

Data layout is NHWC; conv weights are [C_out, C_in, K, K]. The model is
an ordered list of layers (conv / batchnorm / relu / maxpool / global
average pool / dense), which keeps channel dependencies a simple chain
for the pruner. Gradients are exact and are checked against central
finite differences in the test suite.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .augment import PipelineSpec, eval_preprocess, train_pipeline
from .rng import LANE_AUGMENT, LANE_INIT, LANE_SHUFFLE, child_rng

MODEL_FORMAT_VERSION = 1


class Conv2d:
    kind = "conv"

    def __init__(self, c_in, c_out, k, stride=1, padding=None, bias=True, w=None, b=None):
        self.c_in = int(c_in)
        self.c_out = int(c_out)
        self.k = int(k)
        self.stride = int(stride)
        self.padding = self.k // 2 if padding is None else int(padding)
        self.has_bias = bool(bias)
        self.w = np.zeros((c_out, c_in, k, k), dtype=np.float32) if w is None else w
        self.b = (np.zeros(c_out, dtype=np.float32) if bias else None) if b is None else b
        self.grads = {}
        self._cache = None

    def spec_dict(self):
        return {
            "kind": self.kind,
            "c_in": self.c_in,
            "c_out": self.c_out,
            "k": self.k,
            "stride": self.stride,
            "padding": self.padding,
            "bias": self.has_bias,
        }

    def params(self):
        out = [("w", self.w)]
        if self.has_bias:
            out.append(("b", self.b))
        return out

    def buffers(self):
        return []

    def _wmat(self):
        # [C_out, C_in, K, K] -> [K*K*C_in, C_out], matching im2col order.
        return self.w.transpose(2, 3, 1, 0).reshape(self.k * self.k * self.c_in, self.c_out)

    def out_hw(self, h, w):
        hp, wp = h + 2 * self.padding, w + 2 * self.padding
        return (hp - self.k) // self.stride + 1, (wp - self.k) // self.stride + 1

    def forward(self, x, train=False):
        n, h, w, c = x.shape
        if c != self.c_in:
            raise ValueError(f"conv expected {self.c_in} input channels, got {c}")
        p, k, s = self.padding, self.k, self.stride
        xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0))) if p else x
        ho, wo = self.out_hw(h, w)
        s0, s1, s2, s3 = xp.strides
        view = np.lib.stride_tricks.as_strided(
            xp, shape=(n, ho, wo, k, k, c), strides=(s0, s1 * s, s2 * s, s1, s2, s3)
        )
        cols = view.reshape(n * ho * wo, k * k * c)
        y = cols @ self._wmat().astype(x.dtype)
        if self.has_bias:
            y = y + self.b.astype(x.dtype)
        if train:
            self._cache = (cols, x.shape, (ho, wo))
        return y.reshape(n, ho, wo, self.c_out)

    def backward(self, dy):
        cols, x_shape, (ho, wo) = self._cache
        n, h, w, c = x_shape
        p, k, s = self.padding, self.k, self.stride
        dy_flat = dy.reshape(n * ho * wo, self.c_out)
        dw_mat = cols.T @ dy_flat
        self.grads["w"] = dw_mat.reshape(k, k, c, self.c_out).transpose(3, 2, 0, 1)
        if self.has_bias:
            self.grads["b"] = dy_flat.sum(axis=0)
        dcols = (dy_flat @ self._wmat().astype(dy.dtype).T).reshape(n, ho, wo, k, k, c)
        dxp = np.zeros((n, h + 2 * p, w + 2 * p, c), dtype=dy.dtype)
        for ki in range(k):
            for kj in range(k):
                dxp[:, ki : ki + s * ho : s, kj : kj + s * wo : s, :] += dcols[:, :, :, ki, kj, :]
        return dxp[:, p : p + h, p : p + w, :] if p else dxp


class BatchNorm:
    kind = "batchnorm"
    eps = 1e-5
    momentum = 0.1

    def __init__(self, c, gamma=None, beta=None, running_mean=None, running_var=None):
        self.c = int(c)
        self.gamma = np.ones(c, dtype=np.float32) if gamma is None else gamma
        self.beta = np.zeros(c, dtype=np.float32) if beta is None else beta
        self.running_mean = np.zeros(c, dtype=np.float32) if running_mean is None else running_mean
        self.running_var = np.ones(c, dtype=np.float32) if running_var is None else running_var
        self.grads = {}
        self._cache = None

    def spec_dict(self):
        return {"kind": self.kind, "c": self.c}

    def params(self):
        return [("gamma", self.gamma), ("beta", self.beta)]

    def buffers(self):
        return [("running_mean", self.running_mean), ("running_var", self.running_var)]

    def forward(self, x, train=False):
        axes = (0, 1, 2)
        if train:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            self.running_mean = ((1 - self.momentum) * self.running_mean + self.momentum * mean).astype(
                self.running_mean.dtype
            )
            self.running_var = ((1 - self.momentum) * self.running_var + self.momentum * var).astype(
                self.running_var.dtype
            )
        else:
            mean = self.running_mean.astype(x.dtype)
            var = self.running_var.astype(x.dtype)
        invstd = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * invstd
        if train:
            self._cache = (xhat, invstd, x.shape)
        return self.gamma.astype(x.dtype) * xhat + self.beta.astype(x.dtype)

    def backward(self, dy):
        xhat, invstd, x_shape = self._cache
        m = x_shape[0] * x_shape[1] * x_shape[2]
        axes = (0, 1, 2)
        self.grads["gamma"] = (dy * xhat).sum(axis=axes)
        self.grads["beta"] = dy.sum(axis=axes)
        dxhat = dy * self.gamma.astype(dy.dtype)
        return (invstd / m) * (m * dxhat - dxhat.sum(axis=axes) - xhat * (dxhat * xhat).sum(axis=axes))


class ReLU:
    kind = "relu"

    def __init__(self):
        self.grads = {}
        self._cache = None

    def spec_dict(self):
        return {"kind": self.kind}

    def params(self):
        return []

    def buffers(self):
        return []

    def forward(self, x, train=False):
        if train:
            self._cache = x > 0
        return np.maximum(x, 0)

    def backward(self, dy):
        return dy * self._cache


class MaxPool:
    kind = "maxpool"

    def __init__(self, k):
        self.k = int(k)
        self.grads = {}
        self._cache = None

    def spec_dict(self):
        return {"kind": self.kind, "k": self.k}

    def params(self):
        return []

    def buffers(self):
        return []

    def forward(self, x, train=False):
        n, h, w, c = x.shape
        k = self.k
        ho, wo = h // k, w // k
        if ho < 1 or wo < 1:
            raise ValueError(f"maxpool {k} too large for input {h}x{w}")
        xc = x[:, : ho * k, : wo * k, :]
        win = xc.reshape(n, ho, k, wo, k, c).transpose(0, 1, 3, 5, 2, 4).reshape(n, ho, wo, c, k * k)
        arg = win.argmax(axis=-1)
        y = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
        if train:
            self._cache = (arg, x.shape)
        return y

    def backward(self, dy):
        arg, x_shape = self._cache
        n, h, w, c = x_shape
        k = self.k
        ho, wo = h // k, w // k
        dwin = np.zeros((n, ho, wo, c, k * k), dtype=dy.dtype)
        np.put_along_axis(dwin, arg[..., None], dy[..., None], axis=-1)
        dx = np.zeros(x_shape, dtype=dy.dtype)
        dx[:, : ho * k, : wo * k, :] = (
            dwin.reshape(n, ho, wo, c, k, k).transpose(0, 1, 4, 2, 5, 3).reshape(n, ho * k, wo * k, c)
        )
        return dx


class GlobalAvgPool:
    kind = "gap"

    def __init__(self):
        self.grads = {}
        self._cache = None

    def spec_dict(self):
        return {"kind": self.kind}

    def params(self):
        return []

    def buffers(self):
        return []

    def forward(self, x, train=False):
        if train:
            self._cache = x.shape
        return x.mean(axis=(1, 2))

    def backward(self, dy):
        n, h, w, c = self._cache
        return np.broadcast_to(dy[:, None, None, :] / (h * w), (n, h, w, c)).astype(dy.dtype)


class Dense:
    kind = "dense"

    def __init__(self, n_in, n_out, bias=True, w=None, b=None):
        self.n_in = int(n_in)
        self.n_out = int(n_out)
        self.has_bias = bool(bias)
        self.w = np.zeros((n_in, n_out), dtype=np.float32) if w is None else w
        self.b = (np.zeros(n_out, dtype=np.float32) if bias else None) if b is None else b
        self.grads = {}
        self._cache = None

    def spec_dict(self):
        return {"kind": self.kind, "in": self.n_in, "out": self.n_out, "bias": self.has_bias}

    def params(self):
        out = [("w", self.w)]
        if self.has_bias:
            out.append(("b", self.b))
        return out

    def buffers(self):
        return []

    def forward(self, x, train=False):
        if train:
            self._cache = x
        y = x @ self.w.astype(x.dtype)
        return y + self.b.astype(x.dtype) if self.has_bias else y

    def backward(self, dy):
        x = self._cache
        self.grads["w"] = x.T @ dy
        if self.has_bias:
            self.grads["b"] = dy.sum(axis=0)
        return dy @ self.w.astype(dy.dtype).T


_LAYER_KINDS = {cls.kind: cls for cls in (Conv2d, BatchNorm, ReLU, MaxPool, GlobalAvgPool, Dense)}


class Model:
    """Ordered layer chain; also the pruning module's ModelGraph."""

    def __init__(self, layers):
        self.layers = list(layers)

    def forward(self, x, train=False):
        for layer in self.layers:
            x = layer.forward(x, train=train)
        return x

    def backward(self, dout):
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout

    def named_params(self):
        for i, layer in enumerate(self.layers):
            for name, arr in layer.params():
                yield i, name, arr

    def set_param(self, layer_idx, name, arr):
        layer = self.layers[layer_idx]
        attr = {"w": "w", "b": "b", "gamma": "gamma", "beta": "beta"}[name]
        setattr(layer, attr, arr)

    def astype(self, dtype):
        for i, name, arr in self.named_params():
            self.set_param(i, name, arr.astype(dtype))
        for layer in self.layers:
            for name, arr in layer.buffers():
                setattr(layer, name, arr.astype(dtype))
        return self

    def copy(self):
        clone = load_spec([layer.spec_dict() for layer in self.layers])
        for (i, name, arr) in self.named_params():
            clone.set_param(i, name, arr.copy())
        for layer, other in zip(self.layers, clone.layers):
            for name, arr in layer.buffers():
                setattr(other, name, arr.copy())
        return clone


def load_spec(spec_list) -> Model:
    layers = []
    for d in spec_list:
        cls = _LAYER_KINDS[d["kind"]]
        if cls is Conv2d:
            layers.append(Conv2d(d["c_in"], d["c_out"], d["k"], d["stride"], d["padding"], d["bias"]))
        elif cls is BatchNorm:
            layers.append(BatchNorm(d["c"]))
        elif cls is MaxPool:
            layers.append(MaxPool(d["k"]))
        elif cls is Dense:
            layers.append(Dense(d["in"], d["out"], d["bias"]))
        else:
            layers.append(cls())
    return Model(layers)


def default_model(seed: int, in_channels: int = 3, widths=(16, 32, 64, 64), k: int = 3) -> Model:
    """The desk-scale detector: stride-2 conv/BN/ReLU blocks, GAP, dense."""
    rng = child_rng(seed, LANE_INIT)
    layers = []
    c_prev = in_channels
    for c in widths:
        conv = Conv2d(c_prev, c, k, stride=2, padding=k // 2, bias=True)
        limit = 1.0 / np.sqrt(c_prev * k * k)
        conv.w = rng.uniform(-limit, limit, size=conv.w.shape).astype(np.float32)
        layers += [conv, BatchNorm(c), ReLU()]
        c_prev = c
    layers.append(GlobalAvgPool())
    dense = Dense(c_prev, 1, bias=True)
    limit = 1.0 / np.sqrt(c_prev)
    dense.w = rng.uniform(-limit, limit, size=dense.w.shape).astype(np.float32)
    layers.append(dense)
    return Model(layers)


def forward(model: Model, batch: np.ndarray, train: bool = False) -> np.ndarray:
    """Logits, one per image; eval mode unless train is set."""
    out = model.forward(batch, train=train)
    if out.ndim == 2 and out.shape[1] == 1:
        return out[:, 0]
    return out


def bce_loss(logits, labels) -> float:
    """Mean binary cross-entropy on logits, log-sum-exp stabilized."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if logits.size == 0:
        raise ValueError("empty batch")
    if logits.shape != labels.shape:
        raise ValueError("logits and labels must have equal length")
    return float(np.mean(np.logaddexp(0.0, logits) - labels * logits))


def bce_grad(logits, labels) -> np.ndarray:
    """d(mean BCE)/d(logits) = (sigmoid(z) - y) / N."""
    logits = np.asarray(logits)
    labels = np.asarray(labels)
    return (expit(logits) - labels) / logits.shape[0]


def loss_and_grads(model: Model, batch, labels):
    """One train-mode forward/backward pass; returns the loss value."""
    logits = forward(model, batch, train=True)
    loss = bce_loss(logits, labels)
    dlogits = bce_grad(logits, labels).astype(batch.dtype)
    model.backward(dlogits[:, None])
    return loss


@dataclass
class TrainConfig:
    epochs: int = 5
    batch_size: int = 32
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    pipeline: PipelineSpec = field(default_factory=lambda: PipelineSpec(crop_size=64))

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate < 0:
            raise ValueError("hyperparameters must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


class _Adam:
    def __init__(self, cfg):
        self.cfg = cfg
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, model):
        c = self.cfg
        self.t += 1
        for i, name, arr in model.named_params():
            g = model.layers[i].grads[name].astype(arr.dtype)
            key = (i, name)
            m = self.m.get(key, 0.0) * c.beta1 + (1 - c.beta1) * g
            v = self.v.get(key, 0.0) * c.beta2 + (1 - c.beta2) * g * g
            self.m[key], self.v[key] = m, v
            mhat = m / (1 - c.beta1**self.t)
            vhat = v / (1 - c.beta2**self.t)
            arr -= (c.learning_rate * mhat / (np.sqrt(vhat) + c.adam_eps)).astype(arr.dtype)


class _SGD:
    def __init__(self, cfg):
        self.cfg = cfg
        self.vel = {}

    def step(self, model):
        c = self.cfg
        for i, name, arr in model.named_params():
            g = model.layers[i].grads[name].astype(arr.dtype)
            key = (i, name)
            v = self.vel.get(key, 0.0) * c.momentum + g
            self.vel[key] = v
            arr -= (c.learning_rate * v).astype(arr.dtype)


def train(model: Model, images, labels, config: TrainConfig, sample_indices=None):
    """Train in place; returns the per-epoch mean loss history.

    Deterministic given the config seed: batch order comes from a seeded
    shuffle and each training image gets a child RNG keyed on (epoch,
    dataset index) for its augmentation pipeline.
    """
    n = len(images)
    if n == 0:
        raise ValueError("empty training set")
    if sample_indices is None:
        sample_indices = np.arange(n)
    sample_indices = np.asarray(sample_indices)
    shuffle_rng = child_rng(config.seed, LANE_SHUFFLE)
    optimizer = _Adam(config) if config.optimizer == "adam" else _SGD(config)
    history = []
    for epoch in range(config.epochs):
        perm = shuffle_rng.permutation(len(sample_indices))
        total, count = 0.0, 0
        for start in range(0, len(perm), config.batch_size):
            batch_ids = sample_indices[perm[start : start + config.batch_size]]
            batch = np.stack(
                [
                    train_pipeline(images[i], config.pipeline, child_rng(config.seed, LANE_AUGMENT, epoch, int(i)))
                    for i in batch_ids
                ]
            )
            loss = loss_and_grads(model, batch, labels[batch_ids])
            if not np.isfinite(loss):
                raise RuntimeError(f"training diverged: non-finite loss at epoch {epoch}, batch {start // config.batch_size}")
            optimizer.step(model)
            total += loss * len(batch_ids)
            count += len(batch_ids)
        history.append(total / count)
    return history


def predict_scores(model: Model, images, crop_size: int, batch_size: int = 256) -> np.ndarray:
    """Sigmoid scores after the deterministic eval crop, split order kept."""
    scores = []
    for start in range(0, len(images), batch_size):
        batch = np.stack([eval_preprocess(img, crop_size) for img in images[start : start + batch_size]])
        scores.append(expit(forward(model, batch, train=False)))
    return np.concatenate(scores)


def save_model(model: Model, out_dir, extra: dict | None = None) -> None:
    """Write manifest.json plus little-endian float32 blobs (weights.bin)."""
    os.makedirs(out_dir, exist_ok=True)
    tensors = []
    blobs = []
    offset = 0
    for i, layer in enumerate(model.layers):
        for group, pairs in (("param", layer.params()), ("buffer", layer.buffers())):
            for name, arr in pairs:
                raw = np.ascontiguousarray(arr, dtype="<f4").tobytes()
                tensors.append(
                    {
                        "layer": i,
                        "name": name,
                        "group": group,
                        "shape": list(arr.shape),
                        "offset": offset,
                        "nbytes": len(raw),
                    }
                )
                blobs.append(raw)
                offset += len(raw)
    manifest = {
        "format_version": MODEL_FORMAT_VERSION,
        "layers": [layer.spec_dict() for layer in model.layers],
        "tensors": tensors,
        "extra": extra or {},
    }
    tmp = os.path.join(out_dir, "manifest.json.tmp")
    with open(tmp, "w", encoding="ascii", newline="\n") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    os.replace(tmp, os.path.join(out_dir, "manifest.json"))
    tmp = os.path.join(out_dir, "weights.bin.tmp")
    with open(tmp, "wb") as f:
        f.write(b"".join(blobs))
    os.replace(tmp, os.path.join(out_dir, "weights.bin"))


def load_model(model_dir):
    """Rebuild a model from its on-disk container; returns (model, extra)."""
    with open(os.path.join(model_dir, "manifest.json"), "r", encoding="ascii") as f:
        manifest = json.load(f)
    if manifest.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format {manifest.get('format_version')}")
    model = load_spec(manifest["layers"])
    with open(os.path.join(model_dir, "weights.bin"), "rb") as f:
        raw = f.read()
    for t in manifest["tensors"]:
        arr = np.frombuffer(raw[t["offset"] : t["offset"] + t["nbytes"]], dtype="<f4").reshape(t["shape"])
        arr = arr.astype(np.float32)
        layer = model.layers[t["layer"]]
        if t["group"] == "param":
            model.set_param(t["layer"], t["name"], arr)
        else:
            setattr(layer, t["name"], arr)
    return model, manifest.get("extra", {})
