"""Structured layer-wise channel pruning with L1 importance.

Per conv layer the importance of output channel i is the L1 norm of its
weight slice (bias excluded). The top max(1, ceil((1-p) * C_out))
channels are retained (ties keep the lower index), the matching
BatchNorm rows and downstream input channels are removed with it, and
the final dense layer's input features follow the last conv through
global average pooling. Pruning is physical: tensors shrink.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .nn import BatchNorm, Conv2d, Dense, GlobalAvgPool, MaxPool, Model, ReLU, TrainConfig, train
from .rng import LANE_SUBSET, child_rng


@dataclass(frozen=True)
class PruneSpec:
    ratio: float = 0.5
    finetune_epochs: int = 5
    finetune_fraction: float = 0.02

    def __post_init__(self):
        if not 0.0 <= self.ratio < 1.0:
            raise ValueError(f"prune ratio must be in [0, 1), got {self.ratio}")
        if self.finetune_epochs < 0:
            raise ValueError("finetune_epochs must be >= 0")
        if not 0.0 < self.finetune_fraction <= 1.0:
            raise ValueError("finetune_fraction must be in (0, 1]")


@dataclass
class LayerPlan:
    layer_index: int
    scores: np.ndarray
    retained: np.ndarray  # sorted output-channel indices
    threshold: float  # smallest retained score (the quantile cut)


@dataclass
class PrunePlan:
    ratio: float
    layers: list  # LayerPlan per prunable conv, in model order

    def retained_for(self, layer_index: int):
        for lp in self.layers:
            if lp.layer_index == layer_index:
                return lp.retained
        return None


def channel_importance(layer: Conv2d) -> np.ndarray:
    """L1 norm of each output channel's weights, bias excluded."""
    if not isinstance(layer, Conv2d):
        raise TypeError("channel importance is defined for conv layers")
    return np.abs(layer.w).sum(axis=(1, 2, 3))


def retained_count(c_out: int, ratio: float) -> int:
    return max(1, math.ceil((1.0 - ratio) * c_out))


def make_plan(model: Model, spec: PruneSpec) -> PrunePlan:
    """Rank channels per conv and schedule dependency-consistent removal."""
    plans = []
    for i, layer in enumerate(model.layers):
        if not isinstance(layer, Conv2d):
            continue
        scores = channel_importance(layer)
        keep = retained_count(layer.c_out, spec.ratio)
        # Stable argsort of -scores keeps lower indices first among ties.
        order = np.argsort(-scores, kind="stable")
        retained = np.sort(order[:keep])
        plans.append(
            LayerPlan(
                layer_index=i,
                scores=scores,
                retained=retained.astype(np.int64),
                threshold=float(scores[retained].min()),
            )
        )
    return PrunePlan(ratio=spec.ratio, layers=plans)


def apply_plan(model: Model, plan: PrunePlan) -> Model:
    """Physically remove the pruned channels; returns a new model."""
    out_layers = []
    current = None  # retained channels of the producing conv, None = untouched
    for i, layer in enumerate(model.layers):
        if isinstance(layer, Conv2d):
            retained = plan.retained_for(i)
            if retained is None:
                raise ValueError(f"plan is missing conv layer {i}")
            if retained.max(initial=0) >= layer.c_out:
                raise ValueError(f"plan does not match conv layer {i}")
            w = layer.w
            if current is not None:
                w = w[:, current, :, :]
            w = w[retained]
            b = layer.b[retained] if layer.has_bias else None
            out_layers.append(
                Conv2d(
                    w.shape[1],
                    len(retained),
                    layer.k,
                    layer.stride,
                    layer.padding,
                    layer.has_bias,
                    w=w.copy(),
                    b=None if b is None else b.copy(),
                )
            )
            current = retained
        elif isinstance(layer, BatchNorm):
            if current is None:
                out_layers.append(
                    BatchNorm(
                        layer.c,
                        layer.gamma.copy(),
                        layer.beta.copy(),
                        layer.running_mean.copy(),
                        layer.running_var.copy(),
                    )
                )
            else:
                out_layers.append(
                    BatchNorm(
                        len(current),
                        layer.gamma[current].copy(),
                        layer.beta[current].copy(),
                        layer.running_mean[current].copy(),
                        layer.running_var[current].copy(),
                    )
                )
        elif isinstance(layer, Dense):
            w = layer.w
            if current is not None:
                # GAP maps channel j to dense input feature j.
                w = w[current, :]
            out_layers.append(
                Dense(
                    w.shape[0],
                    layer.n_out,
                    layer.has_bias,
                    w=w.copy(),
                    b=None if layer.b is None else layer.b.copy(),
                )
            )
            current = None  # dense output features are not pruned
        elif isinstance(layer, (ReLU, MaxPool, GlobalAvgPool)):
            out_layers.append(type(layer)(layer.k) if isinstance(layer, MaxPool) else type(layer)())
        else:
            raise TypeError(f"unsupported layer {layer!r}")
    return Model(out_layers)


def count_params(model: Model) -> int:
    """Total trainable elements: weights, biases, and BN affine terms."""
    return sum(arr.size for _, _, arr in model.named_params())


def count_macs(model: Model, input_hw) -> int:
    """Multiply-accumulates for one image: conv C_out*C_in*K^2*Ho*Wo, dense in*out."""
    h, w = input_hw
    total = 0
    for layer in model.layers:
        if isinstance(layer, Conv2d):
            ho, wo = layer.out_hw(h, w)
            if ho < 1 or wo < 1:
                raise ValueError(f"input too small for conv at {h}x{w}")
            total += layer.c_out * layer.c_in * layer.k * layer.k * ho * wo
            h, w = ho, wo
        elif isinstance(layer, MaxPool):
            h, w = h // layer.k, w // layer.k
        elif isinstance(layer, GlobalAvgPool):
            h, w = 1, 1
        elif isinstance(layer, Dense):
            total += layer.n_in * layer.n_out
    return total


def plan_report(plan: PrunePlan) -> str:
    """Human-readable audit report: retained indices, scores, thresholds."""
    lines = [f"prune_ratio\t{plan.ratio}"]
    for lp in plan.layers:
        lines.append(
            f"layer {lp.layer_index}: retained {len(lp.retained)}/{len(lp.scores)} threshold {lp.threshold:.6g}"
        )
        lines.append("  retained_indices\t" + ",".join(str(int(i)) for i in lp.retained))
        lines.append("  scores\t" + ",".join(f"{s:.6g}" for s in lp.scores))
    return "\n".join(lines) + "\n"


def finetune(model: Model, images, labels, spec: PruneSpec, config: TrainConfig):
    """Fine-tune a pruned model on a seeded subsample of the train split.

    The subsample holds round(fraction * N) items but never less than one
    batch (or the whole set if smaller). Returns the loss history.
    """
    n = len(images)
    n_sub = round(spec.finetune_fraction * n)
    n_sub = max(n_sub, min(config.batch_size, n))
    rng = child_rng(config.seed, LANE_SUBSET)
    subset = np.sort(rng.choice(n, size=n_sub, replace=False))
    ft_config = TrainConfig(
        epochs=spec.finetune_epochs,
        batch_size=config.batch_size,
        learning_rate=config.learning_rate,
        optimizer=config.optimizer,
        momentum=config.momentum,
        beta1=config.beta1,
        beta2=config.beta2,
        adam_eps=config.adam_eps,
        seed=config.seed,
        pipeline=config.pipeline,
    )
    return train(model, images, labels, ft_config, sample_indices=subset)
