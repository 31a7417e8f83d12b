"""Forward/backward passes with handwritten gradients.

Parameters live in an ordered name -> array mapping; the backward pass
returns gradients under the same names. All randomness (init, dropout
masks) flows through explicit numpy Generators, so fixed seeds give
bitwise-identical trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError
from . import kernels
from .arch import ArchSpec


@dataclass
class ModelParams:
    arch: ArchSpec
    tensors: dict[str, np.ndarray]

    def copy(self) -> "ModelParams":
        return ModelParams(self.arch, {k: v.copy() for k, v in self.tensors.items()})

    def names(self) -> list[str]:
        return list(self.tensors)


def param_names(arch: ArchSpec) -> list[str]:
    names = []
    for i in range(len(arch.conv_channels)):
        names += [f"conv{i}_w", f"conv{i}_b"]
    names += ["dense_w", "dense_b", "out_w", "out_b"]
    return names


def init_model(arch: ArchSpec, seed: int, dtype=np.float32) -> ModelParams:
    """He-normal weights (std = sqrt(2 / fan_in)), zero biases."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    c_in = arch.input_shape[0]
    for i, c_out in enumerate(arch.conv_channels):
        fan_in = c_in * 9
        tensors[f"conv{i}_w"] = rng.normal(
            0.0, np.sqrt(2.0 / fan_in), size=(c_out, c_in, 3, 3)
        ).astype(dtype)
        tensors[f"conv{i}_b"] = np.zeros(c_out, dtype=dtype)
        c_in = c_out
    flat = arch.flat_features()
    tensors["dense_w"] = rng.normal(
        0.0, np.sqrt(2.0 / flat), size=(flat, arch.dense_units)
    ).astype(dtype)
    tensors["dense_b"] = np.zeros(arch.dense_units, dtype=dtype)
    tensors["out_w"] = rng.normal(
        0.0, np.sqrt(2.0 / arch.dense_units), size=(arch.dense_units, arch.n_classes)
    ).astype(dtype)
    tensors["out_b"] = np.zeros(arch.n_classes, dtype=dtype)
    return ModelParams(arch=arch, tensors=tensors)


def _dropout_mask(rng, shape, p: float, dtype) -> np.ndarray:
    # Inverted dropout: scale retained units by 1/(1-p) at train time.
    draw_dtype = dtype if dtype in (np.float32, np.float64) else np.float64
    mask = (rng.random(shape, dtype=draw_dtype) >= p).astype(dtype)
    mask /= np.asarray(1.0 - p, dtype=dtype)
    return mask


def forward(
    params: ModelParams,
    batch: np.ndarray,
    train: bool = False,
    dropout_rng: np.random.Generator | None = None,
):
    """Run the network; returns (logits, cache) with cache replayed by backward.

    Eval mode is deterministic and dropout-free. Train mode needs a
    dropout_rng when the arch has dropout > 0.
    """
    arch = params.arch
    x = np.ascontiguousarray(batch)
    if x.ndim == 3:
        x = x[:, None, :, :]
    if x.ndim != 4 or x.shape[1:] != arch.input_shape:
        raise ShapeError(f"batch shape {batch.shape} != (B, {arch.input_shape})")
    use_dropout = train and arch.dropout > 0.0
    if use_dropout and dropout_rng is None:
        raise ValueError("train-mode forward with dropout needs a dropout_rng")

    t = params.tensors
    blocks = []
    for i in range(len(arch.conv_channels)):
        conv_in = x
        y = kernels.conv2d_forward(conv_in, t[f"conv{i}_w"], t[f"conv{i}_b"])
        relu_mask = y > 0
        np.maximum(y, 0, out=y)
        pooled, switches = kernels.maxpool2x2_forward(y)
        mask = None
        if use_dropout:
            mask = _dropout_mask(dropout_rng, pooled.shape, arch.dropout, pooled.dtype)
            pooled = pooled * mask
        blocks.append(
            {
                "conv_in": conv_in,
                "relu_mask": relu_mask,
                "switches": switches,
                "pre_pool_hw": y.shape[2:],
                "dropout_mask": mask,
            }
        )
        x = pooled

    flat = x.reshape(x.shape[0], -1)
    z = flat @ t["dense_w"] + t["dense_b"]
    dense_relu_mask = z > 0
    h = z * dense_relu_mask
    dense_mask = None
    if use_dropout:
        dense_mask = _dropout_mask(dropout_rng, h.shape, arch.dropout, h.dtype)
        h = h * dense_mask
    logits = h @ t["out_w"] + t["out_b"]
    cache = {
        "blocks": blocks,
        "flat": flat,
        "conv_out_shape": x.shape,
        "dense_relu_mask": dense_relu_mask,
        "dense_mask": dense_mask,
        "h": h,
    }
    return logits, cache


def backward(params: ModelParams, cache: dict, dlogits: np.ndarray) -> dict[str, np.ndarray]:
    """Analytic gradients for every parameter, replaying forward's masks."""
    t = params.tensors
    grads: dict[str, np.ndarray] = {}
    grads["out_w"] = cache["h"].T @ dlogits
    grads["out_b"] = dlogits.sum(axis=0)
    dh = dlogits @ t["out_w"].T
    if cache["dense_mask"] is not None:
        dh = dh * cache["dense_mask"]
    dz = dh * cache["dense_relu_mask"]
    grads["dense_w"] = cache["flat"].T @ dz
    grads["dense_b"] = dz.sum(axis=0)
    dx = (dz @ t["dense_w"].T).reshape(cache["conv_out_shape"])

    for i in reversed(range(len(params.arch.conv_channels))):
        blk = cache["blocks"][i]
        if blk["dropout_mask"] is not None:
            dx = dx * blk["dropout_mask"]
        h_pre, w_pre = blk["pre_pool_hw"]
        dr = kernels.maxpool2x2_backward(blk["switches"], np.ascontiguousarray(dx), h_pre, w_pre)
        np.multiply(dr, blk["relu_mask"], out=dr)
        dx, dw, db = kernels.conv2d_backward(blk["conv_in"], t[f"conv{i}_w"], dr)
        grads[f"conv{i}_w"] = dw
        grads[f"conv{i}_b"] = db
    return {name: grads[name] for name in params.names()}


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def predict(params: ModelParams, spectrograms: np.ndarray):
    """Eval-mode class prediction; ties break toward the lowest class index.

    Accepts one spectrogram (H, W) or a batch (B, H, W) / (B, 1, H, W);
    returns (classes, probabilities) with matching leading shape.
    """
    x = np.asarray(spectrograms)
    single = x.ndim == 2
    if single:
        x = x[None]
    logits, _ = forward(params, x.astype(np.float32), train=False)
    probs = softmax(logits)
    classes = np.argmax(probs, axis=-1)
    if single:
        return int(classes[0]), probs[0]
    return classes, probs
