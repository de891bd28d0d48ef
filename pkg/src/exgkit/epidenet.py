"""EpiDeNet: a tiny five-block CNN for multichannel biosignal windows.

The network treats a (C, T) window as a one-channel image. Each block is a
same-padded Conv2D followed by a rectifier and a max pool; kernels are
(1,4)/(1,16)/(1,8)/(16,1)/(8,1) with 4/16/16/16/16 filters, pools are
(1,8)/(1,4)/(1,4)/(D,1) with the pool height D parameterizing the EOG
(D=1) vs EEG (D=4) variants. A global average pool reduces block five to
16 features feeding a dense head sized to the task's class count.

Forward, loss and reverse-mode gradients are implemented directly in numpy
so that float and integer inference paths can share one topology
description and the gradients stay auditable against finite differences.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ParameterError

__all__ = [
    "EpiDeNetParams",
    "CONV_KERNELS",
    "CONV_FILTERS",
    "FEATURES",
    "pool_shapes",
    "shape_trace",
    "build_epidenet",
    "forward",
    "loss_and_grad",
    "softmax",
]

CONV_KERNELS = ((1, 4), (1, 16), (1, 8), (16, 1), (8, 1))
CONV_FILTERS = (4, 16, 16, 16, 16)
FEATURES = 16
MIN_SAMPLES = 128


def pool_shapes(pool_height: int):
    """Max-pool kernels per block; block five pools globally instead."""
    return ((1, 8), (1, 4), (1, 4), (pool_height, 1), None)


@dataclass
class EpiDeNetParams:
    """Network weights plus the topology metadata they were built for.

    tensors maps, in declaration order, conv{i}_w (out, in, kh, kw) and
    conv{i}_b (out,) for i = 1..5, then dense_w (16, num_classes) and
    dense_b (num_classes,).
    """

    tensors: dict
    channels: int
    samples: int
    pool_height: int
    num_classes: int
    seed: int = 0

    @property
    def dtype(self):
        return self.tensors["conv1_w"].dtype

    def copy(self) -> "EpiDeNetParams":
        return EpiDeNetParams(
            tensors={k: v.copy() for k, v in self.tensors.items()},
            channels=self.channels,
            samples=self.samples,
            pool_height=self.pool_height,
            num_classes=self.num_classes,
            seed=self.seed,
        )

    def astype(self, dtype) -> "EpiDeNetParams":
        out = self.copy()
        out.tensors = {k: v.astype(dtype) for k, v in out.tensors.items()}
        return out


def shape_trace(channels: int, samples: int, pool_height: int, num_classes: int = 11) -> list:
    """Per-layer output shapes as (name, (filters, height, width)) tuples.

    Raises ParameterError when the pooling chain would collapse a dimension
    to zero.
    """
    if channels < 1:
        raise ParameterError(f"channels must be >= 1, got {channels}")
    if pool_height not in (1, 4):
        raise ParameterError(f"pool_height must be 1 or 4, got {pool_height}")
    if channels % pool_height:
        raise ParameterError(
            f"channels ({channels}) must be divisible by pool_height ({pool_height})"
        )
    if samples < MIN_SAMPLES:
        raise ParameterError(
            f"samples must be >= {MIN_SAMPLES} for the pooling chain, got {samples}"
        )
    if num_classes < 2:
        raise ParameterError(f"num_classes must be >= 2, got {num_classes}")
    trace = []
    h, w = channels, samples
    for i, (filters, pool) in enumerate(zip(CONV_FILTERS, pool_shapes(pool_height)), start=1):
        trace.append((f"conv{i}", (filters, h, w)))
        if pool is not None:
            h, w = h // pool[0], w // pool[1]
            if h < 1 or w < 1:
                raise ParameterError(
                    f"pooling chain exhausts the input at block {i} "
                    f"(channels={channels}, samples={samples})"
                )
            trace.append((f"pool{i}", (filters, h, w)))
    trace.append(("avgpool", (FEATURES, 1, 1)))
    trace.append(("dense", (num_classes,)))
    return trace


def build_epidenet(
    channels: int,
    samples: int,
    pool_height: int = 1,
    num_classes: int = 11,
    seed: int = 0,
    dtype=np.float32,
) -> EpiDeNetParams:
    """Freshly initialized parameters: fan-in-scaled uniform weights, zero biases."""
    shape_trace(channels, samples, pool_height, num_classes)
    rng = np.random.default_rng(seed)
    tensors = {}
    in_ch = 1
    for i, (filters, (kh, kw)) in enumerate(zip(CONV_FILTERS, CONV_KERNELS), start=1):
        fan_in = in_ch * kh * kw
        limit = 1.0 / np.sqrt(fan_in)
        tensors[f"conv{i}_w"] = rng.uniform(-limit, limit, size=(filters, in_ch, kh, kw)).astype(dtype)
        tensors[f"conv{i}_b"] = np.zeros(filters, dtype=dtype)
        in_ch = filters
    limit = 1.0 / np.sqrt(FEATURES)
    tensors["dense_w"] = rng.uniform(-limit, limit, size=(FEATURES, num_classes)).astype(dtype)
    tensors["dense_b"] = np.zeros(num_classes, dtype=dtype)
    return EpiDeNetParams(
        tensors=tensors,
        channels=channels,
        samples=samples,
        pool_height=pool_height,
        num_classes=num_classes,
        seed=seed,
    )


def _same_pads(kh: int, kw: int):
    pt, pl = (kh - 1) // 2, (kw - 1) // 2
    return pt, kh - 1 - pt, pl, kw - 1 - pl


def _conv_same(x: np.ndarray, w: np.ndarray):
    """Same-padded 2-D correlation. Returns (y, padded input)."""
    kh, kw = w.shape[2], w.shape[3]
    pt, pb, pl, pr = _same_pads(kh, kw)
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    y = np.einsum("bchwij,ocij->bohw", win, w, optimize=True)
    return y, xp


def _conv_same_backward(dy: np.ndarray, xp: np.ndarray, w: np.ndarray, x_shape):
    _, _, h, width = x_shape
    kh, kw = w.shape[2], w.shape[3]
    dw = np.empty_like(w)
    for i in range(kh):
        for j in range(kw):
            dw[:, :, i, j] = np.einsum(
                "bohw,bchw->oc", dy, xp[:, :, i : i + h, j : j + width], optimize=True
            )
    dxp = np.zeros_like(xp)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i : i + h, j : j + width] += np.einsum(
                "bohw,oc->bchw", dy, w[:, :, i, j], optimize=True
            )
    pt, _, pl, _ = _same_pads(kh, kw)
    dx = dxp[:, :, pt : pt + h, pl : pl + width]
    db = dy.sum(axis=(0, 2, 3))
    return dx, dw, db


def _maxpool(x: np.ndarray, pool):
    """Non-overlapping max pool with floor division; ties take the lowest
    flat (row, col) index inside the window."""
    ph, pw = pool
    if ph == 1 and pw == 1:
        return x, None
    b, c, h, w = x.shape
    h2, w2 = h // ph, w // pw
    xr = (
        x[:, :, : h2 * ph, : w2 * pw]
        .reshape(b, c, h2, ph, w2, pw)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(b, c, h2, w2, ph * pw)
    )
    idx = xr.argmax(axis=-1)
    y = np.take_along_axis(xr, idx[..., None], axis=-1)[..., 0]
    return y, (idx, x.shape, (ph, pw))


def _maxpool_backward(dy: np.ndarray, cache):
    idx, x_shape, (ph, pw) = cache
    b, c, h, w = x_shape
    h2, w2 = h // ph, w // pw
    g = np.zeros((b, c, h2, w2, ph * pw), dtype=dy.dtype)
    np.put_along_axis(g, idx[..., None], dy[..., None], axis=-1)
    g = g.reshape(b, c, h2, w2, ph, pw).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h2 * ph, w2 * pw)
    dx = np.zeros(x_shape, dtype=dy.dtype)
    dx[:, :, : h2 * ph, : w2 * pw] = g
    return dx


def _as_batch(params: EpiDeNetParams, x: np.ndarray):
    x = np.asarray(x, dtype=params.dtype)
    squeeze = x.ndim == 2
    if squeeze:
        x = x[None]
    if x.ndim != 3 or x.shape[1] != params.channels or x.shape[2] != params.samples:
        raise ParameterError(
            f"input must be (batch, {params.channels}, {params.samples}), got {x.shape}"
        )
    return x, squeeze


def _run_blocks(params: EpiDeNetParams, xb: np.ndarray, keep_caches: bool):
    pools = pool_shapes(params.pool_height)
    a = xb[:, None, :, :]
    caches = []
    relu_outputs = []
    for i in range(5):
        w = params.tensors[f"conv{i + 1}_w"]
        bias = params.tensors[f"conv{i + 1}_b"]
        z, xp = _conv_same(a, w)
        z += bias[None, :, None, None]
        mask = z > 0
        r = np.where(mask, z, params.dtype.type(0))
        relu_outputs.append(r)
        if pools[i] is not None:
            out, pc = _maxpool(r, pools[i])
        else:
            out, pc = r, None
        if keep_caches:
            caches.append((a.shape, xp, mask, pc))
        a = out
    feat = a.mean(axis=(2, 3))
    logits = feat @ params.tensors["dense_w"] + params.tensors["dense_b"]
    return logits, feat, a.shape, caches, relu_outputs


def forward(params: EpiDeNetParams, x: np.ndarray, return_activations: bool = False):
    """Class logits for a (C, T) window or a (batch, C, T) stack.

    With return_activations=True also returns a dict holding the input and
    each block's post-rectifier output (used for quantization calibration).
    """
    xb, squeeze = _as_batch(params, x)
    logits, feat, _, _, relus = _run_blocks(params, xb, keep_caches=False)
    if squeeze:
        logits = logits[0]
    if not return_activations:
        return logits
    acts = {"input": xb, "features": feat}
    for i, r in enumerate(relus, start=1):
        acts[f"conv{i}"] = r
    return logits, acts


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def loss_and_grad(params: EpiDeNetParams, x: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over a batch and its gradient for every tensor.

    Returns (loss, grads) with grads keyed like params.tensors.
    """
    xb, _ = _as_batch(params, x)
    y = np.asarray(labels).ravel().astype(np.int64)
    if y.size != xb.shape[0]:
        raise ParameterError(f"{xb.shape[0]} inputs for {y.size} labels")
    if y.size and (y.min() < 0 or y.max() >= params.num_classes):
        raise ParameterError(
            f"labels must be in [0, {params.num_classes - 1}], got range [{y.min()}, {y.max()}]"
        )
    b = xb.shape[0]
    logits, feat, out_shape, caches, _ = _run_blocks(params, xb, keep_caches=True)

    zmax = logits.max(axis=1, keepdims=True)
    logsumexp = zmax + np.log(np.exp(logits - zmax).sum(axis=1, keepdims=True))
    logp = logits - logsumexp
    loss = float(-logp[np.arange(b), y].mean())

    dlogits = np.exp(logp)
    dlogits[np.arange(b), y] -= 1.0
    dlogits /= b
    dlogits = dlogits.astype(params.dtype)

    grads = {
        "dense_w": feat.T @ dlogits,
        "dense_b": dlogits.sum(axis=0),
    }
    dfeat = dlogits @ params.tensors["dense_w"].T
    _, _, h5, w5 = out_shape
    da = np.broadcast_to(dfeat[:, :, None, None], out_shape).astype(params.dtype) / (h5 * w5)

    pools = pool_shapes(params.pool_height)
    for i in range(4, -1, -1):
        a_shape, xp, mask, pc = caches[i]
        if pc is not None:
            da = _maxpool_backward(da, pc)
        dz = np.where(mask, da, params.dtype.type(0))
        da, dw, db = _conv_same_backward(dz, xp, params.tensors[f"conv{i + 1}_w"], a_shape)
        grads[f"conv{i + 1}_w"] = dw
        grads[f"conv{i + 1}_b"] = db
    return loss, grads
