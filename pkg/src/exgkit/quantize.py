"""Post-training INT8 quantization, integer inference and MAC accounting.

Weights are quantized per tensor, symmetric (zero-point 0, codes in
[-127, 127]); activations per layer, affine (codes in [-128, 127]) with
ranges calibrated from data. Inference keeps every multiply-accumulate in
the integer domain with int32 accumulators; requantization between layers
uses one float64 multiplier per layer with round-to-nearest-even, which is
bit-reproducible across runs. A fixed-point multiplier+shift requantizer
would remove the float multiply entirely and is left as a documented
stretch goal.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .epidenet import (
    CONV_FILTERS,
    CONV_KERNELS,
    FEATURES,
    EpiDeNetParams,
    forward,
    pool_shapes,
    shape_trace,
    _maxpool,
    _same_pads,
)
from .errors import InternalError, ParameterError

__all__ = [
    "QuantTensor",
    "QuantizedModel",
    "MacReport",
    "PerfEstimate",
    "quantize",
    "dequantize_tensor",
    "q_forward",
    "count_macs",
    "perf_model",
]

WEIGHT_CODE_MAX = 127
ACT_CODE_MIN, ACT_CODE_MAX = -128, 127
INT32_MAX = 2**31 - 1
DEGENERATE_HALF_RANGE = 1e-3


@dataclass(frozen=True)
class QuantTensor:
    """Integer codes with their dequantization scale and zero point."""

    codes: np.ndarray
    scale: float
    zero_point: int = 0


def dequantize_tensor(qt: QuantTensor) -> np.ndarray:
    return qt.scale * (qt.codes.astype(np.float64) - qt.zero_point)


@dataclass(frozen=True)
class QuantizedModel:
    """INT8 counterpart of EpiDeNetParams.

    conv_w/dense_w hold int8 weight codes, conv_b/dense_b int32 bias codes
    already expressed on the accumulator grid (input_scale * weight_scale).
    act_scale/act_zero describe the affine activation grids: index 0 is the
    network input, indices 1..5 the per-block rectifier outputs.
    """

    conv_w: tuple
    conv_b: tuple
    dense_w: QuantTensor
    dense_b: np.ndarray
    act_scale: tuple
    act_zero: tuple
    channels: int
    samples: int
    pool_height: int
    num_classes: int
    seed: int = 0


def _quantize_weight(w: np.ndarray) -> QuantTensor:
    max_abs = float(np.max(np.abs(w))) if w.size else 0.0
    scale = max_abs / WEIGHT_CODE_MAX if max_abs > 0 else 1.0
    codes = np.clip(np.rint(w / scale), -WEIGHT_CODE_MAX, WEIGHT_CODE_MAX).astype(np.int8)
    return QuantTensor(codes=codes, scale=scale, zero_point=0)


def _act_grid(lo: float, hi: float):
    if hi - lo < 2 * DEGENERATE_HALF_RANGE:
        warnings.warn(
            "degenerate activation range widened for quantization", stacklevel=3
        )
        mid = (hi + lo) / 2.0
        lo, hi = mid - DEGENERATE_HALF_RANGE, mid + DEGENERATE_HALF_RANGE
    scale = (hi - lo) / (ACT_CODE_MAX - ACT_CODE_MIN)
    zero = int(np.clip(np.rint(ACT_CODE_MIN - lo / scale), ACT_CODE_MIN, ACT_CODE_MAX))
    return float(scale), zero


def _check_headroom(q_w: np.ndarray, q_b: np.ndarray) -> None:
    # worst case |acc|: every input code at full swing against the weight's
    # absolute column sum, plus the bias
    per_out = np.abs(q_w.astype(np.int64)).reshape(q_w.shape[0], -1).sum(axis=1)
    worst = per_out * (ACT_CODE_MAX - ACT_CODE_MIN) + np.abs(q_b.astype(np.int64))
    if int(worst.max(initial=0)) > INT32_MAX:
        raise InternalError("int32 accumulator headroom exhausted; quantization invalid")


def quantize(params: EpiDeNetParams, calibration: np.ndarray, batch_size: int = 128) -> QuantizedModel:
    """Quantize a float model using activation ranges observed on data."""
    calibration = np.asarray(calibration)
    if calibration.ndim == 2:
        calibration = calibration[None]
    if calibration.size == 0 or calibration.shape[0] == 0:
        raise ParameterError("calibration set must not be empty")
    lows = np.full(6, np.inf)
    highs = np.full(6, -np.inf)
    for lo in range(0, calibration.shape[0], batch_size):
        _, acts = forward(params, calibration[lo : lo + batch_size], return_activations=True)
        stages = [acts["input"]] + [acts[f"conv{i}"] for i in range(1, 6)]
        for s, a in enumerate(stages):
            lows[s] = min(lows[s], float(a.min()))
            highs[s] = max(highs[s], float(a.max()))
    grids = [_act_grid(lo, hi) for lo, hi in zip(lows, highs)]
    act_scale = tuple(g[0] for g in grids)
    act_zero = tuple(g[1] for g in grids)

    conv_w, conv_b = [], []
    for i in range(1, 6):
        qw = _quantize_weight(params.tensors[f"conv{i}_w"])
        bias_scale = act_scale[i - 1] * qw.scale
        qb = np.rint(params.tensors[f"conv{i}_b"].astype(np.float64) / bias_scale).astype(np.int64)
        if np.any(np.abs(qb) > INT32_MAX):
            raise InternalError("bias exceeds int32 range on the accumulator grid")
        qb = qb.astype(np.int32)
        _check_headroom(qw.codes, qb)
        conv_w.append(qw)
        conv_b.append(qb)

    qdw = _quantize_weight(params.tensors["dense_w"])
    dense_bias_scale = act_scale[5] * qdw.scale
    qdb = np.rint(params.tensors["dense_b"].astype(np.float64) / dense_bias_scale)
    qdb = qdb.astype(np.int32)
    _check_headroom(qdw.codes.T, qdb)

    return QuantizedModel(
        conv_w=tuple(conv_w),
        conv_b=tuple(conv_b),
        dense_w=qdw,
        dense_b=qdb,
        act_scale=act_scale,
        act_zero=act_zero,
        channels=params.channels,
        samples=params.samples,
        pool_height=params.pool_height,
        num_classes=params.num_classes,
        seed=params.seed,
    )


def _q_conv_same(q: np.ndarray, w_codes: np.ndarray, zero_point: int) -> np.ndarray:
    """Integer same-padded correlation with the zero-point correction folded
    in by padding with the zero-point itself."""
    kh, kw = w_codes.shape[2], w_codes.shape[3]
    pt, pb, pl, pr = _same_pads(kh, kw)
    qp = np.pad(q, ((0, 0), (0, 0), (pt, pb), (pl, pr)), constant_values=zero_point)
    win = sliding_window_view(qp, (kh, kw), axis=(2, 3))
    b, c, h, w_dim = q.shape
    # flatten windows to rows, weights to columns; int32 matmul
    flat = win.transpose(0, 2, 3, 1, 4, 5).reshape(b * h * w_dim, c * kh * kw).astype(np.int32)
    wmat = w_codes.reshape(w_codes.shape[0], -1).T.astype(np.int32)
    acc = flat @ wmat
    out = acc.reshape(b, h, w_dim, w_codes.shape[0]).transpose(0, 3, 1, 2)
    # remove the spurious zero-point plateau: conv(q - z) = conv(q) - z*sum(w)
    ksum = w_codes.astype(np.int32).reshape(w_codes.shape[0], -1).sum(axis=1)
    return out - zero_point * ksum[None, :, None, None]


def _requant(acc: np.ndarray, multiplier: float, zero_point: int) -> np.ndarray:
    q = np.rint(acc.astype(np.float64) * multiplier) + zero_point
    return np.clip(q, ACT_CODE_MIN, ACT_CODE_MAX).astype(np.int32)


def q_forward(qmodel: QuantizedModel, x: np.ndarray) -> np.ndarray:
    """Integer-domain inference; returns dequantized float logits."""
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 2
    if squeeze:
        x = x[None]
    if x.ndim != 3 or x.shape[1] != qmodel.channels or x.shape[2] != qmodel.samples:
        raise ParameterError(
            f"input must be (batch, {qmodel.channels}, {qmodel.samples}), got {x.shape}"
        )
    s_in, z_in = qmodel.act_scale[0], qmodel.act_zero[0]
    q = np.clip(np.rint(x / s_in) + z_in, ACT_CODE_MIN, ACT_CODE_MAX).astype(np.int32)
    q = q[:, None, :, :]
    pools = pool_shapes(qmodel.pool_height)
    for i in range(5):
        zp_in = qmodel.act_zero[i]
        acc = _q_conv_same(q, qmodel.conv_w[i].codes, zp_in)
        acc += qmodel.conv_b[i][None, :, None, None]
        s_out, z_out = qmodel.act_scale[i + 1], qmodel.act_zero[i + 1]
        mult = qmodel.act_scale[i] * qmodel.conv_w[i].scale / s_out
        q = _requant(acc, mult, z_out)
        q = np.maximum(q, z_out)  # rectifier: real zero sits at the zero point
        if pools[i] is not None:
            q, _ = _maxpool(q, pools[i])
    # global average pool on the integer grid (same scale/zero point)
    counts = q.shape[2] * q.shape[3]
    sums = q.sum(axis=(2, 3), dtype=np.int64)
    feat = np.clip(np.rint(sums / counts), ACT_CODE_MIN, ACT_CODE_MAX).astype(np.int32)
    z_feat = qmodel.act_zero[5]
    acc = feat @ qmodel.dense_w.codes.astype(np.int32)
    acc -= z_feat * qmodel.dense_w.codes.astype(np.int32).sum(axis=0)[None, :]
    acc += qmodel.dense_b[None, :]
    logits = acc.astype(np.float64) * (qmodel.act_scale[5] * qmodel.dense_w.scale)
    return logits[0] if squeeze else logits


@dataclass(frozen=True)
class MacReport:
    """Per-layer multiply-accumulate counts for one inference."""

    layers: tuple  # of (name, macs)
    total: int


def count_macs(model) -> MacReport:
    """Topology-only MAC count: conv = out elements x kernel x in channels
    (same padding preserves spatial dims), dense = in x out, pools and
    rectifiers are free."""
    c, t = model.channels, model.samples
    d, ncls = model.pool_height, model.num_classes
    trace = dict(shape_trace(c, t, d, ncls))
    layers = []
    in_ch = 1
    for i, (filters, (kh, kw)) in enumerate(zip(CONV_FILTERS, CONV_KERNELS), start=1):
        out_f, out_h, out_w = trace[f"conv{i}"]
        macs = out_f * out_h * out_w * kh * kw * in_ch
        layers.append((f"conv{i}", int(macs)))
        in_ch = filters
    layers.append(("dense", FEATURES * ncls))
    total = int(sum(m for _, m in layers))
    return MacReport(layers=tuple(layers), total=total)


@dataclass(frozen=True)
class PerfEstimate:
    time_ms: float | None
    energy_mj: float | None


def perf_model(
    macs,
    throughput_mmacs: float | None = None,
    efficiency_gmacs_per_w: float | None = None,
) -> PerfEstimate:
    """Latency/energy calculator against published operating points.

    time = MACs / throughput, energy = MACs / efficiency. This is a
    reporting tool, not a measurement: it simply scales the given operating
    point to the counted workload.
    """
    total = macs.total if isinstance(macs, MacReport) else int(macs)
    if total < 0:
        raise ParameterError(f"MAC count must be >= 0, got {total}")
    time_ms = None
    energy_mj = None
    if throughput_mmacs is not None:
        if throughput_mmacs <= 0:
            raise ParameterError(f"throughput must be positive, got {throughput_mmacs}")
        time_ms = total / (throughput_mmacs * 1e6) * 1e3
    if efficiency_gmacs_per_w is not None:
        if efficiency_gmacs_per_w <= 0:
            raise ParameterError(f"efficiency must be positive, got {efficiency_gmacs_per_w}")
        energy_mj = total / (efficiency_gmacs_per_w * 1e9) * 1e3
    return PerfEstimate(time_ms=time_ms, energy_mj=energy_mj)
