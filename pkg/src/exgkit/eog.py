"""Horizontal/vertical EOG derivation, preprocessing chains and trial cuts.

The derivation combines the three nose electrodes into the vertical and
horizontal components:

    v_v[n] = V_C[n] - (V_R[n] + V_L[n]) / 2
    v_h[n] = V_R[n] - V_L[n]

Two preprocessing chains are provided. The 'validation' chain (for plots)
removes a centered 2 s running mean and smooths with a 10th-order 40 Hz
Butterworth low-pass. The 'classification' chain band-passes 0.5-40 Hz
(4th order) and then removes a causal 2 s trailing mean, so it only ever
looks at past samples and can run on a live stream.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dsp
from .errors import ParameterError
from .records import MultiChannelRecord
from .synth import TrialLabel

__all__ = [
    "EogPair",
    "Epoch",
    "derive_eog",
    "preprocess_eog",
    "StreamingEogPreprocessor",
    "segment_trials",
    "truncate_epoch",
]

VALIDATION_LOWPASS_HZ = 40.0
VALIDATION_LOWPASS_ORDER = 10
CLASSIFICATION_BAND_HZ = (0.5, 40.0)
CLASSIFICATION_BAND_ORDER = 4
MEAN_REMOVAL_WINDOW_S = 2.0


@dataclass(frozen=True)
class EogPair:
    """Derived horizontal/vertical EOG pair in volts."""

    v_h: np.ndarray
    v_v: np.ndarray
    sample_rate: float

    def __post_init__(self):
        v_h = np.asarray(self.v_h, dtype=np.float64).ravel()
        v_v = np.asarray(self.v_v, dtype=np.float64).ravel()
        if v_h.size != v_v.size:
            raise ParameterError(f"v_h has {v_h.size} samples, v_v has {v_v.size}")
        if not (np.all(np.isfinite(v_h)) and np.all(np.isfinite(v_v))):
            raise ParameterError("EOG pair contains NaN or Inf")
        if self.sample_rate <= 0:
            raise ParameterError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "v_h", v_h)
        object.__setattr__(self, "v_v", v_v)

    @property
    def n_samples(self) -> int:
        return self.v_h.size

    def as_record(self) -> MultiChannelRecord:
        return MultiChannelRecord(
            sample_rate=self.sample_rate,
            channel_names=("V_H", "V_V"),
            data=np.stack([self.v_h, self.v_v]),
            config_id="EOG_PAIR",
        )


@dataclass(frozen=True)
class Epoch:
    """A labeled fixed-length window cut from a longer stream."""

    data: np.ndarray
    label: TrialLabel
    start_sample: int
    fraction: float = 1.0

    def __post_init__(self):
        data = np.atleast_2d(np.asarray(self.data, dtype=np.float64))
        if not 0 < self.fraction <= 1:
            raise ParameterError(f"fraction must be in (0, 1], got {self.fraction}")
        object.__setattr__(self, "data", data)

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


def derive_eog(record: MultiChannelRecord) -> EogPair:
    """Combine the V_R, V_L, V_C electrode channels into an EOG pair.

    All three roles must be present in the record (extra channels are
    ignored, e.g. in the combined montage).
    """
    for role in ("V_R", "V_L", "V_C"):
        if role not in record.channel_names:
            raise ParameterError(
                f"record is missing EOG role {role!r} (have {', '.join(record.channel_names)})"
            )
    v_r = record.channel("V_R")
    v_l = record.channel("V_L")
    v_c = record.channel("V_C")
    return EogPair(
        v_h=v_r - v_l,
        v_v=v_c - (v_r + v_l) / 2.0,
        sample_rate=record.sample_rate,
    )


def _build_chain(chain: str, fs: float):
    if chain == "validation":
        return dsp.design_butterworth(VALIDATION_LOWPASS_ORDER, "lowpass", VALIDATION_LOWPASS_HZ, fs)
    if chain == "classification":
        return dsp.design_butterworth(CLASSIFICATION_BAND_ORDER, "bandpass", CLASSIFICATION_BAND_HZ, fs)
    raise ParameterError(f"unknown chain {chain!r} (expected 'validation' or 'classification')")


def preprocess_eog(pair: EogPair, chain: str = "classification") -> EogPair:
    """Run the named preprocessing chain on a derived pair.

    'validation': centered mean removal, then the smoothing low-pass.
    'classification': band-pass first, then causal trailing-mean removal.
    """
    cascade = _build_chain(chain, pair.sample_rate)
    rec = pair.as_record()
    if chain == "validation":
        rec = dsp.moving_average_detrend(rec, MEAN_REMOVAL_WINDOW_S, causal=False)
        rec = dsp.apply_filter(cascade, rec, mode="batch")
    else:
        rec = dsp.apply_filter(cascade, rec, mode="batch")
        rec = dsp.moving_average_detrend(rec, MEAN_REMOVAL_WINDOW_S, causal=True)
    return EogPair(v_h=rec.data[0], v_v=rec.data[1], sample_rate=pair.sample_rate)


class StreamingEogPreprocessor:
    """Stateful chunk-by-chunk variant of the classification chain."""

    def __init__(self, fs: float):
        self.fs = fs
        self._cascade = _build_chain("classification", fs)
        w = int(round(MEAN_REMOVAL_WINDOW_S * fs))
        self._remover = dsp.CausalMeanRemover(w, 2)

    def process(self, chunk: np.ndarray) -> np.ndarray:
        """Filter a (2, n) chunk of (v_h, v_v) samples."""
        chunk = np.atleast_2d(np.asarray(chunk, dtype=np.float64))
        if chunk.shape[0] != 2:
            raise ParameterError(f"expected a 2-channel (v_h, v_v) chunk, got {chunk.shape[0]}")
        return self._remover.process(self._cascade.process(chunk))


def _as_array(source) -> tuple:
    if isinstance(source, EogPair):
        return np.stack([source.v_h, source.v_v]), source.sample_rate
    if isinstance(source, MultiChannelRecord):
        return source.data, source.sample_rate
    raise ParameterError(f"cannot segment a {type(source).__name__}")


def segment_trials(source, labels, window_s: float) -> list:
    """Cut one Epoch of round(window_s * fs) samples per (start, class) row.

    Values are copied bit-exactly; no filtering or scaling happens here.
    """
    data, fs = _as_array(source)
    if window_s <= 0:
        raise ParameterError(f"window_s must be positive, got {window_s}")
    w = int(round(window_s * fs))
    if w < 1:
        raise ParameterError(f"window of {window_s} s is under one sample at {fs} Hz")
    n = data.shape[1]
    epochs = []
    for i, (start, class_id) in enumerate(labels):
        start = int(start)
        if start < 0 or start + w > n:
            raise ParameterError(
                f"label {i} at sample {start} needs {w} samples but the record has {n}"
            )
        epochs.append(
            Epoch(
                data=data[:, start : start + w].copy(),
                label=TrialLabel(int(class_id)),
                start_sample=start,
                fraction=1.0,
            )
        )
    return epochs


def truncate_epoch(epoch: Epoch, fraction: float) -> Epoch:
    """Keep the first round(fraction * n) samples of an epoch."""
    if not 0 < fraction <= 1:
        raise ParameterError(f"fraction must be in (0, 1], got {fraction}")
    keep = int(round(fraction * epoch.n_samples))
    if keep < 1:
        raise ParameterError(f"fraction {fraction} keeps no samples")
    return Epoch(
        data=epoch.data[:, :keep].copy(),
        label=epoch.label,
        start_sample=epoch.start_sample,
        fraction=fraction,
    )
