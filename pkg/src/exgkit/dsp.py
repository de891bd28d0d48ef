"""Filtering, detrending, decimation and time-frequency primitives.

Every IIR filter is a cascade of second-order sections evaluated in
direct-form-II-transposed with float64 state, applied causally (forward
only). Batch application is streaming application over a single chunk with
fresh state, so chunked streaming reproduces batch output bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from .errors import InternalError, ParameterError
from .records import MultiChannelRecord

__all__ = [
    "BiquadCascade",
    "Spectrogram",
    "design_butterworth",
    "design_notch",
    "apply_filter",
    "moving_average_detrend",
    "CausalMeanRemover",
    "decimate",
    "spectrogram",
    "band_power",
]


@dataclass
class BiquadCascade:
    """Chain of second-order IIR sections with per-channel run state.

    sos is the (n_sections, 6) coefficient matrix [b0, b1, b2, 1, a1, a2].
    State is lazily allocated as (n_sections, n_channels, 2) on first use and
    is single-writer: one stream per instance.
    """

    sos: np.ndarray
    fs: float
    _state: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        sos = np.atleast_2d(np.asarray(self.sos, dtype=np.float64))
        if sos.shape[1] != 6:
            raise ParameterError(f"sos rows must have 6 coefficients, got {sos.shape[1]}")
        if not np.all(np.isfinite(sos)):
            raise ParameterError("sos coefficients must be finite")
        self.sos = sos

    @property
    def n_sections(self) -> int:
        return self.sos.shape[0]

    def reset(self) -> None:
        """Drop the run state; the next sample starts from rest."""
        self._state = None

    def process(self, x: np.ndarray) -> np.ndarray:
        """Filter a (channels x samples) chunk, persisting state across calls."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if self._state is None:
            self._state = np.zeros((self.n_sections, x.shape[0], 2))
        elif self._state.shape[1] != x.shape[0]:
            raise ParameterError(
                f"cascade state holds {self._state.shape[1]} channels, got {x.shape[0]}"
            )
        y, self._state = sps.sosfilt(self.sos, x, axis=1, zi=self._state)
        return y

    def freq_response(self, freqs) -> np.ndarray:
        """Complex response of the cascade at the given frequencies in Hz."""
        w = 2j * np.pi * np.asarray(freqs, dtype=np.float64) / self.fs
        zinv = np.exp(-w)
        h = np.ones_like(zinv, dtype=np.complex128)
        for b0, b1, b2, a0, a1, a2 in self.sos:
            h *= (b0 + b1 * zinv + b2 * zinv**2) / (a0 + a1 * zinv + a2 * zinv**2)
        return h

    def gain_db(self, freqs) -> np.ndarray:
        """Magnitude response in dB (−inf at exact zeros)."""
        mag = np.abs(self.freq_response(freqs))
        with np.errstate(divide="ignore"):
            return 20.0 * np.log10(mag)


def _check_stable(sos: np.ndarray) -> None:
    for row in np.atleast_2d(sos):
        poles = np.roots([row[3], row[4], row[5]])
        if poles.size and np.max(np.abs(poles)) >= 1.0:
            raise InternalError("designed section has a pole on or outside the unit circle")


def design_butterworth(order: int, kind: str, cutoffs, fs: float) -> BiquadCascade:
    """Design a Butterworth filter via the bilinear transform with pre-warping.

    kind is one of 'lowpass', 'highpass', 'bandpass'. For 'bandpass' the
    stated order is the overall filter order and must be even (the analog
    prototype has order//2 poles before the band transform doubles them).
    """
    if not isinstance(order, (int, np.integer)) or order < 1 or order > 16:
        raise ParameterError(f"order must be an integer in [1, 16], got {order}")
    if kind not in ("lowpass", "highpass", "bandpass"):
        raise ParameterError(f"unknown filter kind {kind!r}")
    if fs <= 0:
        raise ParameterError(f"fs must be positive, got {fs}")
    nyq = fs / 2.0
    cut = np.atleast_1d(np.asarray(cutoffs, dtype=np.float64))
    if np.any(cut <= 0) or np.any(cut >= nyq):
        raise ParameterError(f"cutoffs must lie strictly inside (0, {nyq}) Hz, got {cut}")
    if kind == "bandpass":
        if cut.size != 2 or cut[0] >= cut[1]:
            raise ParameterError("bandpass needs two increasing cutoffs")
        if order % 2:
            raise ParameterError("bandpass order must be even")
        sos = sps.butter(order // 2, cut, btype="bandpass", fs=fs, output="sos")
    else:
        if cut.size != 1:
            raise ParameterError(f"{kind} takes a single cutoff")
        sos = sps.butter(order, cut[0], btype=kind, fs=fs, output="sos")
    _check_stable(sos)
    return BiquadCascade(sos=sos, fs=float(fs))


def design_notch(f0: float, q: float, fs: float) -> BiquadCascade:
    """Design a single-section notch at f0.

    q is the ratio of f0 to the one-sided −3 dB offset: the response is
    3 dB down at f0 ± f0/q and back to unity at DC and Nyquist.
    """
    if fs <= 0:
        raise ParameterError(f"fs must be positive, got {fs}")
    if not (0 < f0 < fs / 2):
        raise ParameterError(f"notch frequency {f0} must lie inside (0, {fs / 2}) Hz")
    if q <= 0:
        raise ParameterError(f"q must be positive, got {q}")
    # scipy's Q sets the full −3 dB width to f0/Q; halve to match our q.
    b, a = sps.iirnotch(f0, q / 2.0, fs=fs)
    sos = np.hstack([b, a])[None, :]
    _check_stable(sos)
    return BiquadCascade(sos=sos, fs=float(fs))


def apply_filter(cascade: BiquadCascade, record: MultiChannelRecord, mode: str = "batch") -> MultiChannelRecord:
    """Run a record through a cascade.

    mode='batch' resets the cascade state first; mode='streaming' persists
    state across calls so consecutive chunks form one continuous stream.
    """
    if mode not in ("batch", "streaming"):
        raise ParameterError(f"mode must be 'batch' or 'streaming', got {mode!r}")
    if abs(cascade.fs - record.sample_rate) > 1e-9 * max(cascade.fs, record.sample_rate):
        raise ParameterError(
            f"cascade designed for fs={cascade.fs} Hz, record is {record.sample_rate} Hz"
        )
    if mode == "batch":
        cascade.reset()
    return record.with_data(cascade.process(record.data))


class CausalMeanRemover:
    """Subtract the trailing moving average, streamable chunk by chunk.

    The warm-up region uses the partial window (mean over however many
    samples have been seen), so no artificial step appears at stream start.
    """

    def __init__(self, window: int, n_channels: int):
        if window < 1:
            raise ParameterError(f"window must be >= 1 sample, got {window}")
        self.window = int(window)
        self.n_channels = int(n_channels)
        self._tail = np.zeros((n_channels, 0))
        self._seen = 0

    def process(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[0] != self.n_channels:
            raise ParameterError(f"expected {self.n_channels} channels, got {x.shape[0]}")
        n = x.shape[1]
        if n == 0:
            return x.copy()
        ext = np.concatenate([self._tail, x], axis=1)
        prefix = np.concatenate(
            [np.zeros((self.n_channels, 1)), np.cumsum(ext, axis=1)], axis=1
        )
        base = self._seen - self._tail.shape[1]  # global index of ext[:, 0]
        g = self._seen + np.arange(n)  # global indices of this chunk
        lo = np.maximum(g - self.window + 1, 0)
        sums = prefix[:, g - base + 1] - prefix[:, lo - base]
        counts = g - lo + 1
        y = x - sums / counts
        keep = min(self.window - 1, ext.shape[1])
        self._tail = ext[:, ext.shape[1] - keep:].copy()
        self._seen += n
        return y


def moving_average_detrend(record: MultiChannelRecord, window_s: float, causal: bool = True) -> MultiChannelRecord:
    """Subtract a moving-average baseline from every channel.

    causal=True uses the trailing window [n-W+1, n]; otherwise the window is
    centered on n. Edges use the partial window in both modes.
    """
    if window_s <= 0:
        raise ParameterError(f"window_s must be positive, got {window_s}")
    w = int(round(window_s * record.sample_rate))
    if w < 1:
        raise ParameterError(
            f"window of {window_s} s is under one sample at {record.sample_rate} Hz"
        )
    x = record.data
    if causal:
        remover = CausalMeanRemover(w, record.n_channels)
        return record.with_data(remover.process(x))
    n = record.n_samples
    prefix = np.concatenate([np.zeros((record.n_channels, 1)), np.cumsum(x, axis=1)], axis=1)
    idx = np.arange(n)
    start = np.clip(idx - (w - 1) // 2, 0, n)
    end = np.clip(start + w, 0, n)
    start = np.minimum(start, end)
    sums = prefix[:, end] - prefix[:, start]
    counts = np.maximum(end - start, 1)
    return record.with_data(x - sums / counts)


def decimate(record: MultiChannelRecord, factor: int) -> MultiChannelRecord:
    """Keep every factor-th sample starting at index 0.

    No implicit anti-alias filter is applied: callers are expected to have
    band-limited the signal below the new Nyquist already.
    """
    if not isinstance(factor, (int, np.integer)) or factor < 1:
        raise ParameterError(f"decimation factor must be an integer >= 1, got {factor}")
    return record.with_data(
        record.data[:, ::factor].copy(), sample_rate=record.sample_rate / factor
    )


@dataclass(frozen=True)
class Spectrogram:
    """Short-time power representation: power is (n_freqs, n_times)."""

    times: np.ndarray
    freqs: np.ndarray
    power: np.ndarray


def spectrogram(x: np.ndarray, fs: float, win: int, overlap: int, window_fn: str = "hann") -> Spectrogram:
    """Short-time power spectrogram of a single channel.

    Columns step by hop = win - overlap. Each column is |rfft(window *
    segment)|^2 with off-DC/off-Nyquist bins doubled and the whole column
    divided by the window energy sum(w^2), so the full-band column sum obeys
    Parseval: sum_k P[k] = win * sum((w*x)^2) / sum(w^2) (= segment energy
    for the rectangular window). times are window centers in seconds.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    if fs <= 0:
        raise ParameterError(f"fs must be positive, got {fs}")
    if win < 1 or win > x.size:
        raise ParameterError(f"win must be in [1, {x.size}], got {win}")
    if not (0 <= overlap < win):
        raise ParameterError(f"overlap must satisfy 0 <= overlap < win, got {overlap}")
    if window_fn == "hann":
        w = np.hanning(win)
    elif window_fn == "rect":
        w = np.ones(win)
    else:
        raise ParameterError(f"unknown window_fn {window_fn!r}")
    hop = win - overlap
    n_cols = 1 + (x.size - win) // hop
    segs = np.lib.stride_tricks.sliding_window_view(x, win)[::hop][:n_cols]
    spec = np.fft.rfft(segs * w, axis=1)
    p = np.abs(spec) ** 2
    if win % 2 == 0:
        p[:, 1:-1] *= 2.0
    else:
        p[:, 1:] *= 2.0
    p /= np.sum(w * w)
    times = (np.arange(n_cols) * hop + win / 2.0) / fs
    freqs = np.fft.rfftfreq(win, 1.0 / fs)
    return Spectrogram(times=times, freqs=freqs, power=p.T)


def band_power(spec: Spectrogram, f_lo: float, f_hi: float) -> np.ndarray:
    """Per-column sum of spectrogram power over bins with f_lo <= f <= f_hi."""
    if f_lo < 0 or f_hi <= f_lo:
        raise ParameterError(f"need 0 <= f_lo < f_hi, got [{f_lo}, {f_hi}]")
    if f_hi > spec.freqs[-1] + 1e-9:
        raise ParameterError(
            f"f_hi={f_hi} exceeds the spectrogram Nyquist {spec.freqs[-1]}"
        )
    mask = (spec.freqs >= f_lo) & (spec.freqs <= f_hi)
    if not np.any(mask):
        raise ParameterError(f"no spectrogram bins inside [{f_lo}, {f_hi}] Hz")
    return spec.power[mask].sum(axis=0)
