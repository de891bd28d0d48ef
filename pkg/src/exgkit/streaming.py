"""Sliding-window inference over a sample stream.

The scheduler keeps a ring buffer of the most recent window and emits one
prediction per hop, each computed over exactly the trailing window ending
at the emission sample (zero buffered latency beyond the window itself).
For a stream of L samples, window W and hop h it emits
floor((L - W) / h) + 1 predictions (0 if L < W).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .epidenet import EpiDeNetParams, forward
from .errors import ParameterError
from .quantize import QuantizedModel, q_forward
from .records import MultiChannelRecord

__all__ = ["RingBuffer", "Prediction", "inference_scheduler"]


class RingBuffer:
    """Fixed-capacity per-channel sample buffer."""

    def __init__(self, n_channels: int, capacity: int):
        if capacity < 1:
            raise ParameterError(f"capacity must be >= 1, got {capacity}")
        self.data = np.zeros((n_channels, capacity))
        self.capacity = capacity
        self.head = 0  # next write position
        self.count = 0  # total samples ever written

    def extend(self, x: np.ndarray) -> None:
        x = np.atleast_2d(x)
        n = x.shape[1]
        if n >= self.capacity:
            self.data[:] = x[:, n - self.capacity:]
            self.head = 0
        else:
            first = min(n, self.capacity - self.head)
            self.data[:, self.head : self.head + first] = x[:, :first]
            if n > first:
                self.data[:, : n - first] = x[:, first:]
            self.head = (self.head + n) % self.capacity
        self.count += n

    def window(self) -> np.ndarray:
        """The last `capacity` samples in arrival order."""
        if self.count < self.capacity:
            raise ParameterError("buffer not yet full")
        return np.concatenate([self.data[:, self.head:], self.data[:, : self.head]], axis=1)


@dataclass(frozen=True)
class Prediction:
    time_s: float
    label_id: int


def _predictor(model):
    if isinstance(model, EpiDeNetParams):
        return model.channels, model.samples, lambda x: forward(model, x)
    if isinstance(model, QuantizedModel):
        return model.channels, model.samples, lambda x: q_forward(model, x)
    raise ParameterError(f"cannot schedule inference for a {type(model).__name__}")


def inference_scheduler(
    stream,
    model,
    window_s: float,
    hop_ms: float = 200.0,
    fs: float | None = None,
    batch_size: int = 128,
) -> list:
    """Run sliding-window inference over a record or an iterable of chunks.

    stream is a MultiChannelRecord or an iterable of (n_channels, k) arrays
    (fs required in that case). Windows are evaluated in batches for
    throughput; the emitted predictions are identical to one-at-a-time
    evaluation.
    """
    if isinstance(stream, MultiChannelRecord):
        fs = stream.sample_rate
        chunks = [stream.data]
        n_channels = stream.n_channels
    else:
        if fs is None or fs <= 0:
            raise ParameterError("fs must be given (and positive) for chunked streams")
        chunks = stream
        n_channels = None
    model_c, model_t, predict = _predictor(model)
    window = int(round(window_s * fs))
    hop = int(round(hop_ms * 1e-3 * fs))
    if window < 1 or hop < 1:
        raise ParameterError(f"window ({window}) and hop ({hop}) must be >= 1 sample")
    if window != model_t:
        raise ParameterError(
            f"model expects {model_t}-sample windows, scheduler would produce {window}"
        )
    buffer = None
    pending = []
    pending_times = []
    predictions = []

    def flush():
        if not pending:
            return
        logits = predict(np.stack(pending))
        ids = np.argmax(logits, axis=1)
        predictions.extend(
            Prediction(time_s=t, label_id=int(i)) for t, i in zip(pending_times, ids)
        )
        pending.clear()
        pending_times.clear()

    next_emit = window
    for chunk in chunks:
        chunk = np.atleast_2d(np.asarray(chunk, dtype=np.float64))
        if buffer is None:
            n_channels = chunk.shape[0]
            if n_channels != model_c:
                raise ParameterError(
                    f"model expects {model_c} channels, stream has {n_channels}"
                )
            buffer = RingBuffer(n_channels, window)
        if chunk.shape[0] != n_channels:
            raise ParameterError("chunk channel count changed mid-stream")
        pos = 0
        n = chunk.shape[1]
        while pos < n:
            take = min(next_emit - buffer.count, n - pos)
            buffer.extend(chunk[:, pos : pos + take])
            pos += take
            if buffer.count == next_emit:
                pending.append(buffer.window())
                pending_times.append(next_emit / fs)
                if len(pending) >= batch_size:
                    flush()
                next_emit += hop
    flush()
    return predictions
