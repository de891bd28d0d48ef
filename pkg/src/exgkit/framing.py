"""Simulated acquisition front end: 24-bit scaling, frame codec, streaming.

Wire format (all header fields little-endian):

    offset  size  field
    0       2     magic 0x47 0x50
    2       1     version (currently 1)
    3       1     config id (0 = EEG_ONLY, 1 = COMBINED)
    4       4     seq, u32, strictly increasing per stream
    8       8     timestamp_us, u64
    16      2     n_samples, u16
    18      ...   payload: n_samples x n_channels x 3 bytes, sample-major
                  with channels in configuration order inside each sample,
                  each value a big-endian 24-bit two's-complement code

The payload length is implied by (config id, n_samples); decode rejects
frames whose buffer disagrees. This format is a desk-scale stand-in and
makes no compatibility claim with any real device link.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadMagicError,
    ParameterError,
    PayloadLengthError,
    TruncatedFrameError,
    UnknownConfigError,
    UnknownVersionError,
)
from .records import MultiChannelRecord

__all__ = [
    "ChannelConfig",
    "CONFIGS",
    "AfeConfig",
    "Frame",
    "LossReport",
    "raw_to_volts",
    "volts_to_raw",
    "encode_frame",
    "decode_frame",
    "decode_stream",
    "stream_sim",
    "reassemble",
]

MAGIC = b"\x47\x50"
VERSION = 1
HEADER = struct.Struct("<2sBBIQH")
CODE_MIN, CODE_MAX = -(2**23), 2**23 - 1


@dataclass(frozen=True)
class ChannelConfig:
    """A selectable electrode subset and its wire id."""

    config_id: str
    wire_id: int
    roles: tuple

    @property
    def n_channels(self) -> int:
        return len(self.roles)


CONFIGS = {
    "EEG_ONLY": ChannelConfig(
        "EEG_ONLY",
        0,
        ("EEG_L1", "EEG_L2", "EEG_L3", "EEG_BTE_L", "EEG_R1", "EEG_R2", "EEG_R3", "EEG_BTE_R"),
    ),
    "COMBINED": ChannelConfig(
        "COMBINED",
        1,
        ("EEG_L2", "EEG_BTE_L", "EEG_R2", "EEG_BTE_R", "V_R", "V_L", "V_C"),
    ),
}
_BY_WIRE_ID = {cfg.wire_id: cfg for cfg in CONFIGS.values()}


@dataclass(frozen=True)
class AfeConfig:
    """Front-end scaling: full span is 2*vref/gain across 2^24 codes."""

    vref: float = 2.4
    gain: int = 6
    sample_rate: float = 500.0

    def __post_init__(self):
        if self.vref <= 0:
            raise ParameterError(f"vref must be positive, got {self.vref}")
        if self.gain not in (6, 12):
            raise ParameterError(f"gain must be 6 or 12, got {self.gain}")
        if self.sample_rate not in (500.0, 1000.0, 500, 1000):
            raise ParameterError(f"sample_rate must be 500 or 1000 Hz, got {self.sample_rate}")

    @property
    def lsb_volts(self) -> float:
        return (2.0 * self.vref / self.gain) / 2**24


def raw_to_volts(code, afe: AfeConfig):
    """Convert 24-bit signed codes to volts."""
    arr = np.asarray(code)
    if np.any(arr < CODE_MIN) or np.any(arr > CODE_MAX):
        raise ParameterError(f"code outside the 24-bit range [{CODE_MIN}, {CODE_MAX}]")
    out = arr.astype(np.float64) * afe.lsb_volts
    return float(out) if np.isscalar(code) else out


def volts_to_raw(volts, afe: AfeConfig):
    """Inverse of raw_to_volts: round to nearest and saturate at the rails."""
    arr = np.asarray(volts, dtype=np.float64)
    codes = np.clip(np.rint(arr / afe.lsb_volts), CODE_MIN, CODE_MAX).astype(np.int32)
    return int(codes) if np.isscalar(volts) else codes


@dataclass(frozen=True)
class Frame:
    """One acquisition packet: samples is (n_channels, n_samples) int32."""

    config_id: str
    seq: int
    timestamp_us: int
    samples: np.ndarray
    version: int = VERSION

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]


def _pack24(codes: np.ndarray) -> bytes:
    """(n_samples, n_channels) int32 -> big-endian 24-bit stream."""
    flat = codes.astype(np.int64).ravel()
    u = (flat & 0xFFFFFF).astype(np.uint32)
    out = np.empty((flat.size, 3), dtype=np.uint8)
    out[:, 0] = (u >> 16) & 0xFF
    out[:, 1] = (u >> 8) & 0xFF
    out[:, 2] = u & 0xFF
    return out.tobytes()


def _unpack24(buf: bytes) -> np.ndarray:
    b = np.frombuffer(buf, dtype=np.uint8).reshape(-1, 3).astype(np.int64)
    v = (b[:, 0] << 16) | (b[:, 1] << 8) | b[:, 2]
    v[v >= 2**23] -= 2**24
    return v.astype(np.int32)


def encode_frame(frame: Frame) -> bytes:
    cfg = CONFIGS.get(frame.config_id)
    if cfg is None:
        raise ParameterError(f"unknown channel configuration {frame.config_id!r}")
    samples = np.asarray(frame.samples)
    if samples.ndim != 2 or samples.shape[0] != cfg.n_channels:
        raise ParameterError(
            f"samples must be ({cfg.n_channels}, n) for {frame.config_id}, got {samples.shape}"
        )
    if np.any(samples < CODE_MIN) or np.any(samples > CODE_MAX):
        raise ParameterError("sample codes outside the 24-bit range")
    if not 0 <= frame.n_samples <= 0xFFFF:
        raise ParameterError(f"n_samples must fit u16, got {frame.n_samples}")
    if not 0 <= frame.seq <= 0xFFFFFFFF:
        raise ParameterError(f"seq must fit u32, got {frame.seq}")
    if not 0 <= frame.timestamp_us <= 0xFFFFFFFFFFFFFFFF:
        raise ParameterError(f"timestamp_us must fit u64, got {frame.timestamp_us}")
    header = HEADER.pack(
        MAGIC, frame.version, cfg.wire_id, frame.seq, frame.timestamp_us, frame.n_samples
    )
    return header + _pack24(samples.T)  # sample-major, channels inside


def _decode_at(buf: bytes, offset: int):
    if len(buf) - offset < HEADER.size:
        raise TruncatedFrameError(
            f"need {HEADER.size} header bytes at offset {offset}, have {len(buf) - offset}"
        )
    magic, version, wire_id, seq, ts, n_samples = HEADER.unpack_from(buf, offset)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic.hex()} at offset {offset}")
    if version != VERSION:
        raise UnknownVersionError(f"unsupported frame version {version}")
    cfg = _BY_WIRE_ID.get(wire_id)
    if cfg is None:
        raise UnknownConfigError(f"unknown channel configuration id {wire_id}")
    payload_len = n_samples * cfg.n_channels * 3
    start = offset + HEADER.size
    if len(buf) - start < payload_len:
        raise TruncatedFrameError(
            f"payload needs {payload_len} bytes at offset {start}, have {len(buf) - start}"
        )
    codes = _unpack24(buf[start : start + payload_len]).reshape(n_samples, cfg.n_channels).T
    frame = Frame(
        config_id=cfg.config_id,
        seq=seq,
        timestamp_us=ts,
        samples=np.ascontiguousarray(codes),
        version=version,
    )
    return frame, start + payload_len


def decode_frame(buf: bytes) -> Frame:
    """Decode exactly one frame; trailing bytes are an error."""
    frame, end = _decode_at(buf, 0)
    if end != len(buf):
        raise PayloadLengthError(f"{len(buf) - end} unexpected trailing bytes")
    return frame


def decode_stream(buf: bytes) -> list:
    """Decode a concatenation of frames."""
    frames = []
    offset = 0
    while offset < len(buf):
        frame, offset = _decode_at(buf, offset)
        frames.append(frame)
    return frames


def stream_sim(
    record: MultiChannelRecord,
    afe: AfeConfig,
    frame_len: int,
    loss_rate: float = 0.0,
    jitter_ms: float = 0.0,
    seed: int = 0,
) -> list:
    """Chop a record into frames, optionally dropping some.

    Frames carry consecutive seq numbers starting at 0; losses are seeded
    Bernoulli drops. The final frame (possibly short) is always delivered
    so the receiver can account for every preceding gap.
    """
    if record.config_id not in CONFIGS:
        raise ParameterError(
            f"record config {record.config_id!r} is not a streamable configuration"
        )
    cfg = CONFIGS[record.config_id]
    if record.n_channels != cfg.n_channels:
        raise ParameterError(
            f"{record.config_id} needs {cfg.n_channels} channels, record has {record.n_channels}"
        )
    if frame_len < 1:
        raise ParameterError(f"frame_len must be >= 1, got {frame_len}")
    if not 0 <= loss_rate < 1:
        raise ParameterError(f"loss_rate must be in [0, 1), got {loss_rate}")
    if jitter_ms < 0:
        raise ParameterError(f"jitter_ms must be >= 0, got {jitter_ms}")
    rng = np.random.default_rng(seed)
    codes = volts_to_raw(record.data, afe)
    n = record.n_samples
    frames = []
    n_frames = (n + frame_len - 1) // frame_len
    for i in range(n_frames):
        lo = i * frame_len
        hi = min(lo + frame_len, n)
        ts = lo / record.sample_rate * 1e6
        if jitter_ms > 0:
            ts += rng.uniform(0.0, jitter_ms * 1e3)
        keep = True
        if loss_rate > 0:
            keep = rng.random() >= loss_rate
        if i == n_frames - 1:
            keep = True  # the closing frame always arrives
        if keep:
            frames.append(
                Frame(
                    config_id=record.config_id,
                    seq=i,
                    timestamp_us=int(round(ts)),
                    samples=codes[:, lo:hi],
                )
            )
    return frames


@dataclass(frozen=True)
class LossReport:
    received_frames: int
    lost_frames: int
    filled_samples: int
    gaps: tuple  # of (first_missing_seq, n_missing)


def reassemble(frames, afe: AfeConfig, sample_rate: float | None = None):
    """Rebuild a record from an ordered frame sequence.

    Sequence gaps are detected via seq; each missing span is filled with
    the last received sample value per channel (hold-last-value), zeros if
    nothing was received yet. Returns (record, LossReport).
    """
    frames = list(frames)
    if not frames:
        raise ParameterError("cannot reassemble an empty frame sequence")
    cfg = CONFIGS[frames[0].config_id]
    fill_len = frames[0].n_samples
    chunks = []
    gaps = []
    expected = frames[0].seq
    last_value = np.zeros((cfg.n_channels, 1), dtype=np.int32)
    lost = 0
    for frame in frames:
        if frame.config_id != cfg.config_id:
            raise ParameterError("mixed channel configurations in one stream")
        if frame.seq < expected:
            raise ParameterError(f"frame seq {frame.seq} repeats or goes backwards")
        missing = frame.seq - expected
        if missing:
            gaps.append((expected, missing))
            lost += missing
            chunks.append(np.repeat(last_value, missing * fill_len, axis=1))
        chunks.append(frame.samples)
        if frame.n_samples:
            last_value = frame.samples[:, -1:]
        expected = frame.seq + 1
    codes = np.concatenate(chunks, axis=1)
    fs = sample_rate if sample_rate is not None else afe.sample_rate
    record = MultiChannelRecord(
        sample_rate=fs,
        channel_names=cfg.roles,
        data=raw_to_volts(codes, afe),
        config_id=cfg.config_id,
    )
    return record, LossReport(
        received_frames=len(frames),
        lost_frames=lost,
        filled_samples=int(lost * fill_len),
        gaps=tuple(gaps),
    )
