"""Recording and label files.

Recording layout: one ASCII header line

    #EXG1 fs=<rate> config=<CONFIG_ID> channels=<name,name,...>\\n

followed by raw float64 little-endian samples, sample-major (for each time
step, all channels in header order). The round trip is lossless for finite
float64 data.

Label files are text: one `start_sample,class_id` row per line, '#'
comments allowed.
"""
from __future__ import annotations

import numpy as np

from .errors import RecordingFormatError
from .records import MultiChannelRecord

__all__ = ["write_recording", "read_recording", "write_labels", "read_labels", "KNOWN_CONFIGS"]

FORMAT_TAG = "#EXG1"
KNOWN_CONFIGS = ("EEG_ONLY", "COMBINED", "EOG3", "EOG_PAIR", "CUSTOM")


def write_recording(path, record: MultiChannelRecord) -> None:
    if record.config_id not in KNOWN_CONFIGS:
        raise RecordingFormatError(f"unknown config id {record.config_id!r}")
    header = (
        f"{FORMAT_TAG} fs={record.sample_rate!r} config={record.config_id} "
        f"channels={','.join(record.channel_names)}\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(record.data.T, dtype="<f8").tobytes())


def read_recording(path) -> MultiChannelRecord:
    with open(path, "rb") as fh:
        header = fh.readline()
        blob = fh.read()
    try:
        text = header.decode("ascii").strip()
    except UnicodeDecodeError:
        raise RecordingFormatError("header line is not ASCII") from None
    parts = text.split()
    if not parts or parts[0] != FORMAT_TAG:
        raise RecordingFormatError(
            f"bad format tag at byte 0: expected {FORMAT_TAG!r}, got {parts[0] if parts else ''!r}"
        )
    fields = {}
    for token in parts[1:]:
        if "=" not in token:
            raise RecordingFormatError(f"malformed header token {token!r}")
        key, value = token.split("=", 1)
        fields[key] = value
    for key in ("fs", "config", "channels"):
        if key not in fields:
            raise RecordingFormatError(f"header missing {key!r}")
    try:
        fs = float(fields["fs"])
    except ValueError:
        raise RecordingFormatError(f"unparseable sample rate {fields['fs']!r}") from None
    config = fields["config"]
    if config not in KNOWN_CONFIGS:
        raise RecordingFormatError(f"unknown config id {config!r}")
    names = tuple(fields["channels"].split(","))
    n_ch = len(names)
    if len(blob) % (8 * n_ch):
        raise RecordingFormatError(
            f"payload of {len(blob)} bytes at offset {len(header)} is not a whole "
            f"number of {n_ch}-channel float64 samples"
        )
    data = np.frombuffer(blob, dtype="<f8").reshape(-1, n_ch).T.copy()
    if not np.all(np.isfinite(data)):
        raise RecordingFormatError("payload contains NaN or Inf")
    return MultiChannelRecord(sample_rate=fs, channel_names=names, data=data, config_id=config)


def write_labels(path, labels) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("# start_sample,class_id\n")
        for start, class_id in labels:
            fh.write(f"{int(start)},{int(class_id)}\n")


def read_labels(path, n_samples: int | None = None, window: int | None = None) -> list:
    """Parse label rows; bounds are validated when n_samples (and optionally
    the epoch window length) are given."""
    labels = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise RecordingFormatError(f"line {lineno}: expected 'start,class_id', got {line!r}")
            try:
                start, class_id = int(parts[0]), int(parts[1])
            except ValueError:
                raise RecordingFormatError(f"line {lineno}: non-integer field in {line!r}") from None
            if start < 0:
                raise RecordingFormatError(f"line {lineno}: negative start sample {start}")
            if n_samples is not None:
                end = start + (window or 1)
                if end > n_samples:
                    raise RecordingFormatError(
                        f"line {lineno}: span [{start}, {end}) exceeds record length {n_samples}"
                    )
            labels.append((start, class_id))
    return labels
