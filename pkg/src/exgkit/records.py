"""The core multichannel record container shared by every pipeline stage."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class MultiChannelRecord:
    """Uniformly sampled multichannel voltage time series.

    data is (n_channels, n_samples) in volts, float64. config_id names the
    channel configuration the data belongs to (e.g. "EEG_ONLY", "COMBINED",
    "EOG3", "EOG_PAIR", "CUSTOM").
    """

    sample_rate: float
    channel_names: tuple
    data: np.ndarray = field(repr=False)
    config_id: str = "CUSTOM"

    def __post_init__(self):
        if not np.isfinite(self.sample_rate) or self.sample_rate <= 0:
            raise ParameterError(f"sample_rate must be positive, got {self.sample_rate}")
        data = np.atleast_2d(np.asarray(self.data, dtype=np.float64))
        if data.ndim != 2:
            raise ParameterError(f"data must be 2-D (channels x samples), got ndim={data.ndim}")
        names = tuple(str(n) for n in self.channel_names)
        if len(names) != data.shape[0]:
            raise ParameterError(
                f"{len(names)} channel names for {data.shape[0]} data rows"
            )
        if len(set(names)) != len(names):
            raise ParameterError("channel names must be unique")
        if not np.all(np.isfinite(data)):
            raise ParameterError("record data contains NaN or Inf")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "channel_names", names)

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate

    def channel(self, name: str) -> np.ndarray:
        """Return the data row for a named channel."""
        try:
            idx = self.channel_names.index(name)
        except ValueError:
            raise ParameterError(
                f"channel {name!r} not present (have {', '.join(self.channel_names)})"
            ) from None
        return self.data[idx]

    def with_data(self, data: np.ndarray, sample_rate: float | None = None) -> "MultiChannelRecord":
        """Copy of this record with new sample data (and optionally a new rate)."""
        return MultiChannelRecord(
            sample_rate=self.sample_rate if sample_rate is None else sample_rate,
            channel_names=self.channel_names,
            data=data,
            config_id=self.config_id,
        )
