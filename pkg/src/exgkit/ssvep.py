"""Canonical correlation against sinusoidal banks and its side-band ratio.

The detector statistic is the largest canonical correlation between the
multichannel window and a bank of sin/cos references at the target
frequency, normalized by the average of the same statistic at two side
frequencies +-delta. Scores hover near 1 on background activity and rise
well above it when a flicker-locked component is present; values above 1.1
are treated as detections.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .errors import DegenerateInputError, ParameterError
from .records import MultiChannelRecord

__all__ = [
    "ReferenceBank",
    "NccaScore",
    "FrequencyDetection",
    "make_reference_bank",
    "cca_max_corr",
    "ncca",
    "detect_ssvep",
    "DEFAULT_THRESHOLD",
    "DEFAULT_SIDE_DELTA_HZ",
]

DEFAULT_THRESHOLD = 1.1
DEFAULT_SIDE_DELTA_HZ = 0.2
DEFAULT_HARMONICS = 2


@dataclass(frozen=True)
class ReferenceBank:
    """Sin/cos reference rows at k*f for k = 1..n_harmonics."""

    f: float
    n_harmonics: int
    signals: np.ndarray  # (2*n_harmonics, n_samples)


def make_reference_bank(f: float, fs: float, n_samples: int, n_harmonics: int = DEFAULT_HARMONICS) -> ReferenceBank:
    if f <= 0:
        raise ParameterError(f"reference frequency must be positive, got {f}")
    if n_harmonics < 1:
        raise ParameterError(f"n_harmonics must be >= 1, got {n_harmonics}")
    if n_harmonics * f >= fs / 2:
        raise ParameterError(
            f"harmonic {n_harmonics}x{f} Hz reaches Nyquist ({fs / 2} Hz)"
        )
    if n_samples < 2:
        raise ParameterError(f"need at least 2 samples, got {n_samples}")
    t = np.arange(n_samples) / fs
    rows = []
    for k in range(1, n_harmonics + 1):
        rows.append(np.sin(2 * np.pi * k * f * t))
        rows.append(np.cos(2 * np.pi * k * f * t))
    return ReferenceBank(f=float(f), n_harmonics=int(n_harmonics), signals=np.stack(rows))


def cca_max_corr(x: np.ndarray, y: np.ndarray, ridge_factor: float = 1e-10) -> float:
    """Largest canonical correlation between the row spaces of x and y.

    Rows are zero-meaned internally. Auto-covariances get a ridge of
    ridge_factor * trace/dim before Cholesky whitening; the statistic is the
    largest singular value of the whitened cross-covariance, clipped to
    [0, 1].
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if x.shape[1] != y.shape[1]:
        raise ParameterError(f"sample counts differ: {x.shape[1]} vs {y.shape[1]}")
    n = x.shape[1]
    cx, cy = x.shape[0], y.shape[0]
    if n <= cx + cy:
        raise ParameterError(
            f"need more samples than rows ({n} samples for {cx}+{cy} rows)"
        )
    xc = x - x.mean(axis=1, keepdims=True)
    yc = y - y.mean(axis=1, keepdims=True)
    cxx = xc @ xc.T / n
    cyy = yc @ yc.T / n
    tx, ty = np.trace(cxx), np.trace(cyy)
    if tx <= 0 or ty <= 0:
        raise DegenerateInputError("an input is constant across samples; correlation undefined")
    cxx += np.eye(cx) * (ridge_factor * tx / cx)
    cyy += np.eye(cy) * (ridge_factor * ty / cy)
    cxy = xc @ yc.T / n
    try:
        lx = np.linalg.cholesky(cxx)
        ly = np.linalg.cholesky(cyy)
    except np.linalg.LinAlgError:
        raise DegenerateInputError("covariance not positive definite after ridge") from None
    w = sla.solve_triangular(lx, cxy, lower=True)
    w = sla.solve_triangular(ly, w.T, lower=True).T
    rho = float(np.linalg.svd(w, compute_uv=False)[0])
    return min(max(rho, 0.0), 1.0)


@dataclass(frozen=True)
class NccaScore:
    """Target canonical correlation and its side-band-normalized ratio."""

    f_target: float
    rho_target: float
    rho_side_lo: float
    rho_side_hi: float

    @property
    def score(self) -> float:
        return self.rho_target / ((self.rho_side_lo + self.rho_side_hi) / 2.0)


def ncca(
    x: np.ndarray,
    f_target: float,
    fs: float,
    n_harmonics: int = DEFAULT_HARMONICS,
    delta: float = DEFAULT_SIDE_DELTA_HZ,
) -> NccaScore:
    """Side-band-normalized canonical correlation at f_target.

    Banks at f_target and f_target +- delta are evaluated over the same
    sample window; the score is rho_target over the mean of the two side
    correlations.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if delta <= 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    if f_target - delta <= 0:
        raise ParameterError(f"f_target - delta must stay positive, got {f_target - delta}")
    n = x.shape[1]
    rhos = []
    for f in (f_target, f_target - delta, f_target + delta):
        bank = make_reference_bank(f, fs, n, n_harmonics)
        rhos.append(cca_max_corr(x, bank.signals))
    return NccaScore(
        f_target=float(f_target),
        rho_target=rhos[0],
        rho_side_lo=rhos[1],
        rho_side_hi=rhos[2],
    )


@dataclass(frozen=True)
class FrequencyDetection:
    f: float
    score: NccaScore
    detected: bool


def detect_ssvep(
    record: MultiChannelRecord,
    freqs,
    window_s: float,
    threshold: float = DEFAULT_THRESHOLD,
    n_harmonics: int = DEFAULT_HARMONICS,
    delta: float = DEFAULT_SIDE_DELTA_HZ,
) -> list:
    """Score each candidate frequency on the trailing window of a record."""
    if window_s <= 0:
        raise ParameterError(f"window_s must be positive, got {window_s}")
    w = int(round(window_s * record.sample_rate))
    if w > record.n_samples:
        raise ParameterError(
            f"window of {w} samples exceeds record length {record.n_samples}"
        )
    window = record.data[:, record.n_samples - w:]
    out = []
    for f in freqs:
        score = ncca(window, f, record.sample_rate, n_harmonics=n_harmonics, delta=delta)
        out.append(FrequencyDetection(f=float(f), score=score, detected=score.score > threshold))
    return out
