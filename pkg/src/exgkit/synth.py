"""Labeled synthetic EOG/EEG generators.

Everything here is a pure function of (spec, seed): the same arguments give
bit-identical records. Waveform shapes are synthetic stand-ins with the
qualitative morphology of real recordings (raised-cosine saccade pulses,
blink peaks, alpha bursts, flicker-locked tones); they are not intended as
physiological simulation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dsp
from .errors import ParameterError
from .records import MultiChannelRecord

__all__ = [
    "TrialLabel",
    "SynthSpec",
    "SubjectProfile",
    "BiometricDataset",
    "CLASS_NAMES",
    "NUM_CLASSES",
    "gen_eog_trial",
    "gen_eog_session",
    "gen_alpha_eeg",
    "gen_ssvep",
    "gen_biometric_dataset",
    "default_profiles",
    "eog_templates",
]

UV = 1e-6  # microvolt in volts

CLASS_NAMES = (
    "up",
    "down",
    "right",
    "left",
    "up-right",
    "up-left",
    "down-right",
    "down-left",
    "blink",
    "double-blink",
    "rest",
)
NUM_CLASSES = len(CLASS_NAMES)

EOG_CHANNELS = ("V_R", "V_L", "V_C")
EEG8_CHANNELS = (
    "EEG_L1",
    "EEG_L2",
    "EEG_L3",
    "EEG_BTE_L",
    "EEG_R1",
    "EEG_R2",
    "EEG_R3",
    "EEG_BTE_R",
)
COMBINED_CHANNELS = ("EEG_L2", "EEG_BTE_L", "EEG_R2", "EEG_BTE_R", "V_R", "V_L", "V_C")


@dataclass(frozen=True)
class TrialLabel:
    """One of the 11 eye-movement classes, as (class_id, name) in bijection."""

    class_id: int

    def __post_init__(self):
        if not 0 <= self.class_id < NUM_CLASSES:
            raise ParameterError(f"class_id must be in [0, {NUM_CLASSES - 1}], got {self.class_id}")

    @property
    def name(self) -> str:
        return CLASS_NAMES[self.class_id]

    @classmethod
    def from_name(cls, name: str) -> "TrialLabel":
        try:
            return cls(CLASS_NAMES.index(name))
        except ValueError:
            raise ParameterError(f"unknown class name {name!r}") from None

    @classmethod
    def all(cls) -> tuple:
        return tuple(cls(i) for i in range(NUM_CLASSES))


@dataclass(frozen=True)
class SynthSpec:
    """Knobs shared by all generators. Amplitudes are in microvolts."""

    sample_rate: float = 500.0
    trial_duration: float = 2.0
    amplitude_uv: float = 100.0
    noise_sd_uv: float = 5.0
    drift_uvps: float = 0.0
    mains_amp_uv: float = 0.0
    latency_jitter_ms: float = 0.0
    walk_amp_uv: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.sample_rate <= 0:
            raise ParameterError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.trial_duration <= 0:
            raise ParameterError(f"trial_duration must be positive, got {self.trial_duration}")
        for name in ("amplitude_uv", "noise_sd_uv", "mains_amp_uv", "latency_jitter_ms", "walk_amp_uv"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0, got {getattr(self, name)}")


def _n_samples(duration_s: float, fs: float) -> int:
    return int(round(duration_s * fs))


def _raised_cosine_step(t: np.ndarray, t0: float, t1: float) -> np.ndarray:
    """Smooth 0 -> 1 transition over [t0, t1], flat outside."""
    s = np.clip((t - t0) / max(t1 - t0, 1e-12), 0.0, 1.0)
    return 0.5 - 0.5 * np.cos(np.pi * s)


def _saccade_pulse(t: np.ndarray, duration: float, shift_s: float) -> np.ndarray:
    """Unit saccade: 100 ms raised-cosine ramp, 600 ms plateau, 100 ms back.

    Segment lengths shrink proportionally for trials shorter than 1 s so the
    event always fits.
    """
    scale = min(1.0, duration / 1.0)
    ramp = 0.1 * scale
    plateau = 0.6 * scale
    event = 2 * ramp + plateau
    t0 = (duration - event) / 2.0 + shift_s
    t0 = float(np.clip(t0, 0.0, duration - event))
    up = _raised_cosine_step(t, t0, t0 + ramp)
    down = _raised_cosine_step(t, t0 + ramp + plateau, t0 + event)
    return up - down


def _blink_pulse(t: np.ndarray, duration: float, center: float, width: float) -> np.ndarray:
    lo, hi = center - width / 2.0, center + width / 2.0
    inside = (t >= lo) & (t <= hi)
    out = np.zeros_like(t)
    out[inside] = 0.5 - 0.5 * np.cos(2 * np.pi * (t[inside] - lo) / width)
    return out


def eog_templates(label: TrialLabel, spec: SynthSpec, shift_s: float = 0.0):
    """Noiseless (v_h, v_v) class templates in microvolts."""
    spec.validate()
    if spec.trial_duration < 0.5:
        raise ParameterError(
            f"trial_duration must be >= 0.5 s for EOG trials, got {spec.trial_duration}"
        )
    n = _n_samples(spec.trial_duration, spec.sample_rate)
    t = np.arange(n) / spec.sample_rate
    dur = spec.trial_duration
    a = spec.amplitude_uv
    diag = a / np.sqrt(2.0)
    vh = np.zeros(n)
    vv = np.zeros(n)
    name = label.name
    if name in ("up", "down", "right", "left", "up-right", "up-left", "down-right", "down-left"):
        pulse = _saccade_pulse(t, dur, shift_s)
        if name == "right":
            vh = a * pulse
        elif name == "left":
            vh = -a * pulse
        elif name == "up":
            vv = a * pulse
        elif name == "down":
            vv = -a * pulse
        elif name == "up-right":
            vh, vv = diag * pulse, diag * pulse
        elif name == "up-left":
            vh, vv = -diag * pulse, diag * pulse
        elif name == "down-right":
            vh, vv = diag * pulse, -diag * pulse
        elif name == "down-left":
            vh, vv = -diag * pulse, -diag * pulse
    elif name == "blink":
        scale = min(1.0, dur / 1.0)
        vv = a * _blink_pulse(t, dur, dur / 2.0 + shift_s, 0.2 * scale)
    elif name == "double-blink":
        scale = min(1.0, dur / 1.0)
        width = 0.2 * scale
        sep = 0.3 * scale
        center = dur / 2.0 + shift_s
        vv = a * (
            _blink_pulse(t, dur, center - sep / 2.0, width)
            + _blink_pulse(t, dur, center + sep / 2.0, width)
        )
    # rest: both stay zero
    return vh, vv


def _electrodes_from_templates(vh_uv: np.ndarray, vv_uv: np.ndarray):
    """Build (V_R, V_L, V_C) traces whose derivation recovers the templates.

    With V_R/V_L carrying -v_v/4 each, the center electrode must carry
    +3*v_v/4 for v_v = V_C - (V_R + V_L)/2 to return v_v exactly.
    """
    v_r = vh_uv / 2.0 - vv_uv / 4.0
    v_l = -vh_uv / 2.0 - vv_uv / 4.0
    v_c = 3.0 * vv_uv / 4.0
    return v_r, v_l, v_c


WALK_DIFFERENTIAL_FRACTION = 0.25


def _band_noise(rng: np.random.Generator, shape, fs: float) -> np.ndarray:
    """Unit-RMS noise band-limited to the 0.5-3 Hz motion band."""
    white = rng.standard_normal(shape)
    cascade = dsp.design_butterworth(4, "bandpass", (0.5, min(3.0, 0.45 * fs)), fs)
    shaped = cascade.process(np.atleast_2d(white))
    rms = np.sqrt(np.mean(shaped**2, axis=1, keepdims=True))
    rms[rms == 0] = 1.0
    return shaped / rms


def _walk_noise(rng: np.random.Generator, shape, fs: float, rms_uv: float) -> np.ndarray:
    """Walking disturbance: a shared motion field plus a smaller independent
    per-electrode part (cables and contacts move together, so most of the
    artifact is common mode and cancels in differential derivations)."""
    n_ch = shape[0]
    common = _band_noise(rng, (1, shape[1]), fs)
    independent = _band_noise(rng, shape, fs)
    return rms_uv * (np.repeat(common, n_ch, axis=0) + WALK_DIFFERENTIAL_FRACTION * independent)


def _tilted_noise(
    rng: np.random.Generator, shape, fs: float, sd_uv: float, tilt_db_per_octave: float = -3.0
) -> np.ndarray:
    """Gaussian noise with a power-law spectral tilt, RMS sd_uv per channel.

    tilt is in dB of power per octave; -3 dB/octave gives the classic 1/f
    power profile.
    """
    n_ch, n = shape
    if sd_uv == 0:
        return np.zeros(shape)
    white = rng.standard_normal(shape)
    spec = np.fft.rfft(white, axis=1)
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    alpha = tilt_db_per_octave / (10.0 * np.log10(2.0))  # power exponent
    ref = max(freqs[1], 1e-6) if n > 1 else 1.0
    gain = np.ones_like(freqs)
    nz = freqs > 0
    gain[nz] = (freqs[nz] / ref) ** (alpha / 2.0)
    gain[0] = 0.0
    shaped = np.fft.irfft(spec * gain, n=n, axis=1)
    rms = np.sqrt(np.mean(shaped**2, axis=1, keepdims=True))
    rms[rms == 0] = 1.0
    return shaped / rms * sd_uv


def _common_disturbances(rng, t, spec: SynthSpec, n_channels: int) -> np.ndarray:
    """Drift + mains contamination, per channel, in microvolts."""
    out = np.zeros((n_channels, t.size))
    if spec.drift_uvps != 0:
        out += spec.drift_uvps * t
    if spec.mains_amp_uv > 0:
        # slight per-electrode gain imbalance so the contaminant does not
        # cancel as pure common mode downstream
        gains = 1.0 + 0.1 * rng.uniform(-1.0, 1.0, size=(n_channels, 1))
        out += spec.mains_amp_uv * gains * np.sin(2 * np.pi * 50.0 * t)
    return out


def gen_eog_trial(label: TrialLabel, spec: SynthSpec):
    """One labeled 3-electrode EOG trial.

    Returns (record, label) where the record holds the V_R, V_L, V_C traces
    in volts; deriving the horizontal/vertical pair from them recovers the
    class template exactly when all noise knobs are zero.
    """
    spec.validate()
    if spec.trial_duration < 0.5:
        raise ParameterError(
            f"trial_duration must be >= 0.5 s for EOG trials, got {spec.trial_duration}"
        )
    rng = np.random.default_rng(spec.seed)
    shift = 0.0
    if spec.latency_jitter_ms > 0:
        shift = rng.uniform(-spec.latency_jitter_ms, spec.latency_jitter_ms) * 1e-3
    vh, vv = eog_templates(label, spec, shift_s=shift)
    n = vh.size
    t = np.arange(n) / spec.sample_rate
    electrodes = np.stack(_electrodes_from_templates(vh, vv))
    electrodes += _common_disturbances(rng, t, spec, 3)
    if spec.noise_sd_uv > 0:
        electrodes += rng.normal(0.0, spec.noise_sd_uv, size=electrodes.shape)
    if spec.walk_amp_uv > 0:
        electrodes += _walk_noise(rng, electrodes.shape, spec.sample_rate, spec.walk_amp_uv)
    record = MultiChannelRecord(
        sample_rate=spec.sample_rate,
        channel_names=EOG_CHANNELS,
        data=electrodes * UV,
        config_id="EOG3",
    )
    return record, label


def gen_eog_session(
    spec: SynthSpec,
    trials_per_class: int,
    combined: bool = False,
    shuffle: bool = True,
):
    """A continuous recording of back-to-back labeled trials.

    Returns (record, labels) with labels as a list of (start_sample,
    class_id) rows. With combined=True the record carries the 7-channel
    combined montage (4 EEG background channels + the 3 EOG electrodes).
    """
    spec.validate()
    if trials_per_class < 1:
        raise ParameterError(f"trials_per_class must be >= 1, got {trials_per_class}")
    if spec.trial_duration < 0.5:
        raise ParameterError(
            f"trial_duration must be >= 0.5 s for EOG trials, got {spec.trial_duration}"
        )
    rng = np.random.default_rng(spec.seed)
    order = np.repeat(np.arange(NUM_CLASSES), trials_per_class)
    if shuffle:
        order = rng.permutation(order)
    n_trial = _n_samples(spec.trial_duration, spec.sample_rate)
    n_total = n_trial * order.size
    t = np.arange(n_total) / spec.sample_rate

    vh = np.zeros(n_total)
    vv = np.zeros(n_total)
    labels = []
    for i, class_id in enumerate(order):
        shift = 0.0
        if spec.latency_jitter_ms > 0:
            shift = rng.uniform(-spec.latency_jitter_ms, spec.latency_jitter_ms) * 1e-3
        th, tv = eog_templates(TrialLabel(int(class_id)), spec, shift_s=shift)
        sl = slice(i * n_trial, (i + 1) * n_trial)
        vh[sl] = th
        vv[sl] = tv
        labels.append((i * n_trial, int(class_id)))

    eog = np.stack(_electrodes_from_templates(vh, vv))
    n_ch = 7 if combined else 3
    disturb = _common_disturbances(rng, t, spec, n_ch)
    if combined:
        eeg = _tilted_noise(rng, (4, n_total), spec.sample_rate, max(spec.noise_sd_uv, 1.0))
        data = np.concatenate([eeg, eog], axis=0) + disturb
        names, config = COMBINED_CHANNELS, "COMBINED"
    else:
        data = eog + disturb
        names, config = EOG_CHANNELS, "EOG3"
    if spec.noise_sd_uv > 0:
        data += rng.normal(0.0, spec.noise_sd_uv, size=data.shape)
    if spec.walk_amp_uv > 0:
        data += _walk_noise(rng, data.shape, spec.sample_rate, spec.walk_amp_uv)
    record = MultiChannelRecord(
        sample_rate=spec.sample_rate, channel_names=names, data=data * UV, config_id=config
    )
    return record, labels


def gen_alpha_eeg(spec: SynthSpec, schedule, alpha_hz: float = 10.0) -> MultiChannelRecord:
    """8-channel recording alternating eyes-open / eyes-closed states.

    schedule is a list of (state, duration_s) with state in {'eyes_open',
    'eyes_closed'}. Closed segments carry a sinusoid at alpha_hz of
    amplitude_uv on top of the tilted noise floor; open segments are noise
    only.
    """
    spec.validate()
    schedule = list(schedule)
    if not schedule:
        raise ParameterError("schedule must not be empty")
    for state, dur in schedule:
        if state not in ("eyes_open", "eyes_closed"):
            raise ParameterError(f"unknown schedule state {state!r}")
        if dur <= 0:
            raise ParameterError(f"schedule durations must be positive, got {dur}")
    if not (0 < alpha_hz < spec.sample_rate / 2):
        raise ParameterError(f"alpha_hz must be below Nyquist, got {alpha_hz}")
    rng = np.random.default_rng(spec.seed)
    n_total = sum(_n_samples(d, spec.sample_rate) for _, d in schedule)
    t = np.arange(n_total) / spec.sample_rate
    closed = np.zeros(n_total, dtype=bool)
    pos = 0
    for state, dur in schedule:
        n = _n_samples(dur, spec.sample_rate)
        if state == "eyes_closed":
            closed[pos : pos + n] = True
        pos += n
    phases = rng.uniform(0, 2 * np.pi, size=(8, 1))
    data = spec.amplitude_uv * np.sin(2 * np.pi * alpha_hz * t + phases) * closed
    data += _common_disturbances(rng, t, spec, 8)
    if spec.noise_sd_uv > 0:
        data += _tilted_noise(rng, (8, n_total), spec.sample_rate, spec.noise_sd_uv)
    return MultiChannelRecord(
        sample_rate=spec.sample_rate,
        channel_names=EEG8_CHANNELS,
        data=data * UV,
        config_id="EEG_ONLY",
    )


def gen_ssvep(spec: SynthSpec, f_target: float, n_harmonics: int = 2, snr: float = np.inf) -> MultiChannelRecord:
    """8-channel flicker-locked recording of length trial_duration.

    Each channel is sum_k a_k sin(2 pi k f t + phi_c) with a random phase
    per channel and harmonic amplitudes halving per order. snr is the
    per-channel ratio of signal RMS to noise RMS: inf gives a noiseless
    record, 0 gives noise only (at noise_sd_uv).
    """
    spec.validate()
    if n_harmonics < 1:
        raise ParameterError(f"n_harmonics must be >= 1, got {n_harmonics}")
    if snr < 0:
        raise ParameterError(f"snr must be >= 0, got {snr}")
    nyq = spec.sample_rate / 2.0
    if not (0 < f_target < nyq):
        raise ParameterError(f"f_target must be inside (0, {nyq}) Hz, got {f_target}")
    if n_harmonics * f_target >= nyq:
        raise ParameterError(
            f"harmonic {n_harmonics}x{f_target} Hz reaches Nyquist ({nyq} Hz)"
        )
    rng = np.random.default_rng(spec.seed)
    n = _n_samples(spec.trial_duration, spec.sample_rate)
    t = np.arange(n) / spec.sample_rate
    amps = spec.amplitude_uv / (2.0 ** np.arange(n_harmonics))
    phases = rng.uniform(0, 2 * np.pi, size=8)
    data = np.zeros((8, n))
    if snr > 0:
        for k, a in enumerate(amps, start=1):
            data += a * np.sin(2 * np.pi * k * f_target * t + phases[:, None])
    if np.isinf(snr):
        noise_sd = 0.0
    elif snr == 0:
        noise_sd = spec.noise_sd_uv
    else:
        signal_rms = np.sqrt(np.sum(amps**2) / 2.0)
        noise_sd = signal_rms / snr
    if noise_sd > 0:
        data += _tilted_noise(rng, (8, n), spec.sample_rate, noise_sd)
    return MultiChannelRecord(
        sample_rate=spec.sample_rate,
        channel_names=EEG8_CHANNELS,
        data=data * UV,
        config_id="EEG_ONLY",
    )


@dataclass(frozen=True)
class SubjectProfile:
    """Per-subject spectral signature used by the biometric generator."""

    subject_id: int
    channel_gains: tuple = tuple([1.0] * 8)
    tilt_db_per_octave: float = -3.0
    alpha_center_hz: float = 10.0

    def __post_init__(self):
        gains = tuple(float(g) for g in self.channel_gains)
        if len(gains) != 8:
            raise ParameterError(f"channel_gains must have 8 entries, got {len(gains)}")
        if any(g <= 0 for g in gains):
            raise ParameterError("channel gains must be positive")
        if not (8.0 <= self.alpha_center_hz <= 12.0):
            raise ParameterError(
                f"alpha_center_hz must be in [8, 12], got {self.alpha_center_hz}"
            )
        object.__setattr__(self, "channel_gains", gains)


def default_profiles(n_subjects: int = 6) -> tuple:
    """Deterministic, well-separated profiles for n_subjects."""
    if n_subjects < 1:
        raise ParameterError("need at least one profile")
    profiles = []
    for s in range(n_subjects):
        frac = s / max(n_subjects - 1, 1)
        gains = tuple(0.8 + 0.4 * (((s * 3 + c) % 7) / 6.0) for c in range(8))
        profiles.append(
            SubjectProfile(
                subject_id=s,
                channel_gains=gains,
                tilt_db_per_octave=-4.0 + 4.0 * frac,
                alpha_center_hz=8.5 + 3.5 * frac,
            )
        )
    return tuple(profiles)


@dataclass(frozen=True)
class BiometricDataset:
    """Fixed-length labeled EEG segments: segments is (n, 8, samples)."""

    segments: np.ndarray
    subject: np.ndarray
    session: np.ndarray
    sample_rate: float
    segment_s: float = 4.0

    def __len__(self) -> int:
        return self.segments.shape[0]


def gen_biometric_dataset(
    profiles,
    spec: SynthSpec,
    session_count: int,
    session_duration_s: float,
) -> BiometricDataset:
    """Labeled 4 s EEG segments for a set of subject profiles.

    Subjects are labeled by their position in `profiles` (0..N-1); the
    session index is recorded per segment. Segments are stored as float32
    volts to keep large datasets affordable.
    """
    spec.validate()
    profiles = tuple(profiles)
    if len(profiles) < 2:
        raise ParameterError(f"need at least 2 profiles, got {len(profiles)}")
    if session_count < 1:
        raise ParameterError(f"session_count must be >= 1, got {session_count}")
    if session_duration_s < 4.0:
        raise ParameterError(
            f"session_duration_s must allow at least one 4 s segment, got {session_duration_s}"
        )
    seg_n = _n_samples(4.0, spec.sample_rate)
    per_session = int(session_duration_s // 4.0)
    n_session = _n_samples(session_duration_s, spec.sample_rate)
    segments = []
    subject_ids = []
    session_ids = []
    for s_idx, prof in enumerate(profiles):
        gains = np.asarray(prof.channel_gains)[:, None]
        for k in range(session_count):
            rng = np.random.default_rng([spec.seed, s_idx, k])
            t = np.arange(n_session) / spec.sample_rate
            phases = rng.uniform(0, 2 * np.pi, size=(8, 1))
            alpha = spec.amplitude_uv * np.sin(2 * np.pi * prof.alpha_center_hz * t + phases)
            noise = _tilted_noise(
                rng, (8, n_session), spec.sample_rate, spec.noise_sd_uv, prof.tilt_db_per_octave
            )
            data = gains * (alpha + noise) * UV
            for j in range(per_session):
                segments.append(data[:, j * seg_n : (j + 1) * seg_n].astype(np.float32))
                subject_ids.append(s_idx)
                session_ids.append(k)
    return BiometricDataset(
        segments=np.stack(segments),
        subject=np.asarray(subject_ids, dtype=np.int64),
        session=np.asarray(session_ids, dtype=np.int64),
        sample_rate=spec.sample_rate,
    )
