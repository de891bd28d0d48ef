import numpy as np
import pytest

from exgkit import dsp, eog, synth
from exgkit.errors import ParameterError

UV = 1e-6


def noiseless(**kw):
    defaults = dict(noise_sd_uv=0.0, drift_uvps=0.0, mains_amp_uv=0.0, seed=7)
    defaults.update(kw)
    return synth.SynthSpec(**defaults)


class TestTrialLabel:
    def test_bijection(self):
        for label in synth.TrialLabel.all():
            assert synth.TrialLabel.from_name(label.name) == label
        assert len(synth.TrialLabel.all()) == 11

    def test_bad_ids(self):
        with pytest.raises(ParameterError):
            synth.TrialLabel(11)
        with pytest.raises(ParameterError):
            synth.TrialLabel.from_name("sideways")


class TestGenEogTrial:
    def test_rest_noiseless_constant(self):
        rec, _ = synth.gen_eog_trial(synth.TrialLabel.from_name("rest"), noiseless())
        assert np.all(rec.data == rec.data[:, :1])

    def test_right_amplitudes(self):
        spec = noiseless()
        rec, _ = synth.gen_eog_trial(synth.TrialLabel.from_name("right"), spec)
        pair = eog.derive_eog(rec)
        amp = spec.amplitude_uv * UV
        assert np.max(np.abs(pair.v_h)) == pytest.approx(amp, rel=1e-12)
        assert np.max(np.abs(pair.v_v)) <= 0.05 * amp

    def test_double_blink_two_peaks(self):
        spec = noiseless()
        rec, _ = synth.gen_eog_trial(synth.TrialLabel.from_name("double-blink"), spec)
        v_v = eog.derive_eog(rec).v_v / UV
        half = spec.amplitude_uv / 2
        above = v_v > half
        # count rising crossings of the half-amplitude level
        n_peaks = int(np.sum(~above[:-1] & above[1:]))
        assert n_peaks == 2

    def test_determinism(self):
        spec = synth.SynthSpec(noise_sd_uv=4.0, walk_amp_uv=10.0, mains_amp_uv=3.0, seed=11)
        a, _ = synth.gen_eog_trial(synth.TrialLabel(2), spec)
        b, _ = synth.gen_eog_trial(synth.TrialLabel(2), spec)
        np.testing.assert_array_equal(a.data, b.data)

    def test_all_class_signatures(self):
        """Noiseless templates keep the class signature table under derivation."""
        spec = noiseless()
        amp = spec.amplitude_uv * UV
        diag = amp / np.sqrt(2)
        for label in synth.TrialLabel.all():
            rec, _ = synth.gen_eog_trial(label, spec)
            pair = eog.derive_eog(rec)
            h, v = pair.v_h, pair.v_v
            name = label.name
            if name == "rest":
                assert np.max(np.abs(h)) == 0 and np.max(np.abs(v)) == 0
            elif name in ("right", "left"):
                assert np.max(np.abs(h)) == pytest.approx(amp, rel=1e-12)
                assert np.max(np.abs(v)) <= 0.05 * amp
                assert (h.min() < -amp / 2) == (name == "left")
            elif name in ("up", "down"):
                assert np.max(np.abs(v)) == pytest.approx(amp, rel=1e-12)
                assert np.max(np.abs(h)) <= 0.05 * amp
                assert (v.min() < -amp / 2) == (name == "down")
            elif name == "blink":
                assert v.max() > 0.9 * amp and np.max(np.abs(h)) == 0
            elif name == "double-blink":
                assert v.max() > 0.9 * amp and np.max(np.abs(h)) == 0
            else:  # diagonals
                assert np.max(np.abs(h)) == pytest.approx(diag, rel=1e-12)
                assert np.max(np.abs(v)) == pytest.approx(diag, rel=1e-12)

    def test_sample_count(self):
        for dur in (0.5, 1.0, 2.0, 2.3):
            rec, _ = synth.gen_eog_trial(synth.TrialLabel(0), noiseless(trial_duration=dur))
            assert rec.n_samples == round(dur * 500.0)

    def test_invalid_spec(self):
        with pytest.raises(ParameterError):
            synth.gen_eog_trial(synth.TrialLabel(0), synth.SynthSpec(noise_sd_uv=-1.0))
        with pytest.raises(ParameterError):
            synth.gen_eog_trial(synth.TrialLabel(0), synth.SynthSpec(trial_duration=0.3))


class TestGenEogSession:
    def test_labels_and_length(self):
        spec = synth.SynthSpec(seed=5)
        rec, labels = synth.gen_eog_session(spec, trials_per_class=3)
        assert len(labels) == 33
        assert rec.n_samples == 33 * 1000
        ids = sorted(class_id for _, class_id in labels)
        assert ids == sorted(list(range(11)) * 3)

    def test_combined_montage(self):
        rec, _ = synth.gen_eog_session(synth.SynthSpec(seed=5), 1, combined=True)
        assert rec.n_channels == 7
        assert rec.config_id == "COMBINED"
        for role in ("V_R", "V_L", "V_C"):
            assert role in rec.channel_names


class TestGenAlphaEeg:
    def test_noiseless_schedule(self):
        spec = noiseless(amplitude_uv=30.0)
        rec = synth.gen_alpha_eeg(spec, [("eyes_open", 30.0), ("eyes_closed", 30.0)], alpha_hz=10.0)
        assert rec.n_channels == 8
        half = rec.n_samples // 2
        assert np.all(rec.data[:, :half] == 0.0)
        # second half: pure sinusoid at 10 Hz -> matches an analytic fit
        t = np.arange(rec.n_samples)[half:] / spec.sample_rate
        ch = rec.data[0, half:] / UV
        c = 2 * np.mean(ch * np.cos(2 * np.pi * 10.0 * t))
        s = 2 * np.mean(ch * np.sin(2 * np.pi * 10.0 * t))
        assert np.hypot(c, s) == pytest.approx(30.0, rel=1e-3)
        resid = ch - (s * np.sin(2 * np.pi * 10 * t) + c * np.cos(2 * np.pi * 10 * t))
        assert np.max(np.abs(resid)) < 1e-6 * 30.0

    def test_band_power_ratio_at_snr2(self):
        spec = synth.SynthSpec(amplitude_uv=20.0, noise_sd_uv=10.0, seed=21)
        rec = synth.gen_alpha_eeg(spec, [("eyes_open", 30.0), ("eyes_closed", 30.0)])
        spg = dsp.spectrogram(rec.data[3], spec.sample_rate, 1024, 768)
        band = dsp.band_power(spg, 8.0, 12.0)
        half_t = rec.duration_s / 2
        open_cols = spg.times < half_t - 1.1  # keep columns fully inside a state
        closed_cols = spg.times > half_t + 1.1
        ratio = band[closed_cols].mean() / band[open_cols].mean()
        assert ratio >= 5.0

    def test_empty_schedule_rejected(self):
        with pytest.raises(ParameterError):
            synth.gen_alpha_eeg(synth.SynthSpec(), [])


class TestGenSsvep:
    def test_noiseless_single_tone_fft_peak(self):
        spec = noiseless(trial_duration=2.0)
        rec = synth.gen_ssvep(spec, 13.5, n_harmonics=1, snr=np.inf)
        mags = np.abs(np.fft.rfft(rec.data[0]))
        freqs = np.fft.rfftfreq(rec.n_samples, 1 / spec.sample_rate)
        assert freqs[np.argmax(mags)] == pytest.approx(13.5)

    def test_harmonic_energy_concentration(self):
        # 2 s at 7.5 Hz = 15 whole cycles: harmonics sit exactly on bins
        spec = noiseless(trial_duration=2.0)
        rec = synth.gen_ssvep(spec, 7.5, n_harmonics=3, snr=np.inf)
        freqs = np.fft.rfftfreq(rec.n_samples, 1 / spec.sample_rate)
        for ch in rec.data:
            p = np.abs(np.fft.rfft(ch)) ** 2
            on_bins = 0.0
            for k in (1, 2, 3):
                on_bins += p[np.argmin(np.abs(freqs - k * 7.5))]
            assert on_bins / p.sum() >= 0.99

    def test_snr_definition(self):
        spec = synth.SynthSpec(trial_duration=10.0, amplitude_uv=50.0, seed=9)
        rec = synth.gen_ssvep(spec, 11.5, n_harmonics=2, snr=1.0)
        tone = synth.gen_ssvep(noiseless(trial_duration=10.0, amplitude_uv=50.0, seed=9), 11.5, 2, np.inf)
        noise = rec.data - tone.data
        snr = np.sqrt(np.mean(tone.data ** 2) / np.mean(noise ** 2))
        assert snr == pytest.approx(1.0, rel=0.05)

    def test_harmonic_above_nyquist_rejected(self):
        with pytest.raises(ParameterError):
            synth.gen_ssvep(synth.SynthSpec(), 13.5, n_harmonics=20, snr=np.inf)


class TestGenBiometricDataset:
    def test_counts_and_labels(self):
        profiles = synth.default_profiles(6)
        spec = synth.SynthSpec(noise_sd_uv=8.0, seed=2)
        ds = synth.gen_biometric_dataset(profiles, spec, session_count=3, session_duration_s=600.0)
        assert len(ds) == 6 * 3 * 150
        assert ds.segments.shape == (2700, 8, 2000)
        counts = np.bincount(ds.subject)
        assert np.all(counts == 450)
        assert set(np.unique(ds.session)) == {0, 1, 2}

    def test_single_segment_sessions(self):
        ds = synth.gen_biometric_dataset(
            synth.default_profiles(2), synth.SynthSpec(seed=2), 1, 4.0
        )
        assert len(ds) == 2

    def test_too_few_profiles(self):
        with pytest.raises(ParameterError):
            synth.gen_biometric_dataset(synth.default_profiles(1), synth.SynthSpec(), 1, 60.0)

    def test_identical_profiles_symmetric(self):
        # identical generation parameters: per-class statistics match, so
        # labels carry no exploitable signal beyond the RNG stream
        p = synth.SubjectProfile(subject_id=0)
        ds = synth.gen_biometric_dataset([p, p], synth.SynthSpec(noise_sd_uv=8.0, seed=4), 1, 40.0)
        a = ds.segments[ds.subject == 0]
        b = ds.segments[ds.subject == 1]
        va, vb = a.var(), b.var()
        assert abs(va - vb) / max(va, vb) < 0.1
