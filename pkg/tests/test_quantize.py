import numpy as np
import pytest

from exgkit import epidenet, quantize
from exgkit.errors import ParameterError
from tests.conftest import make_eog_epoch_set


def small_model(seed=0):
    return epidenet.build_epidenet(2, 128, 1, 4, seed=seed)


def calibration_inputs(n=16, seed=0):
    return np.random.default_rng(seed).normal(size=(n, 2, 128)).astype(np.float32)


class TestQuantize:
    def test_ternary_weights_exact(self):
        p = small_model()
        rng = np.random.default_rng(1)
        for k, v in p.tensors.items():
            if k.endswith("_w"):
                v[:] = rng.choice([-1.0, 0.0, 1.0], size=v.shape)
        qm = quantize.quantize(p, calibration_inputs())
        for i, qw in enumerate(qm.conv_w, start=1):
            assert qw.scale == pytest.approx(1.0 / 127)
            w = p.tensors[f"conv{i}_w"]
            deq = quantize.dequantize_tensor(qw)
            extremes = np.abs(w) == 1.0
            np.testing.assert_allclose(deq[extremes], w[extremes], atol=0)
            assert np.all(deq[w == 0.0] == 0.0)

    def test_round_trip_error_bound(self):
        p = small_model(seed=2)
        qm = quantize.quantize(p, calibration_inputs())
        for i, qw in enumerate(qm.conv_w, start=1):
            err = np.abs(quantize.dequantize_tensor(qw) - p.tensors[f"conv{i}_w"])
            assert np.all(err <= qw.scale / 2 + 1e-12)
        err = np.abs(quantize.dequantize_tensor(qm.dense_w) - p.tensors["dense_w"])
        assert np.all(err <= qm.dense_w.scale / 2 + 1e-12)

    def test_empty_calibration_rejected(self):
        with pytest.raises(ParameterError):
            quantize.quantize(small_model(), np.zeros((0, 2, 128)))

    def test_all_zero_calibration_widens_with_warning(self):
        p = small_model()
        with pytest.warns(UserWarning, match="degenerate"):
            qm = quantize.quantize(p, np.zeros((4, 2, 128), dtype=np.float32))
        assert all(s > 0 for s in qm.act_scale)

    def test_monotone_calibration(self):
        p = small_model(seed=3)
        a = calibration_inputs(8, seed=1)
        b = np.concatenate([a, 5.0 * calibration_inputs(8, seed=2)])
        qa = quantize.quantize(p, a)
        qb = quantize.quantize(p, b)
        # larger calibration set -> ranges only grow -> scales only grow
        for sa, sb in zip(qa.act_scale, qb.act_scale):
            assert sb >= sa - 1e-15


class TestQForward:
    def test_integer_determinism(self):
        p = small_model(seed=4)
        qm = quantize.quantize(p, calibration_inputs(seed=3))
        x = calibration_inputs(4, seed=4)
        a = quantize.q_forward(qm, x)
        b = quantize.q_forward(qm, x)
        np.testing.assert_array_equal(a, b)

    def test_zero_input_follows_bias_path(self):
        p = small_model(seed=5)
        # symmetric calibration so the input grid is zero-centered
        calib = np.concatenate([calibration_inputs(8, 5), -calibration_inputs(8, 5)])
        qm = quantize.quantize(p, calib)
        logits = quantize.q_forward(qm, np.zeros((1, 2, 128)))
        assert logits.shape == (1, 4)
        assert np.all(np.isfinite(logits))

    def test_shape_mismatch(self):
        p = small_model()
        qm = quantize.quantize(p, calibration_inputs())
        with pytest.raises(ParameterError):
            quantize.q_forward(qm, np.zeros((2, 64)))

    def test_agreement_with_float_on_trained_model(self, trained_eog_model, eog_epoch_set):
        x, _ = eog_epoch_set
        qm = quantize.quantize(trained_eog_model, x[:64])
        fresh_x, _ = make_eog_epoch_set(trials_per_class=6, seed=123)
        f_pred = np.argmax(epidenet.forward(trained_eog_model, fresh_x), axis=1)
        q_pred = np.argmax(quantize.q_forward(qm, fresh_x), axis=1)
        agreement = np.mean(f_pred == q_pred)
        assert agreement >= 0.98


class TestCountMacs:
    def test_dense_16x11(self):
        rep = quantize.count_macs(epidenet.build_epidenet(2, 500, 1, 11))
        assert dict(rep.layers)["dense"] == 176

    def test_topology_only(self):
        a = epidenet.build_epidenet(2, 500, 1, 11, seed=0)
        b = epidenet.build_epidenet(2, 500, 1, 11, seed=9)
        for k in b.tensors:
            b.tensors[k] *= 3.7
        assert quantize.count_macs(a) == quantize.count_macs(b)

    def test_total_is_layer_sum(self):
        rep = quantize.count_macs(epidenet.build_epidenet(8, 2000, 4, 2))
        assert rep.total == sum(m for _, m in rep.layers)

    def test_quantized_model_counts_match_float(self):
        p = small_model()
        qm = quantize.quantize(p, calibration_inputs())
        assert quantize.count_macs(qm) == quantize.count_macs(p)


class TestPerfModel:
    def test_published_operating_points(self):
        # deployment reference rows: (macs, MMAC/s, GMAC/s/W, ms, mJ)
        rows = [
            (259_856, 173.47, 10.66, 1.50, 0.024),
            (484_752, 196.10, 12.24, 2.47, 0.040),
            (3_844_000, 839.67, 31.64, 4.58, 0.121),
        ]
        for macs, thr, eff, t_ms, e_mj in rows:
            est = quantize.perf_model(macs, throughput_mmacs=thr, efficiency_gmacs_per_w=eff)
            assert est.time_ms == pytest.approx(t_ms, rel=0.02)
            assert est.energy_mj == pytest.approx(e_mj, rel=0.02)

    def test_zero_macs(self):
        est = quantize.perf_model(0, throughput_mmacs=100.0, efficiency_gmacs_per_w=10.0)
        assert est.time_ms == 0.0 and est.energy_mj == 0.0

    def test_nonpositive_rejected(self):
        with pytest.raises(ParameterError):
            quantize.perf_model(100, throughput_mmacs=0.0)
        with pytest.raises(ParameterError):
            quantize.perf_model(-1, throughput_mmacs=1.0)
