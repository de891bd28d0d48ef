import numpy as np
import pytest

from exgkit import epidenet
from exgkit.errors import ParameterError


class TestShapes:
    def test_trace_2x1000_d1(self):
        trace = dict(epidenet.shape_trace(2, 1000, 1, 11))
        assert trace["conv1"] == (4, 2, 1000)
        assert trace["pool1"] == (4, 2, 125)
        assert trace["pool2"] == (16, 2, 31)
        assert trace["pool3"] == (16, 2, 7)
        assert trace["pool4"] == (16, 2, 7)
        assert trace["avgpool"] == (16, 1, 1)
        assert trace["dense"] == (11,)

    def test_trace_8x2000_d4(self):
        trace = dict(epidenet.shape_trace(8, 2000, 4, 2))
        assert trace["pool1"] == (4, 8, 250)
        assert trace["pool3"] == (16, 8, 15)
        assert trace["pool4"] == (16, 2, 15)
        assert trace["dense"] == (2,)

    def test_trace_grid_matches_floor_chain(self):
        for c in (1, 2, 4, 8):
            for t in (128, 500, 777, 1000, 2000):
                for d in (1, 4):
                    if c % d:
                        continue
                    trace = dict(epidenet.shape_trace(c, t, d))
                    assert trace["pool1"] == (4, c, t // 8)
                    assert trace["pool2"] == (16, c, t // 32)
                    assert trace["pool3"] == (16, c, t // 128)
                    assert trace["pool4"] == (16, c // d, t // 128)

    def test_too_short_rejected(self):
        with pytest.raises(ParameterError):
            epidenet.shape_trace(2, 100, 1)

    def test_pool_height_divisibility(self):
        with pytest.raises(ParameterError):
            epidenet.build_epidenet(2, 1000, pool_height=4)

    def test_forward_output_shapes(self):
        p = epidenet.build_epidenet(2, 1000, 1, 11, seed=0)
        x = np.random.default_rng(0).normal(size=(3, 2, 1000)).astype(np.float32)
        assert epidenet.forward(p, x).shape == (3, 11)
        assert epidenet.forward(p, x[0]).shape == (11,)


class TestForward:
    def test_zero_params_uniform_softmax(self):
        p = epidenet.build_epidenet(2, 1000, 1, 11, seed=0)
        for k in p.tensors:
            p.tensors[k][:] = 0.0
        x = np.random.default_rng(1).normal(size=(2, 1000))
        logits = epidenet.forward(p, x)
        assert np.all(logits == 0.0)
        probs = epidenet.softmax(logits)
        np.testing.assert_allclose(probs, np.full(11, 1 / 11), atol=1e-12)

    def test_deterministic(self):
        p = epidenet.build_epidenet(2, 500, 1, 11, seed=3)
        x = np.random.default_rng(2).normal(size=(2, 500)).astype(np.float32)
        a = epidenet.forward(p, x)
        b = epidenet.forward(p, x)
        np.testing.assert_array_equal(a, b)

    def test_batch_equivalence(self):
        p = epidenet.build_epidenet(2, 500, 1, 11, seed=4).astype(np.float64)
        rng = np.random.default_rng(3)
        batch = rng.normal(size=(8, 2, 500))
        single = epidenet.forward(p, batch[5])
        stacked = epidenet.forward(p, batch)[5]
        np.testing.assert_allclose(single, stacked, atol=1e-6)

    def test_softmax_sums_to_one(self):
        p = epidenet.build_epidenet(2, 500, 1, 11, seed=5)
        x = np.random.default_rng(4).normal(size=(6, 2, 500)).astype(np.float32) * 50
        probs = epidenet.softmax(epidenet.forward(p, x))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)

    def test_dim_mismatch(self):
        p = epidenet.build_epidenet(2, 500, 1, 11)
        with pytest.raises(ParameterError):
            epidenet.forward(p, np.zeros((3, 400)))


class TestLossAndGrad:
    def test_uniform_loss_is_log_k(self):
        p = epidenet.build_epidenet(2, 1000, 1, 11, seed=0)
        for k in p.tensors:
            p.tensors[k][:] = 0.0
        x = np.random.default_rng(0).normal(size=(4, 2, 1000))
        loss, _ = epidenet.loss_and_grad(p, x, np.array([0, 3, 7, 10]))
        assert loss == pytest.approx(np.log(11), abs=1e-6)

    def test_duplicated_batch_invariance(self):
        p = epidenet.build_epidenet(2, 500, 1, 5, seed=1).astype(np.float64)
        rng = np.random.default_rng(1)
        x = rng.normal(size=(3, 2, 500))
        y = np.array([0, 2, 4])
        l1, g1 = epidenet.loss_and_grad(p, x, y)
        l2, g2 = epidenet.loss_and_grad(p, np.concatenate([x, x]), np.concatenate([y, y]))
        assert l1 == pytest.approx(l2, abs=1e-9)
        for k in g1:
            np.testing.assert_allclose(g1[k], g2[k], atol=1e-9)

    def test_batch_permutation_invariance(self):
        p = epidenet.build_epidenet(2, 500, 1, 5, seed=2).astype(np.float64)
        rng = np.random.default_rng(2)
        x = rng.normal(size=(6, 2, 500))
        y = rng.integers(0, 5, size=6)
        perm = rng.permutation(6)
        l1, g1 = epidenet.loss_and_grad(p, x, y)
        l2, g2 = epidenet.loss_and_grad(p, x[perm], y[perm])
        assert l1 == pytest.approx(l2, abs=1e-12)
        for k in g1:
            np.testing.assert_allclose(g1[k], g2[k], atol=1e-12)

    def test_label_out_of_range(self):
        p = epidenet.build_epidenet(2, 500, 1, 5)
        with pytest.raises(ParameterError):
            epidenet.loss_and_grad(p, np.zeros((1, 2, 500)), np.array([5]))

    @pytest.mark.parametrize("tensor_name", [
        "conv1_w", "conv1_b", "conv2_w", "conv3_w", "conv4_w", "conv5_w",
        "conv5_b", "dense_w", "dense_b",
    ])
    def test_gradcheck_against_finite_differences(self, tensor_name):
        """Central differences in float64, up to 50 coordinates per tensor."""
        from tests.conftest import finite_difference_check

        p = epidenet.build_epidenet(2, 128, 1, 4, seed=6, dtype=np.float64)
        rng = np.random.default_rng(7)
        x = rng.normal(size=(4, 2, 128))
        y = rng.integers(0, 4, size=4)
        checked, max_rel = finite_difference_check(p, x, y, tensor_name)
        assert checked >= min(50, p.tensors[tensor_name].size) * 0.8
        assert max_rel < 1e-4, f"{tensor_name}: max relative error {max_rel}"

    def test_maxpool_gradient_routes_to_single_argmax(self):
        """Each pooling window sends gradient to exactly one input position;
        ties resolve to the lowest flat index."""
        x = np.zeros((1, 1, 2, 8))
        x[0, 0, 0] = [1, 3, 3, 0, 5, 5, 5, 5]
        x[0, 0, 1] = [2, 2, 7, 1, 0, 0, 0, 1]
        y, cache = epidenet._maxpool(x, (1, 4))
        dy = np.ones_like(y)
        dx = epidenet._maxpool_backward(dy, cache)
        assert int(np.count_nonzero(dx)) == y.size
        assert dx[0, 0, 0, 1] == 1.0  # tie between index 1 and 2 -> lowest
        assert dx[0, 0, 0, 4] == 1.0  # four-way tie -> first position
        assert dx[0, 0, 1, 2] == 1.0
