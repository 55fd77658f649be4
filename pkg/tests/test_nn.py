"""Layers, losses, optimizer, and analytic gradients vs central differences."""

import numpy as np
import pytest

from abaf import rng as rng_mod
from abaf.errors import CheckpointError
from abaf.nn import (
    LSTM,
    Adam,
    BatchNorm1d,
    Conv2d,
    Dropout,
    Linear,
    MaxPool2d,
    Module,
    MultiHeadAttention,
    ReLU,
    TemporalAttention,
    count_params,
    grad_check,
    load_checkpoint,
    save_checkpoint,
    softmax,
    softmax_cross_entropy,
)

SEEDS = (0, 1, 2)
TOL = 1e-4


def _check_module(module, x, y):
    """Gradient-check every parameter of `module` and the input gradient."""
    def loss_fn():
        out = module.forward(x)
        loss, _ = softmax_cross_entropy(out.reshape(out.shape[0], -1), y)
        return loss

    module.zero_grad()
    out = module.forward(x)
    loss, d_logits = softmax_cross_entropy(out.reshape(out.shape[0], -1), y)
    grad_in = module.backward(d_logits.reshape(out.shape))
    params = module.parameters()
    if params:
        grads = [p.grad.copy() for p in params]
        err = grad_check(loss_fn, [p.value for p in params], grads)
        assert err < TOL, f"param gradient error {err:.2e}"

    # input gradient via the same central-difference scheme
    err_in = grad_check(loss_fn, [x], [grad_in])
    assert err_in < TOL, f"input gradient error {err_in:.2e}"


class TestGradients:
    @pytest.mark.parametrize("seed", SEEDS)
    def test_linear(self, seed):
        r = rng_mod.stream(seed, "test/linear")
        layer = Linear(7, 4, r)
        x = r.normal(size=(5, 7))
        y = r.integers(0, 4, size=5)
        _check_module(layer, x, y)

    @pytest.mark.parametrize("seed", SEEDS)
    def test_linear_no_bias(self, seed):
        r = rng_mod.stream(seed, "test/linear_nb")
        layer = Linear(6, 3, r, bias=False)
        assert len(layer.parameters()) == 1
        x = r.normal(size=(4, 6))
        y = r.integers(0, 3, size=4)
        _check_module(layer, x, y)

    @pytest.mark.parametrize("seed", SEEDS)
    def test_conv2d(self, seed):
        r = rng_mod.stream(seed, "test/conv")
        layer = Conv2d(2, 3, r)
        x = r.normal(size=(2, 2, 4, 4))
        y = r.integers(0, 4, size=2)

        def loss_fn():
            out = layer.forward(x)
            loss, _ = softmax_cross_entropy(out.reshape(2, -1)[:, :4], y)
            return loss

        layer.zero_grad()
        out = layer.forward(x)
        flat = out.reshape(2, -1)
        loss, d = softmax_cross_entropy(flat[:, :4], y)
        d_full = np.zeros_like(flat)
        d_full[:, :4] = d
        grad_in = layer.backward(d_full.reshape(out.shape))
        grads = [p.grad.copy() for p in layer.parameters()]
        err = grad_check(loss_fn, [p.value for p in layer.parameters()], grads)
        assert err < TOL
        err_in = grad_check(loss_fn, [x], [grad_in])
        assert err_in < TOL

    @pytest.mark.parametrize("seed", SEEDS)
    def test_maxpool(self, seed):
        r = rng_mod.stream(seed, "test/pool")
        layer = MaxPool2d()
        x = r.normal(size=(2, 1, 4, 4))
        y = r.integers(0, 4, size=2)

        def loss_fn():
            out = layer.forward(x)
            loss, _ = softmax_cross_entropy(out.reshape(2, -1), y)
            return loss

        out = layer.forward(x)
        loss, d = softmax_cross_entropy(out.reshape(2, -1), y)
        grad_in = layer.backward(d.reshape(out.shape))
        err = grad_check(loss_fn, [x], [grad_in])
        assert err < TOL

    @pytest.mark.parametrize("seed", SEEDS)
    def test_relu(self, seed):
        r = rng_mod.stream(seed, "test/relu")
        layer = ReLU()
        # keep values away from the kink where the numeric derivative breaks
        x = r.normal(size=(3, 5))
        x[np.abs(x) < 0.05] += 0.1
        y = r.integers(0, 5, size=3)
        _check_module(layer, x, y)

    @pytest.mark.parametrize("seed", SEEDS)
    def test_batchnorm_train_mode(self, seed):
        r = rng_mod.stream(seed, "test/bn")
        layer = BatchNorm1d(6)
        x = r.normal(size=(8, 6)) * 2.0 + 1.0
        y = r.integers(0, 6, size=8)
        _check_module(layer, x, y)

    @pytest.mark.parametrize("seed", SEEDS)
    def test_lstm(self, seed):
        r = rng_mod.stream(seed, "test/lstm")
        layer = LSTM(4, 3, r)
        x = r.normal(size=(2, 5, 4))
        y = r.integers(0, 2, size=2)

        def loss_fn():
            h = layer.forward(x)
            loss, _ = softmax_cross_entropy(h[:, -1, :2], y)
            return loss

        layer.zero_grad()
        h = layer.forward(x)
        loss, d = softmax_cross_entropy(h[:, -1, :2], y)
        dh = np.zeros_like(h)
        dh[:, -1, :2] = d
        grad_in = layer.backward(dh)
        grads = [p.grad.copy() for p in layer.parameters()]
        err = grad_check(loss_fn, [p.value for p in layer.parameters()], grads)
        assert err < TOL
        err_in = grad_check(loss_fn, [x], [grad_in])
        assert err_in < TOL

    @pytest.mark.parametrize("seed", SEEDS)
    def test_temporal_attention(self, seed):
        r = rng_mod.stream(seed, "test/att")
        layer = TemporalAttention(4, r)
        x = r.normal(size=(3, 6, 4))
        y = r.integers(0, 4, size=3)

        def loss_fn():
            pooled = layer.forward(x)
            loss, _ = softmax_cross_entropy(pooled, y)
            return loss

        layer.zero_grad()
        pooled = layer.forward(x)
        loss, d = softmax_cross_entropy(pooled, y)
        grad_in = layer.backward(d)
        grads = [p.grad.copy() for p in layer.parameters()]
        err = grad_check(loss_fn, [p.value for p in layer.parameters()], grads)
        assert err < TOL
        err_in = grad_check(loss_fn, [x], [grad_in])
        assert err_in < TOL

    @pytest.mark.parametrize("seed", SEEDS)
    @pytest.mark.parametrize("convention", ["split", "full"])
    def test_multi_head_attention(self, seed, convention):
        r = rng_mod.stream(seed, f"test/mha_{convention}")
        layer = MultiHeadAttention(4, 2, r, convention=convention)
        x = r.normal(size=(2, 3, 4))
        y = r.integers(0, 4, size=2)

        def loss_fn():
            out = layer.forward(x)
            loss, _ = softmax_cross_entropy(out[:, -1, :], y)
            return loss

        layer.zero_grad()
        out = layer.forward(x)
        loss, d = softmax_cross_entropy(out[:, -1, :], y)
        dout = np.zeros_like(out)
        dout[:, -1, :] = d
        grad_in = layer.backward(dout)
        grads = [p.grad.copy() for p in layer.parameters()]
        err = grad_check(loss_fn, [p.value for p in layer.parameters()], grads)
        assert err < TOL
        err_in = grad_check(loss_fn, [x], [grad_in])
        assert err_in < TOL

    @pytest.mark.parametrize("seed", SEEDS)
    def test_dropout_fixed_mask_gradient(self, seed):
        # gradient through a frozen mask: run forward once, then check the
        # linear map x -> x*mask/keep
        r = rng_mod.stream(seed, "test/drop")
        layer = Dropout(0.4, rng_mod.stream(seed, "test/drop_mask"))
        x = r.normal(size=(4, 6))
        y = r.integers(0, 6, size=4)
        out = layer.forward(x)
        mask = np.divide(out, x, out=np.zeros_like(out), where=x != 0)

        def loss_fn():
            loss, _ = softmax_cross_entropy(x * mask, y)
            return loss

        loss, d = softmax_cross_entropy(out, y)
        grad_in = layer.backward(d)
        err = grad_check(loss_fn, [x], [grad_in])
        assert err < TOL


class TestLayerSemantics:
    def test_conv_shape_padding(self):
        r = rng_mod.stream(0, "sem/conv")
        layer = Conv2d(3, 16, r)
        x = r.normal(size=(2, 3, 10, 12))
        out = layer.forward(x)
        assert out.shape == (2, 16, 10, 12)

    def test_maxpool_halves_and_first_tie_wins(self):
        layer = MaxPool2d()
        x = np.zeros((1, 1, 4, 4))
        x[0, 0, 0, 0] = x[0, 0, 0, 1] = 5.0  # tie inside the first window
        out = layer.forward(x)
        assert out.shape == (1, 1, 2, 2)
        assert out[0, 0, 0, 0] == 5.0
        g = layer.backward(np.ones_like(out))
        assert g[0, 0, 0, 0] == 1.0  # first occurrence takes the gradient
        assert g[0, 0, 0, 1] == 0.0

    def test_relu_clamps(self):
        layer = ReLU()
        out = layer.forward(np.array([[-1.0, 0.0, 2.0]]))
        np.testing.assert_array_equal(out, [[0.0, 0.0, 2.0]])

    def test_dropout_eval_is_identity(self):
        layer = Dropout(0.5, rng_mod.stream(0, "sem/drop"))
        layer.eval()
        x = np.random.default_rng(0).normal(size=(5, 5))
        np.testing.assert_array_equal(layer.forward(x), x)

    def test_dropout_train_scales_kept_units(self):
        layer = Dropout(0.25, rng_mod.stream(1, "sem/drop2"))
        x = np.ones((200, 50))
        out = layer.forward(x)
        kept = out[out != 0]
        np.testing.assert_allclose(kept, 1.0 / 0.75, atol=1e-12)
        # inverted scaling keeps the expectation near 1
        assert abs(out.mean() - 1.0) < 0.05

    def test_batchnorm_normalizes_batch(self):
        layer = BatchNorm1d(3)
        r = np.random.default_rng(2)
        x = r.normal(size=(64, 3)) * 5.0 + 3.0
        out = layer.forward(x)
        np.testing.assert_allclose(out.mean(axis=0), 0.0, atol=1e-9)
        np.testing.assert_allclose(out.std(axis=0), 1.0, atol=1e-2)

    def test_batchnorm_running_stats_used_in_eval(self):
        layer = BatchNorm1d(2)
        r = np.random.default_rng(3)
        for _ in range(200):
            layer.forward(r.normal(size=(32, 2)) * 2.0 + 5.0)
        layer.eval()
        x = np.array([[5.0, 5.0]])
        out = layer.forward(x)
        # running mean ~5, running var ~4 -> (5-5)/2 ~ 0
        np.testing.assert_allclose(out, 0.0, atol=0.2)

    def test_batchnorm_rejects_single_row_in_train(self):
        layer = BatchNorm1d(2)
        with pytest.raises(ValueError):
            layer.forward(np.ones((1, 2)))

    def test_lstm_output_shape_full_sequence(self):
        r = rng_mod.stream(0, "sem/lstm")
        layer = LSTM(3, 5, r)
        out = layer.forward(r.normal(size=(2, 7, 3)))
        assert out.shape == (2, 7, 5)

    def test_temporal_attention_pools_time(self):
        r = rng_mod.stream(0, "sem/att")
        layer = TemporalAttention(4, r)
        out = layer.forward(r.normal(size=(3, 6, 4)))
        assert out.shape == (3, 4)

    def test_attention_weights_convex(self):
        # pooled output of identical timesteps equals that timestep
        r = rng_mod.stream(1, "sem/att2")
        layer = TemporalAttention(4, r)
        h = np.tile(r.normal(size=(1, 1, 4)), (2, 6, 1))
        out = layer.forward(h)
        np.testing.assert_allclose(out, h[:, 0, :], atol=1e-12)


class TestCounts:
    def test_linear_with_bias(self):
        r = rng_mod.stream(0, "cnt/a")
        assert count_params(Linear(291, 128, r)) == 37_376

    def test_conv_counts(self):
        r = rng_mod.stream(0, "cnt/b")
        assert count_params(Conv2d(3, 16, r)) == 448
        assert count_params(Conv2d(16, 32, r)) == 4_640

    def test_mha_split_convention(self):
        r = rng_mod.stream(0, "cnt/c")
        layer = MultiHeadAttention(256, 4, r, convention="split")
        assert count_params(layer) == 4 * 256 * 256  # 262,144

    def test_mha_full_convention(self):
        r = rng_mod.stream(0, "cnt/d")
        layer = MultiHeadAttention(256, 4, r, convention="full")
        # per-head full-width Q/K/V plus the (E, h*E) output projection
        assert count_params(layer) == 3 * 4 * 256 * 256 + 256 * 4 * 256  # 1,048,576

    def test_batchnorm_counts(self):
        assert count_params(BatchNorm1d(128)) == 256


class TestLoss:
    def test_uniform_logits_two_classes(self):
        logits = np.zeros((4, 2))
        y = np.array([0, 1, 0, 1])
        loss, grad = softmax_cross_entropy(logits, y)
        assert loss == pytest.approx(np.log(2.0), abs=1e-12)
        assert grad.shape == (4, 2)

    def test_perfect_prediction_loss_near_zero(self):
        logits = np.array([[100.0, 0.0], [0.0, 100.0]])
        loss, _ = softmax_cross_entropy(logits, np.array([0, 1]))
        assert loss < 1e-12

    def test_gradient_is_softmax_minus_onehot_over_n(self):
        r = np.random.default_rng(0)
        logits = r.normal(size=(6, 3))
        y = r.integers(0, 3, size=6)
        loss, grad = softmax_cross_entropy(logits, y)
        p = softmax(logits)
        p[np.arange(6), y] -= 1.0
        np.testing.assert_allclose(grad, p / 6.0, atol=1e-12)

    def test_softmax_rows_sum_to_one(self):
        r = np.random.default_rng(1)
        p = softmax(r.normal(size=(5, 7)) * 30)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
        assert p.min() >= 0.0

    def test_shift_invariance(self):
        logits = np.array([[1.0, 2.0, 3.0]])
        np.testing.assert_allclose(softmax(logits), softmax(logits + 1000.0), atol=1e-12)

    def test_label_validation(self):
        with pytest.raises(ValueError):
            softmax_cross_entropy(np.zeros((2, 2)), np.array([0, 2]))
        with pytest.raises(ValueError):
            softmax_cross_entropy(np.zeros((2, 2)), np.array([0]))


class TestAdam:
    def test_hand_step(self):
        # w=1, f=w^2: first step moves by ~lr against the gradient sign
        from abaf.nn.params import Parameter

        w = Parameter(np.array([1.0]))
        opt = Adam([w], lr=0.1)
        w.grad += 2.0 * w.value  # df/dw = 2w
        opt.step()
        assert w.value[0] == pytest.approx(0.9, abs=1e-9)

    def test_converges_on_quadratic(self):
        from abaf.nn.params import Parameter

        w = Parameter(np.array([5.0, -3.0]))
        opt = Adam([w], lr=0.05)
        for _ in range(2000):
            opt.zero_grad()
            w.grad += 2.0 * w.value
            opt.step()
        np.testing.assert_allclose(w.value, 0.0, atol=1e-4)

    def test_rejects_bad_lr(self):
        with pytest.raises(ValueError):
            Adam([], lr=0.0)


class _TinyNet(Module):
    def __init__(self, seed=0):
        super().__init__()
        r = rng_mod.stream(seed, "tiny")
        self.fc1 = Linear(4, 8, r)
        self.bn = BatchNorm1d(8)
        self.fc2 = Linear(8, 2, r)

    def forward(self, x):
        return self.fc2.forward(self.bn.forward(self.fc1.forward(x)))


class TestCheckpoint:
    def test_round_trip_params_and_buffers(self, tmp_path):
        net = _TinyNet(seed=0)
        x = np.random.default_rng(0).normal(size=(16, 4))
        net.forward(x)  # move the running stats off their init values
        p = tmp_path / "net.ckpt"
        save_checkpoint(net, p)

        other = _TinyNet(seed=99)
        load_checkpoint(other, p)
        for (na, pa), (nb, pb) in zip(other.named_parameters(), net.named_parameters()):
            assert na == nb
            np.testing.assert_array_equal(pa.value, pb.value)
        for (na, ba), (nb, bb) in zip(other.named_buffers(), net.named_buffers()):
            assert na == nb
            np.testing.assert_array_equal(ba, bb)

    def test_shape_mismatch_rejected(self, tmp_path):
        net = _TinyNet()
        p = tmp_path / "net.ckpt"
        save_checkpoint(net, p)

        class Different(Module):
            def __init__(self):
                super().__init__()
                self.fc1 = Linear(5, 8, rng_mod.stream(0, "x"))

        with pytest.raises(CheckpointError):
            load_checkpoint(Different(), p)

    def test_corrupt_file_rejected(self, tmp_path):
        p = tmp_path / "bad.ckpt"
        p.write_bytes(b"not a checkpoint")
        with pytest.raises(CheckpointError):
            load_checkpoint(_TinyNet(), p)

    def test_count_params_matches_manual(self):
        net = _TinyNet()
        assert count_params(net) == (4 * 8 + 8) + (8 + 8) + (8 * 2 + 2)


class TestDeterminism:
    def test_named_streams_reproducible(self):
        a = rng_mod.stream(7, "alpha").normal(size=5)
        b = rng_mod.stream(7, "alpha").normal(size=5)
        c = rng_mod.stream(7, "beta").normal(size=5)
        d = rng_mod.stream(8, "alpha").normal(size=5)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)
        assert not np.array_equal(a, d)

    def test_same_seed_same_init(self):
        w1 = Linear(6, 6, rng_mod.stream(3, "init")).weight.value
        w2 = Linear(6, 6, rng_mod.stream(3, "init")).weight.value
        np.testing.assert_array_equal(w1, w2)
