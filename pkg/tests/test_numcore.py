"""Autodiff core: op contracts, adjointness, optimizer behavior."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import hand_conv2d

from meaformer.errors import ContractViolation
from meaformer.numcore import (Adam, AdamConfig, MultiHeadAttention, Tensor,
                               adam_step, batchnorm_relu, conv2d, deconv2d,
                               dropout, grad_check, linear, no_grad, parameter,
                               plane_sample, relu, sigmoid, softmax, tabs,
                               tsum, upsample2x)
from meaformer.numcore import tensor as T
from meaformer.numcore.gradcheck import adjoint_probe

F64 = np.float64


class TestConv2d:
    def test_zero_input_gives_zero_output(self):
        x = Tensor(np.zeros((1, 1, 3, 3)))
        w = Tensor(np.random.default_rng(0).standard_normal((4, 1, 3, 3)))
        y = conv2d(x, w, Tensor(np.zeros(4)), stride=1, pad=1)
        assert np.all(y.data == 0)

    def test_identity_kernel(self):
        rng = np.random.default_rng(1)
        x = Tensor(rng.standard_normal((1, 1, 5, 5)))
        w = Tensor(np.ones((1, 1, 1, 1)))
        y = conv2d(x, w, Tensor(np.zeros(1)), stride=1, pad=0)
        np.testing.assert_array_equal(y.data, x.data)

    def test_ramp_averaging_kernel_matches_hand_convolution(self):
        # 4x4 ramp, 3x3 averaging kernel: derived with the naive-loop oracle
        x = np.arange(16, dtype=np.float64).reshape(1, 1, 4, 4)
        w = np.full((1, 1, 3, 3), 1.0 / 9.0)
        expect = hand_conv2d(x, w, None, 1, 1)
        got = conv2d(Tensor(x), Tensor(w), None, stride=1, pad=1)
        np.testing.assert_allclose(got.data, expect, atol=1e-12)
        # center value equals the mean of its 3x3 neighborhood
        assert abs(got.data[0, 0, 1, 1] - x[0, 0, 0:3, 0:3].mean()) < 1e-12

    def test_channel_mismatch_raises(self):
        x = Tensor(np.zeros((1, 3, 4, 4)))
        w = Tensor(np.zeros((2, 4, 3, 3)))
        with pytest.raises(ContractViolation):
            conv2d(x, w, None, 1, 1)

    def test_output_size_formula(self):
        x = Tensor(np.zeros((1, 1, 11, 11)))
        w = Tensor(np.zeros((1, 1, 3, 3)))
        y = conv2d(x, w, None, stride=2, pad=1)
        assert y.shape == (1, 1, (11 + 2 - 3) // 2 + 1, 6)


class TestDeconv2d:
    def test_zeros_with_bias(self):
        x = Tensor(np.zeros((1, 1, 2, 2)))
        w = Tensor(np.random.default_rng(0).standard_normal((1, 1, 4, 4)))
        y = deconv2d(x, w, Tensor(np.array([0.5])), stride=2, pad=1)
        assert y.shape == (1, 1, 4, 4)
        np.testing.assert_allclose(y.data, 0.5)

    def test_doubles_spatial_size(self):
        x = Tensor(np.zeros((1, 3, 8, 8)))
        w = Tensor(np.zeros((3, 32, 4, 4)))
        assert deconv2d(x, w, None, stride=2, pad=1).shape == (1, 32, 16, 16)

    def test_adjoint_of_conv_with_shared_weights(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            x = rng.standard_normal((1, 3, 2, 2))
            w = rng.standard_normal((3, 5, 4, 4))
            g = rng.standard_normal((1, 5, 4, 4))
            with no_grad():
                lhs = (deconv2d(Tensor(x, dtype=F64), Tensor(w, dtype=F64),
                                None, 2, 1).data * g).sum()
                rhs = (conv2d(Tensor(g, dtype=F64), Tensor(w, dtype=F64),
                              None, 2, 1).data * x).sum()
            assert abs(lhs - rhs) < 1e-9


class TestBatchNorm:
    def test_constant_channel_gives_shift(self):
        x = Tensor(np.full((2, 1, 3, 3), 7.0))
        gamma, beta = Tensor(np.ones(1)), Tensor(np.array([-0.25]))
        rm, rv = np.zeros(1), np.ones(1)
        y = batchnorm_relu(x, gamma, beta, rm, rv, training=True)
        np.testing.assert_allclose(y.data, max(-0.25, 0.0), atol=1e-6)
        y2 = batchnorm_relu(x, gamma, Tensor(np.array([0.25])), rm, rv, training=True)
        np.testing.assert_allclose(y2.data, 0.25, atol=1e-6)

    def test_standardized_batch_passes_through(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((4, 2, 5, 5))
        x = (x - x.mean(axis=(0, 2, 3), keepdims=True)) / x.std(axis=(0, 2, 3), keepdims=True)
        y = batchnorm_relu(Tensor(x, dtype=F64), Tensor(np.ones(2), dtype=F64),
                           Tensor(np.zeros(2), dtype=F64), np.zeros(2), np.ones(2),
                           training=True)
        np.testing.assert_allclose(y.data, np.maximum(x, 0), atol=1e-4)

    def test_normalizes_moments(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((2, 3, 4, 4)) * 3 + 1
        y = batchnorm_relu(Tensor(x, dtype=F64), Tensor(np.ones(3), dtype=F64),
                           Tensor(np.zeros(3), dtype=F64), np.zeros(3), np.ones(3),
                           training=True, apply_relu=False)
        mu = y.data.mean(axis=(0, 2, 3))
        var = y.data.var(axis=(0, 2, 3))
        np.testing.assert_allclose(mu, 0, atol=1e-5)
        np.testing.assert_allclose(var, 1, atol=1e-4)

    def test_eval_uses_running_stats(self):
        rm, rv = np.array([2.0]), np.array([4.0])
        x = Tensor(np.full((1, 1, 2, 2), 4.0))
        y = batchnorm_relu(x, Tensor(np.ones(1)), Tensor(np.zeros(1)), rm, rv,
                           training=False, apply_relu=False)
        np.testing.assert_allclose(y.data, (4 - 2) / np.sqrt(4 + 1e-5), rtol=1e-5)


class TestAttention:
    def test_single_token_weight_is_one(self):
        mha = MultiHeadAttention(8, 2, rng=np.random.default_rng(0), dtype=F64)
        x = Tensor(np.random.default_rng(1).standard_normal((1, 1, 8)), dtype=F64)
        out, attn = mha(x, x, x, return_weights=True)
        np.testing.assert_allclose(attn.data, 1.0)
        chain = mha.out_proj(mha.v_proj(x))
        np.testing.assert_allclose(out.data, chain.data, atol=1e-12)

    def test_two_identical_tokens_split_evenly(self):
        mha = MultiHeadAttention(8, 2, rng=np.random.default_rng(0), dtype=F64)
        tok = np.random.default_rng(2).standard_normal((1, 1, 8))
        x = Tensor(np.repeat(tok, 2, axis=1), dtype=F64)
        _, attn = mha(x, x, x, return_weights=True)
        np.testing.assert_allclose(attn.data, 0.5, atol=1e-12)

    def test_attention_rows_are_stochastic(self):
        mha = MultiHeadAttention(8, 2, rng=np.random.default_rng(0), dtype=F64)
        x = Tensor(np.random.default_rng(3).standard_normal((2, 5, 8)), dtype=F64)
        _, attn = mha(x, x, x, return_weights=True)
        np.testing.assert_allclose(attn.data.sum(axis=-1), 1.0, atol=1e-6)

    def test_indivisible_heads_rejected(self):
        with pytest.raises(Exception):
            MultiHeadAttention(6, 4)


class TestGradCheck:
    def test_quadratic(self):
        x = parameter(np.random.default_rng(5).standard_normal(7), dtype=F64)
        err = grad_check(lambda: tsum(x * x), [x])
        assert err < 1e-8

    def test_layer_gradients(self):
        rng = np.random.default_rng(6)
        x = parameter(rng.standard_normal((2, 3, 6, 6)), dtype=F64)
        w = parameter(rng.standard_normal((4, 3, 3, 3)) * 0.4, dtype=F64)
        b = parameter(rng.standard_normal(4) * 0.1, dtype=F64)
        cot = Tensor(rng.standard_normal((2, 4, 6, 6)), dtype=F64)
        err = grad_check(lambda: tsum(conv2d(x, w, b, 1, 1) * cot), [x, w, b])
        assert err < 1e-6


def _ln_probe(t):
    from meaformer.numcore import layernorm
    g = Tensor(np.ones(18), dtype=F64)
    b = Tensor(np.zeros(18), dtype=F64)
    return layernorm(t.reshape(2, 18), g, b)


def _mha_probe(t):
    mha = _mha_probe.mha
    seq = t.reshape(1, 2, 18)[:, :, :8]
    return mha(seq, seq, seq)


_mha_probe.mha = MultiHeadAttention(8, 2, rng=np.random.default_rng(12), dtype=F64)


def _plane_probe(t):
    pts_x = Tensor(np.array([1.3, 2.7, 0.4]), dtype=F64)
    pts_y = Tensor(np.array([0.6, 1.2, 2.1]), dtype=F64)
    return plane_sample(t.reshape(6, 6), pts_x, pts_y)


LAYER_PROBES = {
    "conv": lambda t: conv2d(t, Tensor(np.random.default_rng(7).standard_normal((3, 2, 3, 3)), dtype=F64), None, 1, 1),
    "deconv": lambda t: deconv2d(t, Tensor(np.random.default_rng(8).standard_normal((2, 3, 4, 4)), dtype=F64), None, 2, 1),
    "linear": lambda t: linear(t.reshape(2, 18), Tensor(np.random.default_rng(9).standard_normal((5, 18)), dtype=F64)),
    "layernorm": _ln_probe,
    "attention": _mha_probe,
    "plane_sample": _plane_probe,
    "relu": relu,
    "sigmoid": sigmoid,
    "softmax": lambda t: softmax(t.reshape(2, 18), axis=-1),
    "upsample": upsample2x,
    "sum": lambda t: tsum(t * t),
    "abs": tabs,
}


@pytest.mark.parametrize("name", sorted(LAYER_PROBES))
def test_layer_adjointness(name):
    rng = np.random.default_rng(10)
    if name == "deconv":
        x = rng.standard_normal((1, 2, 3, 3))
    elif name == "plane_sample":
        x = rng.standard_normal((6, 6))
    else:
        x = rng.standard_normal((2, 2, 3, 3))
    assert adjoint_probe(LAYER_PROBES[name], x, rng) < 1e-6


def test_layer_config_validation():
    from meaformer.numcore import Conv2d
    from meaformer.errors import ConfigError
    with pytest.raises(ConfigError):
        Conv2d(3, 0, 3)
    with pytest.raises(ConfigError):
        Conv2d(3, 4, 0)
    with pytest.raises(ConfigError):
        Conv2d(3, 4, 3, stride=0)


@given(st.integers(0, 2 ** 32 - 1))
def test_softmax_rows_sum_to_one(seed):
    x = np.random.default_rng(seed).standard_normal((3, 6)) * 5
    rows = softmax(Tensor(x, dtype=F64), axis=-1).data.sum(axis=-1)
    np.testing.assert_allclose(rows, 1.0, atol=1e-6)


@given(st.integers(0, 2 ** 32 - 1))
def test_sigmoid_stays_open_interval(seed):
    x = np.random.default_rng(seed).standard_normal(50) * 8
    y = sigmoid(Tensor(x, dtype=F64)).data
    assert np.all(y > 0) and np.all(y < 1)


class TestAdam:
    def test_zero_lr_is_bit_identical(self):
        rng = np.random.default_rng(11)
        p = parameter(rng.standard_normal(16))
        before = p.data.copy()
        p.grad = rng.standard_normal(16).astype(p.data.dtype)
        m, v = np.zeros_like(p.data), np.zeros_like(p.data)
        adam_step(p, m, v, 1, AdamConfig(lr=0.0))
        assert np.array_equal(p.data, before)
        assert m.any() and v.any()  # moments still update

    def test_descends_quadratic(self):
        p = parameter(np.array([5.0, -3.0]))
        opt = Adam([p], AdamConfig(lr=0.1))
        for _ in range(300):
            loss = tsum(p * p)
            opt.zero_grad()
            loss.backward()
            opt.step()
        assert np.abs(p.data).max() < 1e-2

    def test_config_validation(self):
        with pytest.raises(Exception):
            AdamConfig(lr=-1.0)
        with pytest.raises(Exception):
            AdamConfig(beta1=1.0)


class TestDeterminism:
    def test_dropout_stream_reproducible(self):
        x = Tensor(np.ones((4, 4)))
        a = dropout(x, 0.5, np.random.default_rng(42), training=True)
        b = dropout(x, 0.5, np.random.default_rng(42), training=True)
        assert np.array_equal(a.data, b.data)
        c = dropout(x, 0.5, np.random.default_rng(43), training=True)
        assert not np.array_equal(a.data, c.data)

    def test_eval_dropout_is_identity(self):
        x = Tensor(np.random.default_rng(0).random((3, 3)))
        y = dropout(x, 0.5, np.random.default_rng(0), training=False)
        assert y is x

    def test_forward_backward_deterministic(self):
        def run():
            rng = np.random.default_rng(7)
            x = parameter(rng.standard_normal((2, 8)), dtype=F64)
            w = parameter(rng.standard_normal((8, 8)), dtype=F64)
            y = tsum(sigmoid(linear(dropout(x, 0.2, np.random.default_rng(3), True), w)))
            y.backward()
            return y.data.copy(), x.grad.copy()
        (y1, g1), (y2, g2) = run(), run()
        assert np.array_equal(y1, y2) and np.array_equal(g1, g2)


def test_debug_mode_catches_nonfinite(monkeypatch):
    monkeypatch.setattr(T, "DEBUG_CHECKS", True)
    x = Tensor(np.array([1.0, 2.0]))
    with pytest.raises(FloatingPointError):
        T.log(Tensor(np.array([0.0])))  # log(0) -> -inf
    y = x * 2.0
    assert np.all(np.isfinite(y.data))


def test_plane_sample_clamps_and_samples():
    plane = Tensor(np.arange(12, dtype=np.float64).reshape(3, 4))
    v = plane_sample(plane, Tensor(np.array([1.5])), Tensor(np.array([0.5])))
    assert abs(float(v.data[0]) - (1.5 + 0.5 * 4)) < 1e-12
    v2 = plane_sample(plane, Tensor(np.array([-5.0])), Tensor(np.array([0.0])))
    assert float(v2.data[0]) == 0.0
