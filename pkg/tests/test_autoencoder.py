import math

import numpy as np
import pytest
import torch
from hypothesis import given, strategies as st

from sbrnn_imdd.autoencoder import (CLIP_MAX, AutoencoderDims, TransceiverParams, brnn_pass,
                                    clipping_activation, init_params, one_hot, relu, rx_decode, rx_logits,
                                    softmax, tx_encode)
from sbrnn_imdd.errors import ConfigurationError


@pytest.mark.parametrize("M,n", [(3, 4), (0, 4), (4, 0), (12, 8)])
def test_invalid_dims(M, n):
    with pytest.raises(ConfigurationError):
        AutoencoderDims(M, n)


def test_param_shapes_and_glorot_bounds():
    dims = AutoencoderDims(8, 6)
    p = init_params(dims, seed=3)
    p.tx.check(dims)
    p.rx.check(dims)
    for name, t in p.named().items():
        if name.split(".")[1].startswith("b_"):
            assert torch.all(t == 0)
        else:
            fan_out, fan_in = t.shape
            assert t.abs().max() <= math.sqrt(6 / (fan_in + fan_out))


def test_init_is_seeded():
    a, b = init_params(AutoencoderDims(4, 4), 7), init_params(AutoencoderDims(4, 4), 7)
    assert all(torch.equal(x, y) for x, y in zip(a.tensors(), b.tensors()))
    assert not torch.equal(a.tensors()[0], init_params(AutoencoderDims(4, 4), 8).tensors()[0])


def test_zero_softmax_option():
    p = init_params(AutoencoderDims(4, 4), zero_softmax=True)
    assert torch.all(p.rx.W_softmax == 0)


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=20))
def test_softmax_is_a_distribution(xs):
    p = softmax(torch.tensor(xs))
    assert torch.all(p >= 0)
    assert abs(p.sum().item() - 1) < 1e-12
    assert p[int(np.argmax(xs))] == p.max()


@given(st.floats(-1e6, 1e6))
def test_clipping_activation_equals_relu_difference(x):
    y = clipping_activation(torch.tensor(x)).item()
    assert 0.0 <= y <= CLIP_MAX
    assert y == pytest.approx(max(x, 0.0) - max(x - CLIP_MAX, 0.0), abs=1e-9)


def _loop_oracle(x, W_f, b_f, W_b, b_b, act):
    T, hidden = x.shape[0], W_f.shape[0]
    fwd, bwd = np.zeros((T, hidden)), np.zeros((T, hidden))
    h = np.zeros(hidden)
    for t in range(T):
        h = act(W_f @ np.concatenate([x[t], h]) + b_f)
        fwd[t] = h
    g = np.zeros(hidden)
    for t in range(T - 1, -1, -1):
        g = act(W_b @ np.concatenate([x[t], g]) + b_b)
        bwd[t] = g
    return fwd, bwd


@given(st.integers(1, 7), st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**31))
def test_brnn_pass_matches_loop_oracle(T, d_in, hidden, seed):
    r = np.random.default_rng(seed)
    x = r.normal(size=(T, d_in))
    W_f, W_b = r.normal(size=(hidden, d_in + hidden)), r.normal(size=(hidden, d_in + hidden))
    b_f, b_b = r.normal(size=hidden), r.normal(size=hidden)
    fwd, bwd = brnn_pass(*(torch.as_tensor(a) for a in (x, W_f, b_f, W_b, b_b)), relu)
    of, ob = _loop_oracle(x, W_f, b_f, W_b, b_b, lambda v: np.maximum(v, 0))
    np.testing.assert_allclose(fwd.numpy(), of, atol=1e-12)
    np.testing.assert_allclose(bwd.numpy(), ob, atol=1e-12)


def test_brnn_pass_dimension_mismatch():
    with pytest.raises(ConfigurationError):
        brnn_pass(torch.zeros(3, 4), torch.zeros(2, 5), torch.zeros(2), torch.zeros(2, 6), torch.zeros(2), relu)


def test_batch_axes_are_independent():
    dims = AutoencoderDims(4, 3)
    p = init_params(dims, 1)
    msgs = np.random.default_rng(0).integers(0, 4, size=(3, 5))
    batch = tx_encode(one_hot(msgs, 4), p.tx)
    for i in range(3):
        torch.testing.assert_close(tx_encode(one_hot(msgs[i], 4), p.tx), batch[i])


@given(st.integers(0, 2**31))
def test_tx_output_in_mzm_range(seed):
    dims = AutoencoderDims(8, 5)
    p = init_params(dims, seed % 1000)
    for t in p.tx.tensors():
        t.mul_(5.0)  # drive the pre-activations far outside the range
    msgs = np.random.default_rng(seed).integers(0, 8, size=12)
    x = tx_encode(one_hot(msgs, 8), p.tx)
    assert x.shape == (12, 5)
    assert torch.all(x >= 0) and torch.all(x <= CLIP_MAX)


def test_rx_decode_outputs_distributions():
    dims = AutoencoderDims(8, 5)
    p = init_params(dims, 2)
    y = rx_decode(torch.randn(4, 6, 5), p.rx)
    assert y.shape == (4, 6, 8)
    torch.testing.assert_close(y.sum(-1), torch.ones(4, 6))


def test_carried_states_continue_the_recurrence():
    """Encoding a sequence in two halves, carrying the forward state, matches the
    forward half of a single pass."""
    p = init_params(AutoencoderDims(4, 3), 5)
    msgs = one_hot(np.array([0, 3, 1, 2, 2, 1]), 4)
    fwd_all, _ = brnn_pass(msgs, p.tx.W_fwd, p.tx.b_fwd, p.tx.W_bwd, p.tx.b_bwd, clipping_activation)
    _, (hf, _) = tx_encode(msgs[:3], p.tx, return_states=True)
    fwd_b, _ = brnn_pass(msgs[3:], p.tx.W_fwd, p.tx.b_fwd, p.tx.W_bwd, p.tx.b_bwd, clipping_activation,
                         init_fwd=hf)
    torch.testing.assert_close(fwd_b, fwd_all[3:])


def test_from_named_roundtrip_and_shape_check():
    dims = AutoencoderDims(4, 3)
    p = init_params(dims, 0)
    q = TransceiverParams.from_named(dims, {k: v.numpy() for k, v in p.named().items()})
    assert all(torch.equal(a, b) for a, b in zip(p.tensors(), q.tensors()))
    with pytest.raises(ConfigurationError):
        TransceiverParams.from_named(AutoencoderDims(4, 4), {k: v.numpy() for k, v in p.named().items()})


def test_logits_linear_in_softmax_layer():
    p = init_params(AutoencoderDims(4, 3), 0)
    y = torch.randn(5, 3)
    base = rx_logits(y, p.rx)
    p.rx.b_softmax.add_(1.5)
    torch.testing.assert_close(rx_logits(y, p.rx), base + 1.5)
