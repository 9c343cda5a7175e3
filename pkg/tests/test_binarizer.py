import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from binet import tensor as T
from binet.binarizer import binarize, straight_through_backward
from binet.nn import Conv2d
from binet.tensor import Tensor, backward
from binet.training import Adam


@pytest.mark.parametrize("x", [-1.0, -0.5, 0.0, 0.5, 1.0])
def test_stochastic_mean_matches_input(x):
    rng = np.random.default_rng(7)
    b = binarize(Tensor(np.full(100_000, x)), "stochastic", rng).data
    assert set(np.unique(b)) <= {-1.0, 1.0}
    assert abs(b.mean() - x) <= 0.01


def test_endpoints_are_certain():
    rng = np.random.default_rng(0)
    b = binarize(Tensor(np.array([-1.0] * 50 + [1.0] * 50)), "stochastic", rng).data
    np.testing.assert_array_equal(b, [-1.0] * 50 + [1.0] * 50)


def test_deterministic_sign_with_zero_positive():
    b = binarize(Tensor(np.array([-0.3, 0.0, 1e-9, -1e-9, 0.7])), "deterministic").data
    np.testing.assert_array_equal(b, [-1, 1, 1, -1, 1])


def test_stochastic_requires_rng():
    with pytest.raises(ValueError):
        binarize(Tensor(np.zeros(2)), "stochastic")


def test_unknown_mode():
    with pytest.raises(ValueError):
        binarize(Tensor(np.zeros(2)), "round")


@pytest.mark.parametrize("mode", ["stochastic", "deterministic", "identity"])
def test_straight_through_is_bit_identical(mode):
    rng = np.random.default_rng(3)
    x = Tensor(rng.uniform(-1, 1, size=(4, 5)).astype(np.float32), requires_grad=True)
    upstream = rng.normal(size=(4, 5)).astype(np.float32)
    backward(T.sum_(binarize(x, mode, rng) * Tensor(upstream)))
    assert x.grad.dtype == upstream.dtype
    assert x.grad.tobytes() == upstream.tobytes()


@settings(max_examples=50, deadline=None)
@given(arrays(np.float32, (16,), elements=st.floats(-1e6, 1e6, width=32)))
def test_straight_through_identity_property(g):
    assert straight_through_backward(g) is g


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (32,), elements=st.floats(-3, 3)), st.integers(0, 2**32 - 1))
def test_outputs_always_binary(x, seed):
    for mode in ("stochastic", "deterministic"):
        b = binarize(Tensor(x), mode, np.random.default_rng(seed)).data
        assert np.all(np.abs(b) == 1.0)


@pytest.mark.parametrize("seed", range(5))
def test_one_layer_codec_learns_through_binarizer(seed):
    rng = np.random.default_rng(seed)
    x = Tensor(rng.uniform(-1, 1, (1, 3, 8, 8)).astype(np.float32))
    enc, dec = Conv2d(3, 8, 3, rng, stride=2), Conv2d(8, 12, 3, rng)
    opt = Adam({"ew": enc.weight, "eb": enc.bias, "dw": dec.weight, "db": dec.bias})
    losses = []
    for _ in range(51):
        opt.zero_grad()
        b = binarize(T.tanh(enc(x)), "deterministic")
        loss = T.mean(T.abs_(x - T.tanh(T.depth_to_space(dec(b), 2))))
        losses.append(loss.item())
        backward(loss)
        opt.step(3e-4)
    assert np.sum(np.diff(losses) < 0) >= 45
