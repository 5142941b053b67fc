import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from binscan.errors import BadLabel, OddDimension, ShapeMismatch
from binscan.nn import layers as L
from oracles import naive_conv3x3_same, naive_maxpool2, numeric_grad, rel_error


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# conv -----------------------------------------------------------------------

def identity_kernel(c):
    w = np.zeros((3, 3, c, c))
    for i in range(c):
        w[1, 1, i, i] = 1.0
    return w


def test_conv_identity_kernel(rng):
    x = rng.normal(size=(6, 5, 3))
    out, _ = L.conv2d_forward(x, identity_kernel(3), np.zeros(3))
    assert np.array_equal(out, x)


def test_conv_zero_input_gives_bias():
    out, _ = L.conv2d_forward(np.zeros((4, 4, 2)), np.ones((3, 3, 2, 3)), np.array([0.5, -1.0, 2.0]))
    assert np.array_equal(out, np.broadcast_to([0.5, -1.0, 2.0], (4, 4, 3)))


def test_conv_all_ones_3x3():
    out, _ = L.conv2d_forward(np.ones((3, 3, 1)), np.ones((3, 3, 1, 1)), np.zeros(1))
    assert out[..., 0].tolist() == [[4, 6, 4], [6, 9, 6], [4, 6, 4]]
    assert naive_conv3x3_same(np.ones((3, 3, 1)), np.ones((3, 3, 1, 1)), np.zeros(1))[..., 0].tolist() == out[..., 0].tolist()


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_conv_matches_naive(h, w, cin, cout, seed):
    r = np.random.default_rng(seed)
    x, k, b = r.normal(size=(h, w, cin)), r.normal(size=(3, 3, cin, cout)), r.normal(size=cout)
    out, _ = L.conv2d_forward(x, k, b)
    assert np.allclose(out, naive_conv3x3_same(x, k, b), atol=1e-10, rtol=0)


def test_conv_batched_equals_unbatched(rng):
    x = rng.normal(size=(3, 5, 5, 2))
    k, b = rng.normal(size=(3, 3, 2, 4)), rng.normal(size=4)
    batched, _ = L.conv2d_forward(x, k, b)
    for i in range(3):
        assert np.allclose(batched[i], L.conv2d_forward(x[i], k, b)[0])


def test_conv_shape_errors(rng):
    with pytest.raises(ShapeMismatch):
        L.conv2d_forward(np.zeros((4, 4, 2)), np.zeros((3, 3, 3, 1)), np.zeros(1))
    with pytest.raises(ShapeMismatch):
        L.conv2d_forward(np.zeros((4, 4, 2)), np.zeros((3, 3, 2, 1)), np.zeros(2))
    with pytest.raises(ShapeMismatch):
        L.conv2d_forward(np.zeros((4, 4)), np.zeros((3, 3, 2, 1)), np.zeros(1))
    _, cache = L.conv2d_forward(np.zeros((4, 4, 2)), np.zeros((3, 3, 2, 1)), np.zeros(1))
    with pytest.raises(ShapeMismatch):
        L.conv2d_backward(np.zeros((4, 4, 2)), cache)


def test_conv_backward_zero_grad(rng):
    x = rng.normal(size=(4, 4, 2))
    _, cache = L.conv2d_forward(x, rng.normal(size=(3, 3, 2, 3)), np.zeros(3))
    gi, gw, gb = L.conv2d_backward(np.zeros((4, 4, 3)), cache)
    assert not gi.any() and not gw.any() and not gb.any()


def test_conv_backward_identity_adjoint():
    x = np.zeros((5, 5, 1))
    _, cache = L.conv2d_forward(x, identity_kernel(1), np.zeros(1))
    g = np.zeros((5, 5, 1))
    g[2, 3, 0] = 1.0
    gi, _, _ = L.conv2d_backward(g, cache)
    assert np.array_equal(gi, g)


def test_conv_gradients_finite_difference(rng):
    x = rng.normal(size=(5, 5, 2))
    w = rng.normal(size=(3, 3, 2, 2))
    b = rng.normal(size=2)
    proj = rng.normal(size=(5, 5, 2))

    def loss():
        return float(np.sum(L.conv2d_forward(x, w, b)[0] * proj))

    _, cache = L.conv2d_forward(x, w, b)
    gi, gw, gb = L.conv2d_backward(proj, cache)
    assert rel_error(gi, numeric_grad(loss, x)) < 1e-5
    assert rel_error(gw, numeric_grad(loss, w)) < 1e-5
    assert rel_error(gb, numeric_grad(loss, b)) < 1e-5


# pooling --------------------------------------------------------------------

def test_pool_basic():
    out, _ = L.maxpool_forward(np.array([[1.0, 2.0], [3.0, 4.0]])[..., None])
    assert out[..., 0].tolist() == [[4.0]]


def test_pool_constant():
    out, _ = L.maxpool_forward(np.full((4, 6, 2), 3.5))
    assert np.all(out == 3.5) and out.shape == (2, 3, 2)


def test_pool_ramp():
    out, _ = L.maxpool_forward(np.arange(16.0).reshape(4, 4, 1))
    assert out[..., 0].tolist() == [[5, 7], [13, 15]]
    assert naive_maxpool2(np.arange(16.0).reshape(4, 4, 1))[..., 0].tolist() == [[5, 7], [13, 15]]


def test_pool_odd_dimension():
    with pytest.raises(OddDimension):
        L.maxpool_forward(np.zeros((3, 4, 1)))


def test_pool_backward_routes_to_max():
    x = np.array([[1.0, 2.0], [3.0, 4.0]])[..., None]
    _, cache = L.maxpool_forward(x)
    g = L.maxpool_backward(np.array([[[1.0]]]), cache)
    assert g[..., 0].tolist() == [[0, 0], [0, 1]]


def test_pool_backward_tie_goes_to_first():
    _, cache = L.maxpool_forward(np.ones((2, 2, 1)))
    g = L.maxpool_backward(np.array([[[1.0]]]), cache)
    assert g[..., 0].tolist() == [[1, 0], [0, 0]]


def test_pool_backward_tie_second_row():
    x = np.array([[0.0, 1.0], [1.0, 1.0]])[..., None]
    _, cache = L.maxpool_forward(x)
    assert L.maxpool_backward(np.array([[[2.0]]]), cache)[..., 0].tolist() == [[0, 2], [0, 0]]


def test_pool_backward_shape_check():
    _, cache = L.maxpool_forward(np.ones((4, 4, 1)))
    with pytest.raises(ShapeMismatch):
        L.maxpool_backward(np.ones((1, 1, 1)), cache)


def distinct_values(rng, shape, gap=1e-2):
    return (rng.permutation(int(np.prod(shape))) * gap + rng.normal()).reshape(shape)


def test_pool_gradient_finite_difference(rng):
    x = distinct_values(rng, (4, 6, 3))
    proj = rng.normal(size=(2, 3, 3))
    _, cache = L.maxpool_forward(x)
    g = L.maxpool_backward(proj, cache)
    num = numeric_grad(lambda: float(np.sum(L.maxpool_forward(x)[0] * proj)), x)
    assert rel_error(g, num) < 1e-6


# dense, relu, softmax -------------------------------------------------------

def test_dense_identity_and_bias(rng):
    x = rng.normal(size=5)
    assert np.allclose(L.dense_forward(x, np.eye(5), np.zeros(5))[0], x)
    b = rng.normal(size=3)
    assert np.array_equal(L.dense_forward(np.zeros(4), rng.normal(size=(4, 3)), b)[0], b)


def test_dense_gradient_finite_difference(rng):
    x, w, b = rng.normal(size=10), rng.normal(size=(10, 4)), rng.normal(size=4)
    proj = rng.normal(size=4)
    _, cache = L.dense_forward(x, w, b)
    gi, gw, gb = L.dense_backward(proj, cache)

    def loss():
        return float(L.dense_forward(x, w, b)[0] @ proj)

    for analytic, wrt in ((gi, x), (gw, w), (gb, b)):
        assert rel_error(analytic, numeric_grad(loss, wrt)) < 1e-6


def test_dense_shape_errors():
    with pytest.raises(ShapeMismatch):
        L.dense_forward(np.zeros(3), np.zeros((4, 2)), np.zeros(2))
    with pytest.raises(ShapeMismatch):
        L.dense_forward(np.zeros(4), np.zeros((4, 2)), np.zeros(3))


def test_relu_values():
    out, mask = L.relu_forward(np.array([-1.0, 2.0, 0.0]))
    assert out.tolist() == [0.0, 2.0, 0.0]
    assert L.relu_backward(np.ones(3), mask).tolist() == [0.0, 1.0, 0.0]


def test_relu_gradient_finite_difference(rng):
    x = rng.normal(size=20)
    x[np.abs(x) < 1e-3] = 0.5
    proj = rng.normal(size=20)
    _, mask = L.relu_forward(x)
    num = numeric_grad(lambda: float(L.relu_forward(x)[0] @ proj), x)
    assert rel_error(L.relu_backward(proj, mask), num) < 1e-8


def test_softmax_equal_logits():
    loss, probs, _ = L.softmax_xent(np.zeros(3), 1)
    assert np.allclose(probs, 1 / 3)
    assert loss == pytest.approx(np.log(3))
    assert loss == pytest.approx(1.0986, abs=1e-4)


def test_softmax_large_logits_stable():
    loss, probs, grad = L.softmax_xent(np.array([1000.0, 0.0]), 0)
    assert loss == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(probs, [1.0, 0.0])
    assert np.all(np.isfinite(grad))


def test_softmax_bad_label():
    with pytest.raises(BadLabel):
        L.softmax_xent(np.zeros(3), 3)


def test_softmax_gradient_finite_difference(rng):
    logits = rng.normal(size=4) * 3
    _, _, grad = L.softmax_xent(logits, 2)
    num = numeric_grad(lambda: L.softmax_xent(logits, 2)[0], logits)
    assert rel_error(grad, num) < 1e-6


@given(st.lists(st.floats(-1e4, 1e4), min_size=2, max_size=6), st.data())
def test_softmax_sums_to_one(logits, data):
    label = data.draw(st.integers(0, len(logits) - 1))
    loss, probs, grad = L.softmax_xent(np.array(logits), label)
    assert abs(probs.sum() - 1.0) < 1e-9
    assert np.isfinite(loss) and np.all(np.isfinite(grad))
    assert abs(grad.sum()) < 1e-9


def test_softmax_batch_mean(rng):
    logits = rng.normal(size=(5, 3))
    labels = np.array([0, 1, 2, 1, 0])
    loss, probs, grad = L.softmax_xent(logits, labels)
    singles = [L.softmax_xent(logits[i], labels[i]) for i in range(5)]
    assert loss == pytest.approx(np.mean([s[0] for s in singles]))
    assert np.allclose(grad, np.stack([s[2] for s in singles]) / 5)
