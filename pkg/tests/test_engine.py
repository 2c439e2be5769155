import math

import numpy as np
import pytest

from engine import functional as F
from engine.exceptions import ContractError, DimensionError, ParameterError
from engine.gradcheck import max_relative_error, numerical_gradient
from engine.tensor import Tape, Tensor, backward


# ---------------------------------------------------------------------------
# conv2d
# ---------------------------------------------------------------------------

def test_conv2d_identity_kernel(rng):
    tape = Tape()
    x = Tensor(rng.standard_normal((1, 4, 4)))
    out = tape.conv2d(x, Tensor(np.ones((1, 1, 1, 1))), Tensor(np.zeros(1)))
    np.testing.assert_array_equal(out.data, x.data)


def test_conv2d_counts_ones():
    tape = Tape()
    out = tape.conv2d(Tensor(np.ones((1, 3, 3))), Tensor(np.ones((1, 1, 3, 3))),
                      Tensor(np.zeros(1)))
    assert out.shape == (1, 1, 1)
    assert out.item() == 9.0


def test_conv2d_output_size_with_padding(rng):
    out = F.conv2d_forward(rng.standard_normal((2, 3, 3)), rng.standard_normal((3, 2, 3, 3)),
                           np.zeros(3), padding=1)
    assert out.shape == (3, 3, 3)


def test_conv2d_channel_mismatch_names_axis(rng):
    with pytest.raises(DimensionError) as info:
        F.conv2d_forward(rng.standard_normal((2, 4, 4)), rng.standard_normal((1, 1, 3, 3)),
                         np.zeros(1), padding=0)
    assert info.value.axis == "C_in"


def test_conv2d_batched_matches_single(rng):
    kernel = rng.standard_normal((2, 1, 3, 3))
    bias = rng.standard_normal(2)
    batch = rng.standard_normal((5, 1, 6, 6))
    batched = F.conv2d_forward(batch, kernel, bias, padding=1)
    for i in range(5):
        np.testing.assert_allclose(batched[i], F.conv2d_forward(batch[i], kernel, bias, 1),
                                   rtol=0, atol=1e-13)


@pytest.mark.parametrize("padding", [0, 1])
def test_conv2d_gradients_match_finite_differences(rng, padding):
    x = rng.standard_normal((1, 4, 4))
    kernel = rng.standard_normal((2, 1, 3, 3))
    bias = rng.standard_normal(2)
    out_shape = F.conv2d_forward(x, kernel, bias, padding).shape
    upstream = rng.standard_normal(out_shape)

    grad_x, grad_k, grad_b = F.conv2d_backward(x, kernel, padding, upstream)
    num_x = numerical_gradient(
        lambda z: float(np.sum(upstream * F.conv2d_forward(z, kernel, bias, padding))), x)
    num_k = numerical_gradient(
        lambda z: float(np.sum(upstream * F.conv2d_forward(x, z, bias, padding))), kernel)
    num_b = numerical_gradient(
        lambda z: float(np.sum(upstream * F.conv2d_forward(x, kernel, z, padding))), bias)
    assert max_relative_error(grad_x, num_x) < 1e-6
    assert max_relative_error(grad_k, num_k) < 1e-6
    assert max_relative_error(grad_b, num_b) < 1e-6


# ---------------------------------------------------------------------------
# maxpool2d
# ---------------------------------------------------------------------------

def test_maxpool_picks_max_and_routes_gradient():
    tape = Tape()
    x = Tensor(np.array([[[1.0, 2.0], [3.0, 4.0]]]))
    pooled = tape.maxpool2d(x, k=2, stride=2)
    np.testing.assert_array_equal(pooled.data, [[[4.0]]])
    (grad,) = backward(tape, tape.sum(pooled), [x])
    np.testing.assert_array_equal(grad, [[[0.0, 0.0], [0.0, 1.0]]])


def test_maxpool_ties_go_to_first_position():
    tape = Tape()
    x = Tensor(np.full((1, 4, 4), 2.5))
    (grad,) = backward(tape, tape.sum(tape.maxpool2d(x, k=2, stride=2)), [x])
    expected = np.zeros((1, 4, 4))
    expected[0, ::2, ::2] = 1.0
    np.testing.assert_array_equal(grad, expected)


def test_maxpool_output_size_floor():
    pooled, _ = F.maxpool2d_forward(np.zeros((1, 5, 5)), k=2, stride=2)
    assert pooled.shape == (1, 2, 2)


@pytest.mark.parametrize("k,stride", [(0, 1), (2, 0)])
def test_maxpool_rejects_bad_window(k, stride):
    with pytest.raises(ParameterError):
        F.maxpool2d_forward(np.zeros((1, 4, 4)), k=k, stride=stride)


@pytest.mark.parametrize("k,stride", [(2, 2), (2, 1), (3, 1)])
def test_maxpool_gradient_matches_finite_differences(rng, k, stride):
    # Distinct values with gaps of 1/16, far above the perturbation size.
    x = rng.permutation(16).reshape(1, 4, 4) / 16.0
    pooled, argmax = F.maxpool2d_forward(x, k, stride)
    upstream = rng.standard_normal(pooled.shape)
    analytic = F.maxpool2d_backward(x.shape, argmax, k, stride, upstream)
    numeric = numerical_gradient(
        lambda z: float(np.sum(upstream * F.maxpool2d_forward(z, k, stride)[0])), x)
    assert max_relative_error(analytic, numeric) < 1e-6


# ---------------------------------------------------------------------------
# relu, dense, cross-entropy
# ---------------------------------------------------------------------------

def test_relu_forward_and_backward():
    tape = Tape()
    x = Tensor(np.array([-1.0, 0.0, 2.0]))
    out = tape.relu(x)
    np.testing.assert_array_equal(out.data, [0.0, 0.0, 2.0])
    (grad,) = backward(tape, tape.sum(out), [x])
    np.testing.assert_array_equal(grad, [0.0, 0.0, 1.0])


def test_relu_positive_input_is_identity(rng):
    tape = Tape()
    x = Tensor(rng.random(6) + 0.1)
    out = tape.relu(x)
    np.testing.assert_array_equal(out.data, x.data)
    (grad,) = backward(tape, tape.sum(out), [x])
    np.testing.assert_array_equal(grad, np.ones(6))


def test_relu_gradient_matches_finite_differences(rng):
    x = rng.standard_normal(10)
    x += np.sign(x) * 0.1
    upstream = rng.standard_normal(10)
    numeric = numerical_gradient(lambda z: float(np.sum(upstream * F.relu_forward(z))), x)
    assert max_relative_error(F.relu_backward(x, upstream), numeric) < 1e-6


def test_dense_arithmetic():
    tape = Tape()
    out = tape.dense(Tensor(np.array([4.0, 5.0])), Tensor(np.array([[1.0, 2.0]])),
                     Tensor(np.array([3.0])))
    np.testing.assert_array_equal(out.data, [17.0])


def test_dense_identity_weight(rng):
    x = rng.standard_normal(4)
    np.testing.assert_array_equal(F.dense_forward(x, np.eye(4), np.zeros(4)), x)


def test_dense_gradients_match_finite_differences(rng):
    x = rng.standard_normal(5)
    weight = rng.standard_normal((3, 5))
    bias = rng.standard_normal(3)
    upstream = rng.standard_normal(3)
    tape = Tape()
    xt, wt, bt = Tensor(x), Tensor(weight), Tensor(bias)
    out = tape.dense(xt, wt, bt)
    # Weighted sum of outputs, built from tape primitives.
    terms = [tape.scale(tape.take(out, i), upstream[i]) for i in range(3)]
    total = tape.add(tape.add(terms[0], terms[1]), terms[2])
    grad_x, grad_w = backward(tape, total, [xt, wt])
    np.testing.assert_allclose(grad_x, weight.T @ upstream, rtol=1e-12)
    numeric_w = numerical_gradient(
        lambda z: float(upstream @ F.dense_forward(x, z, bias)), weight)
    assert max_relative_error(grad_w, numeric_w) < 1e-6


def test_dense_shape_mismatch(rng):
    with pytest.raises(DimensionError):
        F.dense_forward(rng.standard_normal(3), rng.standard_normal((2, 4)), np.zeros(2))


def test_cross_entropy_uniform_logits():
    tape = Tape()
    loss = tape.cross_entropy_loss(Tensor(np.zeros(2)), 0)
    assert loss.item() == pytest.approx(math.log(2.0), rel=1e-12)


def test_cross_entropy_is_stable_for_large_logits():
    tape = Tape()
    loss = tape.cross_entropy_loss(Tensor(np.array([1000.0, 0.0])), 0)
    assert math.isfinite(loss.item())
    assert loss.item() == pytest.approx(0.0, abs=1e-12)


def test_cross_entropy_rejects_bad_label():
    with pytest.raises(ParameterError):
        Tape().cross_entropy_loss(Tensor(np.zeros(2)), 2)


def test_cross_entropy_gradient_matches_finite_differences(rng):
    logits = rng.standard_normal(4)
    tape = Tape()
    z = Tensor(logits)
    (grad,) = backward(tape, tape.cross_entropy_loss(z, 1), [z])
    expected = F.softmax(logits)
    expected[1] -= 1.0
    np.testing.assert_allclose(grad, expected, rtol=1e-12, atol=1e-15)
    numeric = numerical_gradient(lambda v: float(-F.log_softmax(v)[1]), logits)
    assert max_relative_error(grad, numeric) < 1e-6


# ---------------------------------------------------------------------------
# backward
# ---------------------------------------------------------------------------

def test_backward_of_sum_is_ones(rng):
    tape = Tape()
    x = Tensor(rng.standard_normal((2, 3)))
    (grad,) = backward(tape, tape.sum(x), [x])
    np.testing.assert_array_equal(grad, np.ones((2, 3)))


def test_backward_through_relu():
    tape = Tape()
    x = Tensor(np.array([-1.0, 2.0]))
    (grad,) = backward(tape, tape.sum(tape.relu(x)), [x])
    np.testing.assert_array_equal(grad, [0.0, 1.0])


def test_backward_requires_scalar(rng):
    tape = Tape()
    out = tape.relu(Tensor(rng.standard_normal(3)))
    with pytest.raises(ContractError):
        backward(tape, out, [out])


def test_backward_requires_output_on_tape():
    with pytest.raises(ContractError):
        backward(Tape(), Tensor(np.array(1.0)), [])


def test_unused_leaf_gets_zero_gradient(rng):
    tape = Tape()
    x = Tensor(rng.standard_normal(3))
    unused = Tensor(rng.standard_normal((2, 2)))
    _, grad_unused = backward(tape, tape.sum(x), [x, unused])
    np.testing.assert_array_equal(grad_unused, np.zeros((2, 2)))


def test_backward_leaves_tape_reusable(rng):
    tape = Tape()
    x = Tensor(rng.standard_normal((1, 5, 5)))
    kernel = Tensor(rng.standard_normal((2, 1, 3, 3)))
    h = tape.relu(tape.conv2d(x, kernel, Tensor(np.zeros(2))))
    loss = tape.sum(h)
    before = h.data.copy()
    first = backward(tape, loss, [x, kernel])
    second = backward(tape, loss, [x, kernel])
    np.testing.assert_array_equal(h.data, before)
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a, b)


def test_backward_is_linear(rng):
    tape = Tape()
    x = Tensor(rng.standard_normal((1, 5, 5)))
    h = tape.flatten(tape.relu(tape.conv2d(x, Tensor(rng.standard_normal((2, 1, 3, 3))),
                                           Tensor(rng.standard_normal(2)))))
    f = tape.sum(h)
    g = tape.take(h, 3)
    a, b = 1.7, -0.4
    combo = tape.add(tape.scale(f, a), tape.scale(g, b))
    (grad_combo,) = backward(tape, combo, [x])
    (grad_f,) = backward(tape, f, [x])
    (grad_g,) = backward(tape, g, [x])
    np.testing.assert_allclose(grad_combo, a * grad_f + b * grad_g, rtol=1e-12, atol=1e-14)


def test_intermediate_tensor_gradient(rng):
    tape = Tape()
    x = Tensor(rng.standard_normal(4))
    h = tape.scale(x, 3.0)
    (grad_h,) = backward(tape, tape.sum(h), [h])
    np.testing.assert_array_equal(grad_h, np.ones(4))


# ---------------------------------------------------------------------------
# Full CNN8by8
# ---------------------------------------------------------------------------

def test_cnn_input_gradient_matches_finite_differences(cnn, rng):
    for _ in range(20):
        image = rng.standard_normal((1, 8, 8))
        fwd = cnn.run(image)
        c = fwd.predicted
        (analytic,) = backward(fwd.tape, fwd.tape.take(fwd.logits, c), [fwd.image])
        numeric = numerical_gradient(lambda z: float(cnn.predict_logits(z)[c]), image)
        assert max_relative_error(analytic, numeric, floor=1e-6) < 1e-4


def test_cnn_parameter_gradient_matches_finite_differences(cnn, rng):
    image = rng.standard_normal((1, 8, 8))
    label = 1
    tape = Tape()
    fwd = cnn.forward(tape, Tensor(image))
    loss = tape.cross_entropy_loss(fwd.logits, label)
    params = cnn.parameters()
    grads = backward(tape, loss, params)

    for index in (0, 2, len(params) - 2):
        param = params[index]
        saved = param.data

        def loss_of(value: np.ndarray) -> float:
            param.data = value
            try:
                return float(-F.log_softmax(cnn.predict_logits(image))[label])
            finally:
                param.data = saved

        numeric = numerical_gradient(loss_of, saved)
        assert max_relative_error(grads[index], numeric, floor=1e-6) < 1e-4


def test_forward_and_backward_are_deterministic(cnn, rng):
    image = rng.standard_normal((1, 8, 8))
    runs = []
    for _ in range(2):
        fwd = cnn.run(image)
        (grad,) = backward(fwd.tape, fwd.tape.take(fwd.logits, 0), [fwd.image])
        runs.append((fwd.logits.data.copy(), grad))
    np.testing.assert_array_equal(runs[0][0], runs[1][0])
    np.testing.assert_array_equal(runs[0][1], runs[1][1])


def test_taped_and_batched_forward_agree(cnn, rng):
    images = rng.standard_normal((6, 1, 8, 8))
    batched = cnn.predict_logits(images)
    for i in range(6):
        np.testing.assert_allclose(cnn.run(images[i]).logits.data, batched[i],
                                   rtol=1e-12, atol=1e-13)
