import numpy as np
import pytest

from globalrnn.exceptions import ContractError, DeterminismError, NumericError, ShapeError
from globalrnn.gradcore import Tape, Tensor, backward, finite_difference_check


def param(values):
    return Tensor(np.asarray(values, dtype=float), requires_grad=True)


def test_primitives():
    tape = Tape()
    zero = Tensor(np.zeros(3))
    np.testing.assert_array_equal(tape.sigmoid(zero).data, [0.5, 0.5, 0.5])
    np.testing.assert_array_equal(tape.tanh(zero).data, [0.0, 0.0, 0.0])
    x = Tensor([1.0, -2.0, 3.0])
    out = tape.affine(Tensor(np.eye(3)), x, Tensor(np.zeros(3)))
    np.testing.assert_array_equal(out.data, x.data)


def test_nothing_recorded_without_gradients():
    tape = Tape()
    tape.sigmoid(Tensor([1.0]))
    assert len(tape) == 0
    disabled = Tape(enabled=False)
    disabled.sigmoid(param([1.0]))
    assert len(disabled) == 0


def test_affine_shape_error():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(4,\)"):
        Tape().affine(Tensor(np.zeros((2, 3))), Tensor(np.zeros(4)))


def test_non_finite_output():
    with pytest.raises(NumericError, match="scale"):
        Tape().scale(Tensor([1e308]), 10.0)


def test_sum_gradient():
    x = param([1.0, 2.0, 3.0])
    tape = Tape()
    (grad,) = backward(tape, tape.sum(x), [x])
    np.testing.assert_array_equal(grad, [1.0, 1.0, 1.0])


def test_sigmoid_gradient():
    w = param([0.0])
    c = Tensor([3.0])
    tape = Tape()
    (grad,) = backward(tape, tape.sum(tape.hadamard(tape.sigmoid(w), c)), [w])
    np.testing.assert_allclose(grad, [0.25 * 3.0])


def test_unused_parameter():
    used, unused = param([1.0, 2.0]), param([[5.0, 6.0]])
    tape = Tape()
    grads = backward(tape, tape.sum_squares(used), [used, unused])
    np.testing.assert_array_equal(grads[0], [2.0, 4.0])
    np.testing.assert_array_equal(grads[1], np.zeros((1, 2)))


def test_shared_weight_gradients_add_up():
    w = param([2.0])
    tape = Tape()
    loss = tape.sum(tape.hadamard(w, w))
    (grad,) = backward(tape, loss, [w])
    np.testing.assert_allclose(grad, [4.0])


def test_backward_needs_scalar():
    x = param([1.0, 2.0])
    tape = Tape()
    with pytest.raises(ContractError):
        backward(tape, tape.tanh(x), [x])


def test_zero_weight_rows_have_no_gradient():
    pred = param([[1.0, 2.0], [3.0, 4.0]])
    tape = Tape()
    loss = tape.mean_abs_error(pred, np.zeros((2, 2)), np.array([1.0, 0.0]))
    assert loss.data[0] == 1.5
    (grad,) = backward(tape, loss, [pred])
    np.testing.assert_array_equal(grad, [[0.5, 0.5], [0.0, 0.0]])


def test_finite_difference_quadratic():
    w = param([3.0])
    tape = Tape()
    (grad,) = backward(tape, tape.sum_squares(w), [w])
    assert grad[0] == 6.0
    assert finite_difference_check(lambda t: t.sum_squares(w), [w]) < 1e-8
    assert w.data[0] == 3.0


def test_finite_difference_linear():
    w = param(np.arange(6.0).reshape(2, 3) / 7.0)
    x = Tensor([0.3, -1.2, 2.0])
    assert finite_difference_check(lambda t: t.sum(t.affine(w, x)), [w]) < 1e-9


def test_finite_difference_batched_ops():
    rng = np.random.default_rng(4)
    w, b = param(rng.normal(size=(3, 4))), param(rng.normal(size=3))
    x = Tensor(rng.normal(size=(5, 4)))

    def loss(t):
        h = t.tanh(t.affine(w, x, b))
        gate = t.sigmoid(t.slice(t.concat([h, h]), 1, 4))
        return t.sum_squares(t.sub(t.one_minus(gate), t.mask(h, 0.5)))

    assert finite_difference_check(loss, [w, b]) < 1e-6


def test_finite_difference_detects_nondeterminism():
    w = param([1.0])
    calls = []

    def unstable(t):
        calls.append(None)
        return t.scale(t.sum(w), float(len(calls)))

    with pytest.raises(DeterminismError):
        finite_difference_check(unstable, [w])


def test_finite_difference_eps_range():
    w = param([1.0])
    with pytest.raises(ContractError):
        finite_difference_check(lambda t: t.sum(w), [w], eps=1e-2)
