import numpy as np
import pytest

from globalrnn.exceptions import ContractError, NumericError
from globalrnn.gradcore import Tensor
from globalrnn.optim import Adagrad, Adam, Cocob, make_optimizer
from globalrnn.types import Hyperparameters, OptimizerKind


def param(values):
    return Tensor(np.asarray(values, dtype=float), requires_grad=True)


def test_adam_zero_gradient():
    w = param([1.0, -2.0])
    optimizer = Adam([w], 0.1)
    for _ in range(5):
        optimizer.step([np.zeros(2)])
    np.testing.assert_array_equal(w.data, [1.0, -2.0])


def test_adam_first_step():
    w = param([0.0])
    Adam([w], 0.1).step([np.ones(1)])
    np.testing.assert_allclose(w.data, [-0.1], rtol=1e-6)


def test_adam_reaches_minimum():
    w = param([5.0])
    optimizer = Adam([w], 0.05)
    closest = abs(w.data[0])
    for _ in range(10000):
        optimizer.step([2.0 * w.data.copy()])
        closest = min(closest, abs(w.data[0]))
        if closest < 1e-3:
            break
    assert closest < 1e-3


def test_adagrad():
    w = param([1.0])
    optimizer = Adagrad([w], 0.5, eps=0.0)
    optimizer.step([np.array([2.0])])
    np.testing.assert_allclose(w.data, [0.5])
    still = param([3.0])
    Adagrad([still], 0.5).step([np.zeros(1)])
    assert still.data[0] == 3.0


def test_adagrad_steps_shrink():
    w = param([0.0])
    optimizer = Adagrad([w], 0.5)
    previous, sizes = 0.0, []
    for _ in range(10):
        optimizer.step([np.ones(1)])
        sizes.append(abs(w.data[0] - previous))
        previous = w.data[0]
    assert all(b < a for a, b in zip(sizes, sizes[1:]))


def test_cocob_zero_gradient():
    w = param([0.7, -0.3])
    optimizer = Cocob([w])
    for _ in range(10):
        optimizer.step([np.zeros(2)])
    np.testing.assert_array_equal(w.data, [0.7, -0.3])


def test_cocob_grows_steps_along_one_direction():
    w = param([0.0])
    optimizer = Cocob([w])
    previous, sizes = 0.0, []
    for _ in range(30):
        optimizer.step([np.ones(1)])
        sizes.append(abs(w.data[0] - previous))
        previous = w.data[0]
    assert w.data[0] < 0
    assert all(b >= a for a, b in zip(sizes, sizes[1:]))


def test_cocob_reaches_minimum():
    w = param([0.0])
    optimizer = Cocob([w])
    closest = 3.0
    for _ in range(10000):
        # subgradient of |w - 3|
        optimizer.step([np.sign(w.data - 3.0)])
        closest = min(closest, abs(w.data[0] - 3.0))
        if closest < 0.01:
            break
    assert closest < 0.01


def test_cocob_reward_stays_non_negative():
    rng = np.random.default_rng(6)
    w = param(rng.normal(size=5))
    optimizer = Cocob([w])
    for g in rng.normal(scale=3.0, size=(20000, 5)):
        optimizer.step([g])
        assert (optimizer.state["R"][0] >= 0).all()
    assert np.isfinite(w.data).all()


@pytest.mark.parametrize("kind, hyper", [("adam", {"lr": 0.01}), ("adagrad", {"lr": 0.1}), ("cocob", {})])
def test_convex_quadratic(kind, hyper):
    rng = np.random.default_rng(9)
    q, _ = np.linalg.qr(rng.normal(size=(10, 10)))
    curvature = q @ np.diag(rng.uniform(0.5, 2.0, size=10)) @ q.T
    optimum = rng.normal(size=10)

    def loss(x):
        return 0.5 * (x - optimum) @ curvature @ (x - optimum)

    w = param(np.zeros(10))
    optimizer = make_optimizer(kind, [w], hyper)
    start = loss(w.data)
    low, near = False, kind != "cocob"
    for _ in range(100000):
        optimizer.step([curvature @ (w.data - optimum)])
        low = low or loss(w.data) < 1e-4 * start
        near = near or np.abs(w.data - optimum).max() < 0.01
        if low and near:
            break
    assert low
    assert near


def test_non_finite_gradient():
    w = param([1.0])
    with pytest.raises(NumericError, match="non-finite"):
        Cocob([w]).step([np.array([np.nan])])


def test_make_optimizer():
    params = [param([0.0])]
    assert isinstance(make_optimizer("cocob", params, {}), Cocob)
    assert isinstance(make_optimizer(OptimizerKind.ADAM, params, {"lr": 0.01}), Adam)
    assert isinstance(
        make_optimizer("adagrad", params, Hyperparameters(learning_rate=0.1)), Adagrad
    )
    with pytest.raises(ContractError, match="learning rate"):
        make_optimizer("adagrad", params, {})
    with pytest.raises(ContractError):
        make_optimizer("cocob", params, {"learning_rate": 0.01})
    with pytest.raises(ContractError):
        make_optimizer("adam", params, {"learning_rate": -1.0})


@pytest.mark.parametrize("kind, hyper", [("adam", {"lr": 0.01}), ("adagrad", {"lr": 0.1}), ("cocob", {})])
def test_state_round_trip(kind, hyper):
    rng = np.random.default_rng(0)
    grads = rng.normal(size=(6, 3))
    first = param(np.zeros(3))
    optimizer = make_optimizer(kind, [first], hyper)
    for g in grads[:3]:
        optimizer.step([g])
    second = param(first.data.copy())
    resumed = make_optimizer(kind, [second], hyper)
    resumed.load_state_dict(optimizer.state_dict())
    for g in grads[3:]:
        optimizer.step([g])
        resumed.step([g])
    np.testing.assert_array_equal(first.data, second.data)
