__all__ = ["Optimizer", "Adam", "Adagrad", "Cocob", "make_optimizer"]

import logging

from abc import ABC, abstractmethod
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np

from globalrnn.constants import (
    ADAGRAD_EPS,
    ADAM_BETA1,
    ADAM_BETA2,
    ADAM_EPS,
    COCOB_ALPHA,
    COCOB_L_INIT,
    LEARNING_RATE_RANGES,
)
from globalrnn.exceptions import ContractError, NumericError, ShapeError
from globalrnn.gradcore import Tensor
from globalrnn.types import Hyperparameters, OptimizerKind


logger = logging.getLogger(__name__)


class Optimizer(ABC):
    """Per-parameter state aligned with a fixed list of tensors

    `step` updates the tensors in place.
    """

    kind: OptimizerKind
    slots: Sequence[str] = ()

    def __init__(self, params: Sequence[Tensor]) -> None:
        self.params = list(params)
        self.state: Dict[str, List[np.ndarray]] = {
            slot: [np.zeros(p.shape) for p in self.params] for slot in self.slots
        }

    def step(self, grads: Sequence[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise ShapeError(f"{len(grads)} gradients for {len(self.params)} parameters")
        for param, grad in zip(self.params, grads):
            if grad.shape != param.shape:
                raise ShapeError(f"'{param.name}': gradient {grad.shape} vs parameter {param.shape}")
            if not np.isfinite(grad).all():
                raise NumericError(f"non-finite gradient for '{param.name}'")
        self._advance()
        for index, (param, grad) in enumerate(zip(self.params, grads)):
            updated = self._update(index, param.data, grad)
            if not np.isfinite(updated).all():
                raise NumericError(f"{self.kind.value} step made '{param.name}' non-finite")
            param.data[...] = updated

    def _advance(self) -> None:
        pass

    @abstractmethod
    def _update(self, index: int, value: np.ndarray, grad: np.ndarray) -> np.ndarray:
        ...

    def state_dict(self) -> Dict[str, np.ndarray]:
        state = {
            f"{slot}/{i:04d}": array.copy()
            for slot, arrays in self.state.items()
            for i, array in enumerate(arrays)
        }
        state.update({k: np.asarray(v) for k, v in self._scalars().items()})
        return state

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        for slot, arrays in self.state.items():
            for i, array in enumerate(arrays):
                key = f"{slot}/{i:04d}"
                if key not in state:
                    raise ContractError(f"optimizer checkpoint lacks '{key}'")
                if state[key].shape != array.shape:
                    raise ShapeError(f"'{key}': checkpoint {state[key].shape} vs state {array.shape}")
                array[...] = state[key]
        self._load_scalars(state)

    def _scalars(self) -> Dict[str, Any]:
        return {}

    def _load_scalars(self, state: Mapping[str, np.ndarray]) -> None:
        pass


class Adam(Optimizer):
    kind = OptimizerKind.ADAM
    slots = ("m", "v")

    def __init__(
        self,
        params: Sequence[Tensor],
        learning_rate: float,
        beta1: float = ADAM_BETA1,
        beta2: float = ADAM_BETA2,
        eps: float = ADAM_EPS,
    ) -> None:
        super().__init__(params)
        self.learning_rate = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0

    def _advance(self) -> None:
        self.t += 1

    def _update(self, index: int, value: np.ndarray, grad: np.ndarray) -> np.ndarray:
        m, v = self.state["m"][index], self.state["v"][index]
        m[...] = self.beta1 * m + (1.0 - self.beta1) * grad
        v[...] = self.beta2 * v + (1.0 - self.beta2) * grad * grad
        m_hat = m / (1.0 - self.beta1 ** self.t)
        v_hat = v / (1.0 - self.beta2 ** self.t)
        return value - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)

    def _scalars(self) -> Dict[str, Any]:
        return {"t": self.t}

    def _load_scalars(self, state: Mapping[str, np.ndarray]) -> None:
        self.t = int(state["t"])


class Adagrad(Optimizer):
    kind = OptimizerKind.ADAGRAD
    slots = ("G",)

    def __init__(self, params: Sequence[Tensor], learning_rate: float, eps: float = ADAGRAD_EPS) -> None:
        super().__init__(params)
        self.learning_rate = learning_rate
        self.eps = eps

    def _update(self, index: int, value: np.ndarray, grad: np.ndarray) -> np.ndarray:
        accumulator = self.state["G"][index]
        accumulator += grad * grad
        return value - self.learning_rate * grad / (np.sqrt(accumulator) + self.eps)


class Cocob(Optimizer):
    """COCOB-Backprop coin betting, no learning rate

    Per coordinate: L tracks the largest |g|, G_sum the sum of |g|, R the
    non-negative reward and theta the sum of negative gradients; the new value
    bets a fraction of the wealth L + R away from the initial point.
    """

    kind = OptimizerKind.COCOB
    slots = ("L", "G_sum", "R", "theta", "w_init")

    def __init__(self, params: Sequence[Tensor], alpha: float = COCOB_ALPHA) -> None:
        super().__init__(params)
        self.alpha = alpha
        for i, param in enumerate(self.params):
            self.state["L"][i][...] = COCOB_L_INIT
            self.state["w_init"][i][...] = param.data

    def _update(self, index: int, value: np.ndarray, grad: np.ndarray) -> np.ndarray:
        s = {slot: self.state[slot][index] for slot in self.slots}
        s["L"][...] = np.maximum(s["L"], np.abs(grad))
        s["G_sum"] += np.abs(grad)
        s["R"][...] = np.maximum(s["R"] + (value - s["w_init"]) * (-grad), 0.0)
        s["theta"] -= grad
        bet = s["theta"] / (s["L"] * np.maximum(s["G_sum"] + s["L"], self.alpha * s["L"]))
        return s["w_init"] + bet * (s["L"] + s["R"])


def _learning_rate(hyperparameters: Union[Hyperparameters, Mapping[str, Any], None]) -> Optional[float]:
    if hyperparameters is None:
        return None
    if isinstance(hyperparameters, Hyperparameters):
        return hyperparameters.learning_rate
    return hyperparameters.get("learning_rate", hyperparameters.get("lr"))


def make_optimizer(
    kind: Union[str, OptimizerKind],
    params: Sequence[Tensor],
    hyperparameters: Union[Hyperparameters, Mapping[str, Any], None] = None,
) -> Optimizer:
    """Fresh optimizer state for `params`

    Raises:
    ------
        `ContractError`: COCOB given a learning rate, or Adam / Adagrad without a positive one.
    """
    kind = OptimizerKind(kind)
    learning_rate = _learning_rate(hyperparameters)
    if kind is OptimizerKind.COCOB:
        if learning_rate is not None:
            raise ContractError("cocob takes no learning rate")
        return Cocob(params)
    if learning_rate is None:
        low, high = LEARNING_RATE_RANGES[kind.value]
        raise ContractError(f"{kind.value} needs a learning rate (usual range {low} - {high})")
    if not learning_rate > 0:
        raise ContractError(f"learning rate must be positive, got {learning_rate}")
    if kind is OptimizerKind.ADAM:
        return Adam(params, learning_rate)
    return Adagrad(params, learning_rate)
