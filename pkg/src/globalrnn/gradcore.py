__all__ = ["Tensor", "Tape", "backward", "finite_difference_check"]

import logging

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from scipy.special import expit

from globalrnn.exceptions import ContractError, DeterminismError, NumericError, ShapeError


logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, float, Sequence[float]]
Vjp = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


@dataclass(eq=False)
class Tensor:
    """Dense float64 array of shape `(len,)` or `(rows, cols)`

    Activations of a minibatch are held as `(batch, width)` rows.
    """

    data: np.ndarray
    requires_grad: bool = False
    name: str = ""

    def __post_init__(self) -> None:
        self.data = np.ascontiguousarray(np.asarray(self.data, dtype=np.float64))
        if self.data.ndim not in (1, 2):
            raise ShapeError(f"tensor '{self.name}' must be 1-D or 2-D, got shape {self.data.shape}")

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    def __repr__(self) -> str:
        return f"Tensor(name={self.name!r}, shape={self.shape}, requires_grad={self.requires_grad})"


@dataclass(eq=False)
class _Node:
    out: Tensor
    inputs: Tuple[Tensor, ...]
    vjp: Vjp


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back to `shape`"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tape:
    """Ordered record of primitive operations for reverse mode gradients

    Nothing is recorded when the tape is disabled or when no input needs a
    gradient. Every output is checked for NaN / Inf.
    """

    def __init__(self, enabled: bool = True) -> None:
        self.enabled = enabled
        self.nodes: List[_Node] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def _emit(self, data: np.ndarray, op: str, inputs: Tuple[Tensor, ...], vjp: Vjp) -> Tensor:
        if not np.isfinite(data).all():
            names = ", ".join(t.name or str(t.shape) for t in inputs)
            raise NumericError(f"non-finite value produced by {op}({names})")
        needs_grad = self.enabled and any(t.requires_grad for t in inputs)
        out = Tensor(data, requires_grad=needs_grad, name=op)
        if needs_grad:
            self.nodes.append(_Node(out=out, inputs=inputs, vjp=vjp))
        return out

    @staticmethod
    def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
        try:
            np.broadcast_shapes(a.shape, b.shape)
        except ValueError:
            raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not match") from None

    # Linear maps

    def affine(self, w: Tensor, x: Tensor, b: Optional[Tensor] = None) -> Tensor:
        """`W·x + b` for a vector `x` or row-wise `x·Wᵀ + b` for a batch"""
        if w.data.ndim != 2 or x.shape[-1] != w.shape[1]:
            raise ShapeError(f"affine: weight {w.shape} cannot multiply input {x.shape}")
        if b is not None and b.shape != (w.shape[0],):
            raise ShapeError(f"affine: bias {b.shape} does not match weight {w.shape}")
        data = x.data @ w.data.T
        if b is not None:
            data = data + b.data
        inputs = (w, x) if b is None else (w, x, b)

        def vjp(g: np.ndarray):
            gw = np.outer(g, x.data) if g.ndim == 1 else g.T @ x.data
            gx = g @ w.data
            if b is None:
                return gw, gx
            return gw, gx, g if g.ndim == 1 else g.sum(axis=0)

        return self._emit(data, "affine", inputs, vjp)

    def matvec(self, w: Tensor, x: Tensor) -> Tensor:
        return self.affine(w, x)

    # Elementwise

    def sigmoid(self, x: Tensor) -> Tensor:
        y = expit(x.data)
        return self._emit(y, "sigmoid", (x,), lambda g: (g * y * (1.0 - y),))

    def tanh(self, x: Tensor) -> Tensor:
        y = np.tanh(x.data)
        return self._emit(y, "tanh", (x,), lambda g: (g * (1.0 - y * y),))

    def hadamard(self, a: Tensor, b: Tensor) -> Tensor:
        self._same_shape("hadamard", a, b)
        return self._emit(
            a.data * b.data,
            "hadamard",
            (a, b),
            lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
        )

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        self._same_shape("add", a, b)
        return self._emit(
            a.data + b.data,
            "add",
            (a, b),
            lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
        )

    def sub(self, a: Tensor, b: Tensor) -> Tensor:
        self._same_shape("sub", a, b)
        return self._emit(
            a.data - b.data,
            "sub",
            (a, b),
            lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
        )

    def scale(self, a: Tensor, factor: float) -> Tensor:
        return self._emit(a.data * factor, "scale", (a,), lambda g: (g * factor,))

    def mask(self, a: Tensor, weights: np.ndarray) -> Tensor:
        """Multiply by a constant array (broadcast against `a`)"""
        weights = np.asarray(weights, dtype=np.float64)
        try:
            data = a.data * weights
        except ValueError:
            raise ShapeError(f"mask: shapes {a.shape} and {weights.shape} do not match") from None
        return self._emit(data, "mask", (a,), lambda g: (_unbroadcast(g * weights, a.shape),))

    def one_minus(self, a: Tensor) -> Tensor:
        return self._emit(1.0 - a.data, "one_minus", (a,), lambda g: (-g,))

    # Structure

    def concat(self, tensors: Sequence[Tensor]) -> Tensor:
        """Join along the last axis"""
        leading = {t.shape[:-1] for t in tensors}
        if len(leading) != 1:
            raise ShapeError(f"concat: incompatible shapes {[t.shape for t in tensors]}")
        widths = np.cumsum([t.shape[-1] for t in tensors])[:-1]
        data = np.concatenate([t.data for t in tensors], axis=-1)
        return self._emit(
            data,
            "concat",
            tuple(tensors),
            lambda g: tuple(np.split(g, widths, axis=-1)),
        )

    def slice(self, a: Tensor, start: int, stop: int) -> Tensor:
        """Columns `start:stop` of the last axis"""
        if not 0 <= start < stop <= a.shape[-1]:
            raise ShapeError(f"slice [{start}:{stop}] outside shape {a.shape}")

        def vjp(g: np.ndarray):
            full = np.zeros(a.shape)
            full[..., start:stop] = g
            return (full,)

        return self._emit(a.data[..., start:stop].copy(), "slice", (a,), vjp)

    # Reductions, all of shape (1,)

    def sum(self, a: Tensor) -> Tensor:
        return self._emit(
            np.array([a.data.sum()]), "sum", (a,), lambda g: (np.full(a.shape, g[0]),)
        )

    def sum_squares(self, a: Tensor) -> Tensor:
        return self._emit(
            np.array([np.square(a.data).sum()]),
            "sum_squares",
            (a,),
            lambda g: (2.0 * a.data * g[0],),
        )

    def mean_abs_error(
        self, pred: Tensor, target: ArrayLike, weights: Optional[np.ndarray] = None
    ) -> Tensor:
        """Mean absolute error of a vector, or weighted sum of per-row errors of a batch

        Rows with weight 0 contribute neither value nor gradient.
        """
        target = np.asarray(target, dtype=np.float64)
        if target.shape != pred.shape:
            raise ShapeError(f"mean_abs_error: prediction {pred.shape} vs target {target.shape}")
        diff = pred.data - target
        width = pred.shape[-1]
        if pred.data.ndim == 1:
            value = np.abs(diff).mean()
            scale = 1.0
        else:
            row_weights = (
                np.ones(pred.shape[0]) if weights is None else np.asarray(weights, dtype=np.float64)
            )
            value = (np.abs(diff).mean(axis=1) * row_weights).sum()
            scale = row_weights[:, None]
        return self._emit(
            np.array([value]),
            "mean_abs_error",
            (pred,),
            lambda g: (np.sign(diff) * scale * (g[0] / width),),
        )


def backward(tape: Tape, loss: Tensor, params: Sequence[Tensor]) -> List[np.ndarray]:
    """Reverse sweep of `tape` from a scalar `loss`

    Gradients of a tensor used several times (a weight shared over time steps)
    are summed. Parameters the loss does not depend on get zeros.

    Returns:
    -------
        `List[np.ndarray]`: One gradient per entry of `params`, same shapes.
    """
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    grads = {id(loss): np.ones(loss.shape)}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node.out), None)
        if g is None:
            continue
        for inp, grad in zip(node.inputs, node.vjp(g)):
            if grad is None or not inp.requires_grad:
                continue
            key = id(inp)
            if key in grads:
                grads[key] = grads[key] + grad
            else:
                grads[key] = np.array(grad, dtype=np.float64).reshape(inp.shape)
    return [grads.get(id(p), np.zeros(p.shape)) for p in params]


def finite_difference_check(
    f: Callable[[Tape], Tensor], params: Sequence[Tensor], eps: float = 1e-5
) -> float:
    """Compare `backward` against central differences

    Parameters:
    ----------
        - f (`Callable[[Tape], Tensor]`): Builds the scalar loss on the given tape from the current parameter values.
        - params (`Sequence[Tensor]`): Parameters perturbed in place, restored afterwards.
        - eps (`float`, optional): Step, within [1e-6, 1e-4]. (Defaults to `1e-5`)

    Raises:
    ------
        `DeterminismError`: `f` gives different values on repeated evaluation.

    Returns:
    -------
        `float`: max |analytic - numeric| / max(1, |numeric|) over all coordinates.
    """
    if not 1e-6 <= eps <= 1e-4:
        raise ContractError(f"eps must lie in [1e-6, 1e-4], got {eps}")

    def value() -> float:
        return float(f(Tape(enabled=False)).data[0])

    base = value()
    if value() != base:
        raise DeterminismError("loss changed between two identical evaluations")
    tape = Tape()
    analytic = backward(tape, f(tape), params)

    worst = 0.0
    for param, grad in zip(params, analytic):
        flat = param.data.reshape(-1)
        flat_grad = grad.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + eps
            upper = value()
            flat[i] = original - eps
            lower = value()
            flat[i] = original
            numeric = (upper - lower) / (2.0 * eps)
            worst = max(worst, abs(flat_grad[i] - numeric) / max(1.0, abs(numeric)))
    logger.debug("Gradient check over %d tensors: max rel err %.3e", len(params), worst)
    return worst
