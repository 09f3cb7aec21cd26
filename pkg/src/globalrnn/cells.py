__all__ = [
    "CellParams",
    "CellState",
    "ernn_step",
    "lstm_peephole_step",
    "gru_step",
    "cell_step",
    "param_shapes",
    "param_count",
    "dim_from_param_budget",
]

import logging

from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Union

import numpy as np

from globalrnn.exceptions import ContractError, ShapeError, SizingError
from globalrnn.gradcore import Tape, Tensor
from globalrnn.types import CellKind


logger = logging.getLogger(__name__)

_GATES = {
    CellKind.ERNN: ("i",),
    CellKind.LSTM_PEEPHOLE: ("i", "f", "c", "o"),
    CellKind.GRU: ("u", "r", "h"),
}
_PEEPHOLES = ("P_i", "P_f", "P_o")


def param_shapes(kind: CellKind, m: int, d: int) -> Dict[str, Tuple[int, ...]]:
    """Name and shape of every tensor of one layer, in a fixed order"""
    kind = CellKind(kind)
    if m < 1 or d < 1:
        raise ContractError(f"cell sizes must be positive, got m={m}, d={d}")
    shapes = {}
    for gate in _GATES[kind]:
        shapes[f"W_{gate}"] = (d, d)
        shapes[f"V_{gate}"] = (d, m)
        shapes[f"b_{gate}"] = (d,)
    if kind is CellKind.ERNN:
        shapes["W_o"] = (d, d)
        shapes["b_o"] = (d,)
    elif kind is CellKind.LSTM_PEEPHOLE:
        for name in _PEEPHOLES:
            shapes[name] = (d,)
    return shapes


@dataclass(eq=False)
class CellParams:
    kind: CellKind
    m: int
    d: int
    tensors: Dict[str, Tensor]

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __iter__(self):
        return iter(self.tensors.values())

    @classmethod
    def initialize(
        cls,
        kind: CellKind,
        m: int,
        d: int,
        init_sigma: float,
        rng: Optional[np.random.Generator] = None,
        prefix: str = "",
    ) -> "CellParams":
        """Weights (peepholes included) from Normal(0, init_sigma²), biases 0; `rng=None` gives all zeros"""
        kind = CellKind(kind)
        tensors = {}
        for name, shape in param_shapes(kind, m, d).items():
            if name.startswith("b_") or rng is None:
                data = np.zeros(shape)
            else:
                data = rng.normal(0.0, init_sigma, size=shape)
            tensors[name] = Tensor(data, requires_grad=True, name=f"{prefix}{name}")
        return cls(kind=kind, m=m, d=d, tensors=tensors)


@dataclass(eq=False)
class CellState:
    h: Tensor
    c: Optional[Tensor] = None

    @classmethod
    def zeros(cls, kind: CellKind, d: int, batch: Optional[int] = None) -> "CellState":
        shape = (d,) if batch is None else (batch, d)
        c = Tensor(np.zeros(shape)) if kind is CellKind.LSTM_PEEPHOLE else None
        return cls(h=Tensor(np.zeros(shape)), c=c)


def _pre_activation(tape: Tape, p: CellParams, gate: str, h: Tensor, x: Tensor) -> Tensor:
    return tape.add(tape.affine(p[f"W_{gate}"], h, p[f"b_{gate}"]), tape.matvec(p[f"V_{gate}"], x))


def _check_input(p: CellParams, state: CellState, x: Tensor) -> None:
    if x.shape[-1] != p.m:
        raise ShapeError(f"{p.kind.value} cell expects input width {p.m}, got shape {x.shape}")
    if state.h.shape[-1] != p.d:
        raise ShapeError(f"{p.kind.value} cell expects state width {p.d}, got shape {state.h.shape}")


def ernn_step(tape: Tape, p: CellParams, state: CellState, x: Tensor) -> Tuple[CellState, Tensor]:
    """h' = σ(W_i·h + V_i·x + b_i); z = tanh(W_o·h' + b_o)"""
    _check_input(p, state, x)
    h = tape.sigmoid(_pre_activation(tape, p, "i", state.h, x))
    z = tape.tanh(tape.affine(p["W_o"], h, p["b_o"]))
    return CellState(h=h), z


def lstm_peephole_step(
    tape: Tape, p: CellParams, state: CellState, x: Tensor
) -> Tuple[CellState, Tensor]:
    """LSTM whose input, forget and output gates also read the cell state

    The peepholes are per-unit vectors; all zero they reduce to the plain LSTM.
    """
    _check_input(p, state, x)
    h, c = state.h, state.c
    i = tape.sigmoid(tape.add(_pre_activation(tape, p, "i", h, x), tape.hadamard(p["P_i"], c)))
    f = tape.sigmoid(tape.add(_pre_activation(tape, p, "f", h, x), tape.hadamard(p["P_f"], c)))
    candidate = tape.tanh(_pre_activation(tape, p, "c", h, x))
    c_new = tape.add(tape.hadamard(i, candidate), tape.hadamard(f, c))
    o = tape.sigmoid(tape.add(_pre_activation(tape, p, "o", h, x), tape.hadamard(p["P_o"], c_new)))
    h_new = tape.hadamard(o, tape.tanh(c_new))
    return CellState(h=h_new, c=c_new), h_new


def gru_step(tape: Tape, p: CellParams, state: CellState, x: Tensor) -> Tuple[CellState, Tensor]:
    _check_input(p, state, x)
    h = state.h
    u = tape.sigmoid(_pre_activation(tape, p, "u", h, x))
    r = tape.sigmoid(_pre_activation(tape, p, "r", h, x))
    candidate = tape.tanh(
        tape.add(
            tape.affine(p["W_h"], tape.hadamard(r, h), p["b_h"]),
            tape.matvec(p["V_h"], x),
        )
    )
    h_new = tape.add(tape.hadamard(u, candidate), tape.hadamard(tape.one_minus(u), h))
    return CellState(h=h_new), h_new


_STEPS = {
    CellKind.ERNN: ernn_step,
    CellKind.LSTM_PEEPHOLE: lstm_peephole_step,
    CellKind.GRU: gru_step,
}


def cell_step(tape: Tape, p: CellParams, state: CellState, x: Tensor) -> Tuple[CellState, Tensor]:
    return _STEPS[p.kind](tape, p, state, x)


def _layer_count(kind: CellKind, m: int, d: int) -> int:
    core = d * (d + m + 1)
    if kind is CellKind.ERNN:
        return core + d * (d + 1)
    if kind is CellKind.LSTM_PEEPHOLE:
        return 4 * core + 3 * d
    return 3 * core


def param_count(kind: Union[str, CellKind], m: int, d: int, layers: int = 1) -> int:
    """Trainable parameters of the recurrent layers, projection excluded"""
    if layers < 1:
        raise ContractError(f"layers must be >= 1, got {layers}")
    kind = CellKind(kind)
    return _layer_count(kind, m, d) + (layers - 1) * _layer_count(kind, d, d)


def dim_from_param_budget(kind: Union[str, CellKind], m: int, layers: int, budget: int) -> int:
    """Largest cell dimension whose parameter count fits the budget"""
    kind = CellKind(kind)
    if param_count(kind, m, 1, layers) > budget:
        raise SizingError(
            f"budget {budget} is below the {param_count(kind, m, 1, layers)} parameters "
            f"of a single-unit {kind.value} with {layers} layer(s)"
        )
    low, high = 1, 2
    while param_count(kind, m, high, layers) <= budget:
        low, high = high, high * 2
    # invariant: count(low) <= budget < count(high)
    while high - low > 1:
        mid = (low + high) // 2
        if param_count(kind, m, mid, layers) <= budget:
            low = mid
        else:
            high = mid
    return low
