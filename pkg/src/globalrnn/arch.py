__all__ = [
    "Network",
    "SeriesBatch",
    "ForwardResult",
    "make_batch",
    "stacked_forward",
    "s2s_decoder_forward",
    "s2sd_forward",
    "forward",
    "regularized_loss",
    "minibatch_loss",
    "inject_input_noise",
]

import logging

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from globalrnn.cells import CellParams, CellState, cell_step, param_count
from globalrnn.exceptions import ContractError, ShapeError
from globalrnn.gradcore import Tape, Tensor
from globalrnn.types import ArchitectureKind, CellKind, NormalizationRecord, WindowSet


logger = logging.getLogger(__name__)


@dataclass(eq=False)
class Network:
    """Global weights of one architecture

    Projection: `horizon × d` with bias for the stacked model, `1 × d` with
    bias per decoder step for the decoder model, `horizon × d` without bias
    for the dense models.
    """

    architecture: ArchitectureKind
    cell: CellKind
    m: int
    d: int
    layers: int
    horizon: int
    encoder: List[CellParams]
    decoder: List[CellParams]
    projection_w: Tensor
    projection_b: Optional[Tensor] = None

    @classmethod
    def initialize(
        cls,
        architecture: ArchitectureKind,
        cell: CellKind,
        m: int,
        d: int,
        layers: int,
        horizon: int,
        init_sigma: float = 0.0,
        rng: Optional[np.random.Generator] = None,
    ) -> "Network":
        architecture, cell = ArchitectureKind(architecture), CellKind(cell)
        if not architecture.moving_window and m != 1:
            raise ContractError(f"{architecture.value} takes scalar steps, got m={m}")
        encoder = [
            CellParams.initialize(cell, m if layer == 0 else d, d, init_sigma, rng, f"encoder/{layer}/")
            for layer in range(layers)
        ]
        decoder = []
        if architecture is ArchitectureKind.S2S_DECODER_NMW:
            decoder = [
                CellParams.initialize(cell, 1 if layer == 0 else d, d, init_sigma, rng, f"decoder/{layer}/")
                for layer in range(layers)
            ]
        rows = 1 if architecture is ArchitectureKind.S2S_DECODER_NMW else horizon
        weights = np.zeros((rows, d)) if rng is None else rng.normal(0.0, init_sigma, size=(rows, d))
        projection_b = None
        if architecture in (ArchitectureKind.STACKED_MW, ArchitectureKind.S2S_DECODER_NMW):
            projection_b = Tensor(np.zeros(rows), requires_grad=True, name="projection/b")
        return cls(
            architecture=architecture,
            cell=cell,
            m=m,
            d=d,
            layers=layers,
            horizon=horizon,
            encoder=encoder,
            decoder=decoder,
            projection_w=Tensor(weights, requires_grad=True, name="projection/W"),
            projection_b=projection_b,
        )

    def named_parameters(self) -> Dict[str, Tensor]:
        named = {}
        for part in (*self.encoder, *self.decoder):
            for tensor in part:
                named[tensor.name] = tensor
        named["projection/W"] = self.projection_w
        if self.projection_b is not None:
            named["projection/b"] = self.projection_b
        return named

    def parameters(self) -> List[Tensor]:
        return list(self.named_parameters().values())

    @property
    def param_count(self) -> int:
        return sum(p.size for p in self.parameters())

    @property
    def recurrent_param_count(self) -> int:
        decoders = 0
        if self.decoder:
            decoders = param_count(self.cell, 1, self.d, self.layers)
        return param_count(self.cell, self.m, self.d, self.layers) + decoders

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters().items()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        named = self.named_parameters()
        if set(state) != set(named):
            raise ContractError(
                f"checkpoint tensors {sorted(set(state) ^ set(named))} do not match the network"
            )
        for name, tensor in named.items():
            if state[name].shape != tensor.shape:
                raise ShapeError(f"'{name}': checkpoint {state[name].shape} vs network {tensor.shape}")
            tensor.data[...] = state[name]


@dataclass(eq=False)
class SeriesBatch:
    """Window sets of several series laid out step by step, left aligned

    Moving window: `inputs (T, B, m)`, `targets (T, B, n)`, `weights (T, B)`.
    Sequences: `inputs (T, B, 1)`, `targets (B, n)`, `weights (B,)`.
    Padding steps carry zeros and weight 0; `last[i]` is the final real step
    of series `i`.
    """

    ids: List[str]
    inputs: np.ndarray
    targets: np.ndarray
    weights: np.ndarray
    last: np.ndarray
    records: List[Optional[NormalizationRecord]]
    moving_window: bool

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def steps(self) -> int:
        return self.inputs.shape[0]

    def final_targets(self) -> Tuple[np.ndarray, np.ndarray]:
        """Target and weight of the last step of every series"""
        if not self.moving_window:
            return self.targets, self.weights
        rows = np.arange(len(self))
        return self.targets[self.last, rows], self.weights[self.last, rows]


def make_batch(window_sets: Sequence[WindowSet]) -> SeriesBatch:
    if not window_sets:
        raise ContractError("cannot batch an empty list of window sets")
    moving = {ws.moving_window for ws in window_sets}
    widths = {(ws.m, ws.n) for ws in window_sets}
    if len(moving) != 1 or len(widths) != 1:
        raise ContractError("window sets of one batch must share layout, m and n")
    moving_window = moving.pop()
    m, n = widths.pop()
    batch = len(window_sets)
    if moving_window:
        steps = max(len(ws) for ws in window_sets)
        inputs = np.zeros((steps, batch, m))
        targets = np.zeros((steps, batch, n))
        weights = np.zeros((steps, batch))
        for i, ws in enumerate(window_sets):
            for t, block in enumerate(ws.blocks):
                inputs[t, i] = block.input
                if block.target is not None:
                    targets[t, i] = block.target
                    weights[t, i] = 1.0
        last = np.array([len(ws) - 1 for ws in window_sets])
    else:
        steps = max(ws.blocks[0].input.size for ws in window_sets)
        inputs = np.zeros((steps, batch, 1))
        targets = np.zeros((batch, n))
        weights = np.zeros(batch)
        for i, ws in enumerate(window_sets):
            block = ws.blocks[0]
            inputs[: block.input.size, i, 0] = block.input
            if block.target is not None:
                targets[i] = block.target
                weights[i] = 1.0
        last = np.array([ws.blocks[0].input.size - 1 for ws in window_sets])
    return SeriesBatch(
        ids=[ws.series_id for ws in window_sets],
        inputs=inputs,
        targets=targets,
        weights=weights,
        last=last,
        records=[ws.last.record for ws in window_sets],
        moving_window=moving_window,
    )


@dataclass(eq=False)
class ForwardResult:
    forecast: np.ndarray
    error: Tensor


def inject_input_noise(
    inputs: np.ndarray, sigma: float, rng: Optional[np.random.Generator]
) -> np.ndarray:
    """Add i.i.d. Normal(0, sigma²) to every input element"""
    if sigma < 0:
        raise ContractError(f"noise sigma must be >= 0, got {sigma}")
    if sigma == 0 or rng is None:
        return inputs
    return inputs + rng.normal(0.0, sigma, size=inputs.shape)


def _check_layout(net: Network, batch: SeriesBatch) -> None:
    if batch.moving_window != net.architecture.moving_window:
        raise ContractError(
            f"{net.architecture.value} cannot consume "
            f"{'moving window' if batch.moving_window else 'sequence'} windows"
        )
    if batch.inputs.shape[-1] != net.m:
        raise ShapeError(f"network input width {net.m}, windows have {batch.inputs.shape[-1]}")


def _zero_error() -> Tensor:
    return Tensor(np.zeros(1))


def _accumulate(tape: Tape, total: Optional[Tensor], term: Tensor) -> Tensor:
    return term if total is None else tape.add(total, term)


def _step_layers(
    tape: Tape, layers: List[CellParams], states: List[CellState], x: Tensor
) -> Tuple[List[CellState], Tensor]:
    new_states = []
    for params, state in zip(layers, states):
        state, x = cell_step(tape, params, state, x)
        new_states.append(state)
    return new_states, x


def _encode(
    tape: Tape, net: Network, batch: SeriesBatch, inputs: np.ndarray
) -> Tuple[List[CellState], Tensor]:
    """Run the encoder over every step; returns per-layer states and top output at each series' last step"""
    size = len(batch)
    states = [CellState.zeros(net.cell, net.d, size) for _ in net.encoder]
    final_states: List[Optional[CellState]] = [None] * len(net.encoder)
    final_top: Optional[Tensor] = None
    ends = set(batch.last.tolist())
    for t in range(batch.steps):
        states, top = _step_layers(tape, net.encoder, states, Tensor(inputs[t]))
        if t not in ends:
            continue
        pick = (batch.last == t).astype(np.float64)[:, None]
        final_top = _accumulate(tape, final_top, tape.mask(top, pick))
        for layer, state in enumerate(states):
            kept = final_states[layer]
            h = _accumulate(tape, None if kept is None else kept.h, tape.mask(state.h, pick))
            c = None
            if state.c is not None:
                c = _accumulate(tape, None if kept is None else kept.c, tape.mask(state.c, pick))
            final_states[layer] = CellState(h=h, c=c)
    return final_states, final_top


def stacked_forward(
    tape: Tape, net: Network, batch: SeriesBatch, inputs: Optional[np.ndarray] = None
) -> ForwardResult:
    """Projection of every step; the error sums the per-step mean absolute errors

    State runs through the blocks of a series and starts from zero for each
    series. The forecast is the projection of each series' last step.
    """
    _check_layout(net, batch)
    inputs = batch.inputs if inputs is None else inputs
    size = len(batch)
    states = [CellState.zeros(net.cell, net.d, size) for _ in net.encoder]
    forecast = np.zeros((size, net.horizon))
    error: Optional[Tensor] = None
    ends = set(batch.last.tolist())
    for t in range(batch.steps):
        states, top = _step_layers(tape, net.encoder, states, Tensor(inputs[t]))
        scored = batch.weights[t].any()
        if not scored and t not in ends:
            continue
        pred = tape.affine(net.projection_w, top, net.projection_b)
        if scored:
            error = _accumulate(
                tape, error, tape.mean_abs_error(pred, batch.targets[t], batch.weights[t])
            )
        rows = batch.last == t
        forecast[rows] = pred.data[rows]
    return ForwardResult(forecast=forecast, error=error or _zero_error())


def s2s_decoder_forward(
    tape: Tape,
    net: Network,
    batch: SeriesBatch,
    mode: str = "train",
    inputs: Optional[np.ndarray] = None,
) -> ForwardResult:
    """Encoder over scalar steps, then `horizon` decoder steps from the context state

    `train` feeds the true previous target to each decoder step, `test` feeds
    the previous prediction. The first decoder input is the last encoder input.
    """
    _check_layout(net, batch)
    if mode not in ("train", "test"):
        raise ContractError(f"unknown decoder mode '{mode}'")
    if mode == "test" and tape.enabled:
        raise ContractError("autoregressive decoding is not available while recording gradients")
    inputs = batch.inputs if inputs is None else inputs
    states, _ = _encode(tape, net, batch, inputs)
    rows = np.arange(len(batch))
    x = Tensor(inputs[batch.last, rows])
    preds = []
    for k in range(net.horizon):
        if k > 0:
            x = Tensor(batch.targets[:, k - 1 : k]) if mode == "train" else preds[-1]
        states, top = _step_layers(tape, net.decoder, states, x)
        preds.append(tape.affine(net.projection_w, top, net.projection_b))
    joined = tape.concat(preds) if len(preds) > 1 else preds[0]
    error = _zero_error()
    if batch.weights.any():
        error = tape.mean_abs_error(joined, batch.targets, batch.weights)
    return ForwardResult(forecast=joined.data.copy(), error=error)


def s2sd_forward(
    tape: Tape, net: Network, batch: SeriesBatch, inputs: Optional[np.ndarray] = None
) -> ForwardResult:
    """Bias-free dense map of the last encoder state to the whole horizon

    Works on scalar steps or moving windows; only the last step is scored.
    """
    _check_layout(net, batch)
    inputs = batch.inputs if inputs is None else inputs
    _, top = _encode(tape, net, batch, inputs)
    pred = tape.affine(net.projection_w, top)
    targets, weights = batch.final_targets()
    error = _zero_error()
    if weights.any():
        error = tape.mean_abs_error(pred, targets, weights)
    return ForwardResult(forecast=pred.data.copy(), error=error)


def forward(
    tape: Tape,
    net: Network,
    batch: SeriesBatch,
    noise_sigma: float = 0.0,
    rng: Optional[np.random.Generator] = None,
    training: Optional[bool] = None,
) -> ForwardResult:
    """Dispatch on the architecture

    `training` defaults to whether `tape` records. Training passes get input
    noise and teacher forcing; other passes run the decoder autoregressively.
    """
    training = tape.enabled if training is None else training
    inputs = batch.inputs
    if training:
        inputs = inject_input_noise(inputs, noise_sigma, rng)
    kind = net.architecture
    if kind is ArchitectureKind.STACKED_MW:
        return stacked_forward(tape, net, batch, inputs)
    if kind is ArchitectureKind.S2S_DECODER_NMW:
        return s2s_decoder_forward(tape, net, batch, "train" if training else "test", inputs)
    return s2sd_forward(tape, net, batch, inputs)


def regularized_loss(tape: Tape, error: Tensor, params: Sequence[Tensor], psi: float) -> Tensor:
    """L = E + psi · Σ w², biases included"""
    if psi < 0:
        raise ContractError(f"l2 psi must be >= 0, got {psi}")
    if psi == 0 or not params:
        return error
    penalty = tape.sum_squares(params[0])
    for param in params[1:]:
        penalty = tape.add(penalty, tape.sum_squares(param))
    return tape.add(error, tape.scale(penalty, psi))


def minibatch_loss(tape: Tape, result: ForwardResult, net: Network, psi: float, size: int) -> Tensor:
    """Mean over the series of the batch of their regularized losses"""
    return regularized_loss(tape, tape.scale(result.error, 1.0 / size), net.parameters(), psi)
