__all__ = [
    "ArchitectureKind",
    "CellKind",
    "OptimizerKind",
    "WindowVariant",
    "Hyperparameters",
    "ModelConfig",
    "Range",
    "HyperparameterSpace",
    "TrialRecord",
    "TuneResult",
]

import json
import math

from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from globalrnn.constants import (
    HYPERPARAMETER_RANGES,
    LEARNING_RATE_RANGES,
    PARAM_BUDGET_RANGE,
)
from globalrnn.exceptions import ContractError, ManifestError
from globalrnn.types.windows import Pipeline


class ArchitectureKind(str, Enum):
    STACKED_MW = "stacked_mw"
    S2S_DECODER_NMW = "s2s_decoder_nmw"
    S2SD_DENSE_NMW = "s2sd_dense_nmw"
    S2SD_DENSE_MW = "s2sd_dense_mw"

    @property
    def moving_window(self) -> bool:
        return self in (ArchitectureKind.STACKED_MW, ArchitectureKind.S2SD_DENSE_MW)


class CellKind(str, Enum):
    ERNN = "ernn"
    LSTM_PEEPHOLE = "lstm_peephole"
    GRU = "gru"


class OptimizerKind(str, Enum):
    ADAM = "adam"
    ADAGRAD = "adagrad"
    COCOB = "cocob"


class WindowVariant(str, Enum):
    SMALL = "small"
    LARGE = "large"


@dataclass
class Hyperparameters:
    minibatch_size: int = 10
    epochs: int = 5
    epoch_size: int = 5
    learning_rate: Optional[float] = None
    noise_sigma: float = 0.0001
    l2_psi: float = 0.0001
    cell_dim: Optional[int] = 20
    param_budget: Optional[int] = None
    layers: int = 1
    init_sigma: float = 0.0001

    def __post_init__(self) -> None:
        if (self.cell_dim is None) == (self.param_budget is None):
            raise ContractError("exactly one of cell_dim / param_budget must be set")
        for name in ("minibatch_size", "epoch_size", "layers"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.epochs < 0:
            raise ContractError(f"epochs must be >= 0, got {self.epochs}")
        for name in ("noise_sigma", "l2_psi", "init_sigma"):
            if getattr(self, name) < 0:
                raise ContractError(f"{name} must be >= 0, got {getattr(self, name)}")


@dataclass
class ModelConfig:
    architecture: ArchitectureKind = ArchitectureKind.STACKED_MW
    cell: CellKind = CellKind.LSTM_PEEPHOLE
    optimizer: OptimizerKind = OptimizerKind.COCOB
    pipeline: Pipeline = Pipeline.STL
    input_window_variant: WindowVariant = WindowVariant.SMALL
    hyperparameters: Hyperparameters = field(default_factory=Hyperparameters)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "architecture": self.architecture.value,
            "cell": self.cell.value,
            "optimizer": self.optimizer.value,
            "pipeline": self.pipeline.value,
            "input_window_variant": self.input_window_variant.value,
            "hyperparameters": asdict(self.hyperparameters),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelConfig":
        try:
            return cls(
                architecture=ArchitectureKind(data["architecture"]),
                cell=CellKind(data["cell"]),
                optimizer=OptimizerKind(data["optimizer"]),
                pipeline=Pipeline(data.get("pipeline", Pipeline.STL.value)),
                input_window_variant=WindowVariant(
                    data.get("input_window_variant", WindowVariant.SMALL.value)
                ),
                hyperparameters=Hyperparameters(**data.get("hyperparameters", {})),
            )
        except (KeyError, ValueError, TypeError) as e:
            raise ManifestError(f"invalid model config: {e}") from e

    def with_hyperparameters(self, **changes: Any) -> "ModelConfig":
        return replace(self, hyperparameters=replace(self.hyperparameters, **changes))

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=4, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ModelConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ManifestError(f"'{path}' is not valid JSON: {e}") from e
        return cls.from_dict(data)


@dataclass(frozen=True)
class Range:
    low: float
    high: float
    integer: bool = False
    log: bool = False

    def __post_init__(self) -> None:
        if self.low > self.high:
            raise ContractError(f"range lower bound {self.low} above upper {self.high}")
        if self.log and self.low <= 0:
            raise ContractError("log-scaled range needs a positive lower bound")

    def __contains__(self, value: float) -> bool:
        if self.integer and float(value) != math.floor(float(value)):
            return False
        return self.low <= value <= self.high


_INTEGER_NAMES = ("minibatch_size", "epochs", "epoch_size", "cell_dim", "param_budget", "layers")


@dataclass
class HyperparameterSpace:
    """Closed interval per tunable hyperparameter

    `learning_rate` is absent for COCOB, and exactly one of `cell_dim` /
    `param_budget` is present.
    """

    minibatch_size: Range
    epochs: Range
    epoch_size: Range
    noise_sigma: Range
    l2_psi: Range
    layers: Range
    init_sigma: Range
    cell_dim: Optional[Range] = None
    param_budget: Optional[Range] = None
    learning_rate: Optional[Range] = None

    def __post_init__(self) -> None:
        if (self.cell_dim is None) == (self.param_budget is None):
            raise ContractError("space needs exactly one of cell_dim / param_budget")

    def items(self) -> Dict[str, Range]:
        return {
            f.name: getattr(self, f.name)
            for f in fields(self)
            if getattr(self, f.name) is not None
        }

    def contains(self, hyperparameters: Hyperparameters) -> bool:
        for name, bounds in self.items().items():
            value = getattr(hyperparameters, name)
            if value is None or value not in bounds:
                return False
        return True

    def for_optimizer(self, optimizer: OptimizerKind) -> "HyperparameterSpace":
        if optimizer is OptimizerKind.COCOB:
            return replace(self, learning_rate=None)
        if self.learning_rate is not None:
            return self
        low, high = LEARNING_RATE_RANGES[optimizer.value]
        return replace(self, learning_rate=Range(low, high, log=True))

    def with_param_budget(self, low: int = PARAM_BUDGET_RANGE[0], high: int = PARAM_BUDGET_RANGE[1]) -> "HyperparameterSpace":
        return replace(self, cell_dim=None, param_budget=Range(low, high, integer=True))

    @classmethod
    def preset(cls, name: str, optimizer: OptimizerKind = OptimizerKind.COCOB) -> "HyperparameterSpace":
        """Initial ranges used for one of the competition collections"""
        try:
            batch, epochs, epoch_size, noise, psi, dim, layers, init = HYPERPARAMETER_RANGES[name]
        except KeyError as e:
            raise ManifestError(
                f"unknown preset '{name}', choose from {sorted(HYPERPARAMETER_RANGES)}"
            ) from e
        return cls(
            minibatch_size=Range(*batch, integer=True),
            epochs=Range(*epochs, integer=True),
            epoch_size=Range(*epoch_size, integer=True),
            noise_sigma=Range(*noise),
            l2_psi=Range(*psi),
            cell_dim=Range(*dim, integer=True),
            layers=Range(*layers, integer=True),
            init_sigma=Range(*init),
        ).for_optimizer(optimizer)

    @classmethod
    def default(cls, n_series: int, optimizer: OptimizerKind = OptimizerKind.COCOB) -> "HyperparameterSpace":
        """Desk-scale ranges with the minibatch floor at about a tenth of the collection"""
        floor = max(1, round(n_series / 10))
        return cls(
            minibatch_size=Range(floor, max(floor, 3 * floor), integer=True),
            epochs=Range(3, 25, integer=True),
            epoch_size=Range(2, 10, integer=True),
            noise_sigma=Range(0.0001, 0.0008),
            l2_psi=Range(0.0001, 0.0008),
            cell_dim=Range(20, 50, integer=True),
            layers=Range(1, 2, integer=True),
            init_sigma=Range(0.0001, 0.0008),
        ).for_optimizer(optimizer)

    def to_dict(self) -> Dict[str, Any]:
        return {name: asdict(bounds) for name, bounds in self.items().items()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "HyperparameterSpace":
        try:
            ranges = {}
            for name, bounds in data.items():
                if isinstance(bounds, (list, tuple)):
                    bounds = {"low": bounds[0], "high": bounds[1]}
                bounds.setdefault("integer", name in _INTEGER_NAMES)
                bounds.setdefault("log", name == "learning_rate")
                ranges[name] = Range(**bounds)
            return cls(**ranges)
        except (TypeError, KeyError, IndexError) as e:
            raise ManifestError(f"invalid hyperparameter space: {e}") from e

    @classmethod
    def load(cls, path: Union[str, Path]) -> "HyperparameterSpace":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ManifestError(f"'{path}' is not valid JSON: {e}") from e
        return cls.from_dict(data)


@dataclass
class TrialRecord:
    index: int
    params: Dict[str, Any]
    validation_smape: float
    seconds: float = 0.0

    @property
    def failed(self) -> bool:
        return not math.isfinite(self.validation_smape)


@dataclass
class TuneResult:
    best_config: ModelConfig
    trials: List[TrialRecord]
    iterations: int

    @property
    def best_error(self) -> float:
        return min(t.validation_smape for t in self.trials if not t.failed)
