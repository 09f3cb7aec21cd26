__all__ = [
    "Pipeline",
    "Stage",
    "Decomposition",
    "NormalizationRecord",
    "WindowBlock",
    "WindowSet",
]

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

import numpy as np

from globalrnn.exceptions import ContractError


class Pipeline(str, Enum):
    STL = "STL"
    NOSTL = "NOSTL"


class Stage(str, Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"
    REFIT = "refit"


@dataclass(eq=False)
class Decomposition:
    seasonal: np.ndarray
    trend: np.ndarray
    remainder: np.ndarray
    period: int

    def __len__(self) -> int:
        return int(self.trend.size)

    @property
    def deseasonalized(self) -> np.ndarray:
        return self.trend + self.remainder

    def seasonal_at(self, start: int, count: int) -> np.ndarray:
        """Seasonal component for positions `start .. start + count - 1`, extended periodically"""
        positions = np.arange(start, start + count)
        if not np.any(self.seasonal):
            return np.zeros(count)
        return self.seasonal[positions % self.period]


@dataclass(eq=False)
class NormalizationRecord:
    pipeline: Pipeline
    log_offset: int = 0
    series_mean: Optional[float] = None
    trend_anchor: Optional[float] = None
    seasonal_future: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.log_offset not in (0, 1):
            raise ContractError(f"log_offset must be 0 or 1, got {self.log_offset}")
        if self.pipeline is Pipeline.STL:
            if self.trend_anchor is None or self.seasonal_future is None:
                raise ContractError("STL record needs trend_anchor and seasonal_future")
            if self.series_mean is not None:
                raise ContractError("STL record must not carry series_mean")
        else:
            if self.series_mean is None:
                raise ContractError("NOSTL record needs series_mean")
            if self.trend_anchor is not None or self.seasonal_future is not None:
                raise ContractError(
                    "NOSTL record must not carry trend_anchor or seasonal_future"
                )


@dataclass(eq=False)
class WindowBlock:
    """One (input, target) pair; `start` is the position of the first input value"""

    input: np.ndarray
    target: Optional[np.ndarray]
    record: Optional[NormalizationRecord] = None
    start: int = 0


@dataclass(eq=False)
class WindowSet:
    """Blocks of one series for one stage

    Moving-window sets hold one block per recurrent step (vector inputs of
    size `m`). Sequence sets (`moving_window=False`) hold a single block whose
    input is the scalar step sequence, so `m == 1`.
    """

    series_id: str
    blocks: List[WindowBlock]
    m: int
    n: int
    stage: Stage
    moving_window: bool = True
    integer_valued: bool = False

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def last(self) -> WindowBlock:
        return self.blocks[-1]

    @property
    def trainable_blocks(self) -> List[WindowBlock]:
        return [block for block in self.blocks if block.target is not None]
