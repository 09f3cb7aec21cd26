__all__ = ["TimeSeries", "SeriesCollection", "SplitSeries"]

from dataclasses import dataclass, field, replace
from typing import Dict, Iterator, List, Optional

import numpy as np

from globalrnn.exceptions import SeriesValidationError


@dataclass(eq=False)
class TimeSeries:
    """One identified univariate series, missing values held as NaN"""

    id: str
    values: np.ndarray
    period: int = 1
    horizon: int = 1
    start_index: int = 0
    integer_valued: bool = False

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if self.values.size < 1:
            raise SeriesValidationError(f"series '{self.id}' has no values")
        if self.period < 1:
            raise SeriesValidationError(
                f"series '{self.id}': period must be >= 1, got {self.period}"
            )
        if self.horizon < 1:
            raise SeriesValidationError(
                f"series '{self.id}': horizon must be >= 1, got {self.horizon}"
            )
        if not 0 <= self.start_index < self.period:
            raise SeriesValidationError(
                f"series '{self.id}': start_index {self.start_index} "
                f"outside [0, {self.period})"
            )

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def has_missing(self) -> bool:
        return bool(np.isnan(self.values).any())

    def phases(self) -> np.ndarray:
        """Position of every observation within one seasonal period"""
        return (self.start_index + np.arange(len(self))) % self.period

    def with_values(self, values: np.ndarray) -> "TimeSeries":
        return replace(self, values=np.asarray(values, dtype=np.float64))


@dataclass
class SeriesCollection:
    name: str
    series: List[TimeSeries]
    horizon: int
    period: int = 1
    integer_valued: bool = False
    _index: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._index = {}
        for pos, item in enumerate(self.series):
            if item.id in self._index:
                raise SeriesValidationError(f"duplicate series id '{item.id}'")
            self._index[item.id] = pos

    def __iter__(self) -> Iterator[TimeSeries]:
        return iter(self.series)

    def __len__(self) -> int:
        return len(self.series)

    def __getitem__(self, series_id: str) -> TimeSeries:
        return self.series[self._index[series_id]]

    def __contains__(self, series_id: str) -> bool:
        return series_id in self._index

    @property
    def ids(self) -> List[str]:
        return [item.id for item in self.series]

    @property
    def is_homogeneous(self) -> bool:
        return all(item.horizon == self.horizon for item in self.series)

    def subset(self, series: List[TimeSeries], name: Optional[str] = None) -> "SeriesCollection":
        horizon = series[0].horizon if series else self.horizon
        return SeriesCollection(
            name=name or self.name,
            series=series,
            horizon=horizon,
            period=self.period,
            integer_valued=self.integer_valued,
        )

    def horizon_groups(self) -> Dict[int, "SeriesCollection"]:
        """Split into sub-collections sharing one horizon, in first-seen order"""
        groups: Dict[int, List[TimeSeries]] = {}
        for item in self.series:
            groups.setdefault(item.horizon, []).append(item)
        if len(groups) == 1:
            return {next(iter(groups)): self}
        return {
            horizon: self.subset(members, name=f"{self.name}_h{horizon}")
            for horizon, members in groups.items()
        }


@dataclass(eq=False)
class SplitSeries:
    train: np.ndarray
    validation_target: np.ndarray
