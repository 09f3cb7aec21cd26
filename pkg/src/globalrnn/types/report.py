__all__ = ["SeriesScore", "EvaluationReport"]

from dataclasses import dataclass, field
from typing import Dict, Optional


@dataclass
class SeriesScore:
    smape: Optional[float]
    mase: Optional[float]


@dataclass
class EvaluationReport:
    """Per-series scores of one model plus their aggregates

    `None` marks a metric that is undefined for that series; aggregates skip
    those and count them in `skipped`.
    """

    model_label: str
    per_series: Dict[str, SeriesScore]
    aggregates: Dict[str, float] = field(default_factory=dict)
    skipped: Dict[str, int] = field(default_factory=dict)
