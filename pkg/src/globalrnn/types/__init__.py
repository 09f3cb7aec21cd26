from .config import (  # noqa ignore=F401
    ArchitectureKind,
    CellKind,
    HyperparameterSpace,
    Hyperparameters,
    ModelConfig,
    OptimizerKind,
    Range,
    TrialRecord,
    TuneResult,
    WindowVariant,
)
from .report import EvaluationReport, SeriesScore  # noqa ignore=F401
from .series import SeriesCollection, SplitSeries, TimeSeries  # noqa ignore=F401
from .windows import (  # noqa ignore=F401
    Decomposition,
    NormalizationRecord,
    Pipeline,
    Stage,
    WindowBlock,
    WindowSet,
)
