class ForecastError(Exception):
    exit_code: int = 1


class InputError(ForecastError):
    exit_code = 2


class DataContractError(ForecastError):
    exit_code = 3


class NumericFailure(ForecastError):
    exit_code = 4


# Input


class SeriesParseError(InputError):
    pass


class ManifestError(InputError):
    pass


# Data contracts


class SeriesValidationError(DataContractError):
    pass


class ImputationError(DataContractError):
    pass


class SplitError(DataContractError):
    pass


class DomainError(DataContractError):
    pass


class ScalingError(DataContractError):
    pass


class SizingError(DataContractError):
    pass


class ContractError(DataContractError):
    pass


class ShapeError(DataContractError):
    pass


class CacheError(DataContractError):
    pass


class UndefinedMetricError(DataContractError):
    pass


class AggregationError(DataContractError):
    pass


# Numerics


class NumericError(NumericFailure):
    pass


class DeterminismError(NumericFailure):
    pass


class TrainingError(NumericFailure):
    pass


class TuningError(NumericFailure):
    pass
