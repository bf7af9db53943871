"""Exception hierarchy. Each top-level family maps to a CLI exit code."""


class PipelineError(Exception):
    exit_code = 1


class ConfigError(PipelineError):
    exit_code = 2


class DataError(PipelineError):
    exit_code = 3


class SchemaError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class EncodingError(DataError):
    def __init__(self, message, token=None):
        super().__init__(message)
        self.token = token


class ImputationError(DataError):
    pass


class StratificationError(DataError):
    pass


class StageError(DataError):
    pass


class NumericError(PipelineError):
    exit_code = 4


class ConvergenceError(NumericError):
    pass


class DegenerateDataError(NumericError):
    pass


class ContractError(PipelineError, ValueError):
    """Caller violated a shape or feature-set precondition."""
