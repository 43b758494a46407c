"""Exception hierarchy. Each class carries the process exit code used by the CLI."""


class PmError(Exception):
    exit_code = 1


class ConfigError(PmError):
    exit_code = 2


class DataValidationError(PmError):
    exit_code = 3

    def __init__(self, message, row=None, path=None):
        self.row = row
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}: "
        if row is not None:
            where += f"row {row}: "
        super().__init__(where + message)


class UnknownAuthorError(DataValidationError):
    pass


class DuplicateAuthorError(DataValidationError):
    pass


class NegativeCitationsError(DataValidationError):
    pass


class InvalidAuthorCountError(DataValidationError):
    pass


class MalformedRowError(DataValidationError):
    pass


class NumericalError(PmError):
    exit_code = 4


class InsufficientSampleError(NumericalError):
    pass


class SingularCovarianceError(NumericalError):
    pass


class NotAtMinimumError(NumericalError):
    pass


class OutputError(PmError):
    exit_code = 5
