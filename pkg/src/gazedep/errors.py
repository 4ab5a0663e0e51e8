"""Exception hierarchy. The CLI maps DataError to exit code 1, ConfigError to 2."""


class GazeDepError(Exception):
    pass


class DataError(GazeDepError):
    """Malformed or inconsistent input data."""


class ConfigError(GazeDepError):
    """Invalid run configuration or call contract."""


class ConlluError(DataError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class GazeFormatError(DataError):
    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class AlignmentError(DataError):
    pass


class ModelFileError(DataError):
    pass
