class CohopError(Exception):
    pass


class ConfigError(CohopError, ValueError):
    """Invalid hyper-parameter or flag combination."""


class DataError(CohopError):
    """Problem with dataset contents; carries file and line context when known."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class GraphInputError(DataError, ValueError):
    pass


class MissingFileError(DataError, FileNotFoundError):
    pass


class MalformedLineError(DataError, ValueError):
    pass


class DimensionMismatchError(DataError, ValueError):
    pass


class LabelRangeError(DataError, ValueError):
    pass
