"""
Exception hierarchy shared by the library, the CLI and the HTTP service.

Every error carries the exit code the CLI returns for it and the status code the
localization service answers with.
"""

from http import HTTPStatus


class MoeloError(Exception):
    exit_code: int = 1
    status_code: int = HTTPStatus.INTERNAL_SERVER_ERROR

    def __init__(self, message: str, details: str | None = None):
        self.message = message
        self.details = details
        super().__init__(self.message if details is None else f"{message} ({details})")


class ShapeError(MoeloError):
    status_code = HTTPStatus.BAD_REQUEST


class StateError(MoeloError):
    status_code = HTTPStatus.CONFLICT


class NumericError(MoeloError):
    pass


class DegenerateInputError(MoeloError):
    status_code = HTTPStatus.BAD_REQUEST


class GeometryError(MoeloError):
    pass


class RegistryError(MoeloError):
    status_code = HTTPStatus.BAD_REQUEST


class CapacityError(MoeloError):
    status_code = HTTPStatus.CONFLICT


class PlanError(MoeloError):
    pass


class DataError(MoeloError):
    status_code = HTTPStatus.BAD_REQUEST


class DatasetParseError(DataError):
    def __init__(self, message: str, line: int | None = None, details: str | None = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}", details)


class ConfigError(MoeloError):
    exit_code = 2
    status_code = HTTPStatus.BAD_REQUEST
