import logging

logger = logging.getLogger("mimosim")

ERROR_MESSAGE = """The simulation stopped on an error.
Run again with --verbose to see the full traceback.
Error type: {error_type}
"""
ERROR_MESSAGE_SCENARIO = """The scenario file is not valid: {detail}"""

ERROR_MESSAGE_GEOMETRY = """Users could not be placed in their cells: {detail}"""

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID_SCENARIO = 2
EXIT_NOT_CONVERGED = 3


class MimoError(Exception):
    """Base class for every error raised by mimolib."""


class InvalidParameterError(MimoError, ValueError):
    pass


class DistanceTooSmallError(InvalidParameterError):
    pass


class DimensionMismatchError(MimoError, ValueError):
    pass


class NotPositiveSemidefiniteError(MimoError, ValueError):
    pass


class UnknownUserError(MimoError, KeyError):
    def __str__(self) -> str:
        # KeyError quotes its argument; keep the message readable
        return str(self.args[0]) if self.args else "unknown user"


class DegenerateStatisticsError(MimoError):
    """Raised when large-scale statistics make a quantity undefined (for example a zero signal coefficient)."""


class GeometryError(MimoError):
    pass


class ScenarioValidationError(MimoError):
    pass


def error_dict(error: Exception) -> dict:
    if isinstance(error, ScenarioValidationError):
        return {"error": ERROR_MESSAGE_SCENARIO.format(detail=error)}
    if isinstance(error, GeometryError):
        return {"error": ERROR_MESSAGE_GEOMETRY.format(detail=error)}
    return {"error": ERROR_MESSAGE.format(error_type=type(error))}


def exit_code(error: Exception) -> int:
    if isinstance(error, ScenarioValidationError):
        return EXIT_INVALID_SCENARIO
    return EXIT_FAILURE


def report_error(error: Exception, command: str) -> int:
    logger.exception("Exception in %s: %s", command, error)
    logger.error(error_dict(error)["error"])
    return exit_code(error)
