"""Exception hierarchy.

``exit_code`` is the process status the command line uses for each family.
"""


class AircombatError(Exception):
    exit_code = 1


class InvalidInputError(AircombatError, ValueError):
    exit_code = 2


class DegenerateGeometryError(InvalidInputError):
    pass


class InvalidConfigError(InvalidInputError):
    pass


class InvalidActionError(InvalidInputError):
    pass


class InvalidStateError(InvalidInputError):
    pass


class InvalidQueryError(InvalidInputError):
    pass


class InvalidCommandError(InvalidInputError):
    pass


class InvalidMaskError(InvalidInputError):
    pass


class ShapeError(InvalidInputError):
    pass


class CheckpointError(AircombatError):
    exit_code = 2


class DivergenceError(AircombatError, FloatingPointError):
    exit_code = 3


class MissingArtifactError(AircombatError, FileNotFoundError):
    exit_code = 4


class InvalidSetupError(AircombatError):
    exit_code = 2


class AggregationError(AircombatError, ValueError):
    exit_code = 2


class LogIntegrityError(AircombatError, ValueError):
    exit_code = 2


class InsufficientDataError(AircombatError, ValueError):
    exit_code = 2


class InvalidComponentError(AircombatError, KeyError):
    exit_code = 2


class ConsistencyError(AircombatError, AssertionError):
    """An internal invariant was violated."""
