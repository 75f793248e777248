"""Exception hierarchy.

``ModelError`` covers malformed inputs (bad graphs, unknown names, invalid
tables); the CLI maps it to exit code 2. ``StatisticalError`` covers
quantities that are undefined for the given data or distribution; exit code 3.
"""


class InfocauseError(Exception):
    exit_code = 1


class ModelError(InfocauseError, ValueError):
    exit_code = 2


class StatisticalError(InfocauseError):
    exit_code = 3


class CyclicGraph(ModelError):
    pass


class UnknownNode(ModelError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class UnknownState(ModelError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class UnknownEdge(ModelError):
    pass


class UnknownLink(ModelError):
    pass


class OverlappingSets(ModelError):
    pass


class RoleMismatch(ModelError):
    pass


class SupportMismatch(ModelError):
    pass


class TooManyCovariates(ModelError):
    pass


class StateSpaceTooLarge(ModelError):
    pass


class SeriesTooShort(ModelError):
    pass


class ParseError(ModelError):
    pass


class ValidationError(ModelError):
    pass


class ZeroProbabilityConditioning(StatisticalError):
    pass


class UndefinedConditional(StatisticalError):
    pass


class NotIdentifiable(StatisticalError):
    pass


class AllReplicatesFailed(StatisticalError):
    pass


class NumericalInconsistency(InfocauseError, ArithmeticError):
    """A quantity that must be nonnegative came out clearly negative."""
