"""Exception hierarchy; each class maps onto a command-line exit status."""


class HorizonError(Exception):
    exit_code = 3


class InputError(HorizonError):
    exit_code = 4


class ParseError(InputError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"{message} (line {line})")
        self.line = line


class DataError(InputError):
    pass


class DomainError(InputError):
    pass


class GeometryError(InputError):
    pass


class AdmissibilityError(InputError):
    def __init__(self, message, worst_point=None, margin=None):
        super().__init__(message)
        self.worst_point = worst_point
        self.margin = margin


class BarrierError(HorizonError):
    def __init__(self, message, max_t=None):
        super().__init__(message)
        self.max_t = max_t


class SolverError(HorizonError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class NumericError(SolverError):
    pass


class ExtractionError(HorizonError):
    pass


class IterationError(HorizonError):
    def __init__(self, message, distances=None):
        super().__init__(message)
        self.distances = distances


class OracleError(HorizonError):
    pass


class NoHorizon(HorizonError):
    """Signal: the radial scalars never cross."""

    exit_code = 2
