"""Exception hierarchy shared by all modules."""


class HolobesovError(Exception):
    pass


class DegeneratePointError(HolobesovError):
    pass


class ProjectionError(HolobesovError):
    pass


class DecompositionError(HolobesovError):
    pass


class ConditioningError(HolobesovError):
    pass


class IllPosedGridError(HolobesovError):
    pass


class GridGeometryError(HolobesovError):
    pass


class AccuracyError(HolobesovError):
    pass


class EmptyDomainError(HolobesovError):
    pass


class InvalidOrderError(HolobesovError):
    pass


class SingularKernelError(HolobesovError):
    pass


class OrderTooSmallError(HolobesovError):
    pass


class IncompleteSequenceError(HolobesovError):
    pass


class ParameterError(HolobesovError):
    pass


class InsufficientDataError(HolobesovError):
    pass


class ConfigError(HolobesovError):
    pass
